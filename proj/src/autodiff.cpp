#include "fgad/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fgad/error.hpp"
#include "fgad/kernels.hpp"

namespace fgad::ad {

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::AddRowBroadcast: return "add_row_broadcast";
    case Op::Scale: return "scale";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softplus: return "softplus";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Log: return "log";
    case Op::Exp: return "exp";
    case Op::Clamp: return "clamp";
    case Op::SumAll: return "sum_all";
    case Op::SumRows: return "sum_rows";
    case Op::MeanAll: return "mean_all";
    case Op::ConcatCols: return "concat_cols";
    case Op::ConcatRows: return "concat_rows";
    case Op::SoftmaxRows: return "softmax_rows";
    case Op::LogSoftmaxRows: return "log_softmax_rows";
  }
  return "unknown";
}

const Matrix& Var::value() const { return tape_->value(*this); }
Matrix Var::grad() const { return tape_->grad(*this); }

double Var::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw DimensionError("item() on non-scalar " + v.shape_string());
  return v(0, 0);
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  return parts.front().tape().concat_cols(parts);
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  return parts.front().tape().concat_rows(parts);
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, Op op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op_name(op)) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

void require_nonempty(const Matrix& a, Op op) {
  if (a.empty()) throw DimensionError(std::string(op_name(op)) + ": empty matrix");
}

template <class F>
Matrix map(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  auto src = a.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// Row-wise softmax of x / t with max subtraction; also returns log-softmax
// when asked.
void softmax_core(const Matrix& x, double t, Matrix* prob, Matrix* logprob) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (prob) *prob = Matrix(n, d);
  if (logprob) *logprob = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -INFINITY;
    for (std::size_t j = 0; j < d; ++j) m = std::max(m, x(i, j) / t);
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::exp(x(i, j) / t - m);
    const double log_s = std::log(s);
    for (std::size_t j = 0; j < d; ++j) {
      const double shifted = x(i, j) / t - m;
      if (prob) (*prob)(i, j) = std::exp(shifted) / s;
      if (logprob) (*logprob)(i, j) = shifted - log_s;
    }
  }
}

}  // namespace

void Tape::check_owner(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) throw ParameterError("variable does not belong to this tape");
}

const Tape::Node& Tape::node(Var v) const {
  check_owner(v);
  return nodes_[v.id_];
}

Var Tape::push(Node n) {
  if (!n.value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + std::string(op_name(n.op)));
  }
  for (std::size_t in : n.inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  op_counts_[static_cast<std::size_t>(n.op)]++;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::detach(Var v) { return leaf(node(v).value, false); }

Var Tape::matmul(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: cannot multiply " + av.shape_string() + " by " + bv.shape_string());
  }
  Node n;
  n.op = Op::MatMul;
  kernels::matmul(av, bv, n.value);
  n.inputs = {a.id_, b.id_};
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::Transpose;
  n.value = node(a).value.transposed();
  n.inputs = {a.id_};
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  require_same_shape(av, bv, Op::Add);
  Node n;
  n.op = Op::Add;
  n.value = av;
  auto dst = n.value.values();
  auto src = bv.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  n.inputs = {a.id_, b.id_};
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  require_same_shape(av, bv, Op::Sub);
  Node n;
  n.op = Op::Sub;
  n.value = av;
  auto dst = n.value.values();
  auto src = bv.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
  n.inputs = {a.id_, b.id_};
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  require_same_shape(av, bv, Op::Mul);
  Node n;
  n.op = Op::Mul;
  n.value = av;
  auto dst = n.value.values();
  auto src = bv.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= src[i];
  n.inputs = {a.id_, b.id_};
  return push(std::move(n));
}

Var Tape::add_row_broadcast(Var a, Var b) {
  const Matrix& av = node(a).value;
  const Matrix& bv = node(b).value;
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw DimensionError("add_row_broadcast: cannot broadcast " + bv.shape_string() + " over " +
                         av.shape_string());
  }
  Node n;
  n.op = Op::AddRowBroadcast;
  n.value = av;
  for (std::size_t i = 0; i < av.rows(); ++i) {
    auto r = n.value.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv(0, j);
  }
  n.inputs = {a.id_, b.id_};
  return push(std::move(n));
}

Var Tape::scale(Var a, double c) {
  Node n;
  n.op = Op::Scale;
  n.value = map(node(a).value, [c](double x) { return c * x; });
  n.inputs = {a.id_};
  n.p0 = c;
  return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::Sigmoid;
  n.value = map(node(a).value, [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  n.inputs = {a.id_};
  return push(std::move(n));
}

Var Tape::softplus(Var a) {
  Node n;
  n.op = Op::Softplus;
  n.value = map(node(a).value, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  n.inputs = {a.id_};
  return push(std::move(n));
}

Var Tape::leaky_relu(Var a, double slope) {
  Node n;
  n.op = Op::LeakyRelu;
  n.value = map(node(a).value, [slope](double x) { return x > 0 ? x : slope * x; });
  n.inputs = {a.id_};
  n.p0 = slope;
  return push(std::move(n));
}

Var Tape::log(Var a) {
  const Matrix& av = node(a).value;
  for (double x : av.values()) {
    if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x) + " (clamp first)");
  }
  Node n;
  n.op = Op::Log;
  n.value = map(av, [](double x) { return std::log(x); });
  n.inputs = {a.id_};
  return push(std::move(n));
}

Var Tape::exp(Var a) {
  Node n;
  n.op = Op::Exp;
  n.value = map(node(a).value, [](double x) { return std::exp(x); });
  n.inputs = {a.id_};
  return push(std::move(n));
}

Var Tape::clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ParameterError("clamp: lo must not exceed hi");
  Node n;
  n.op = Op::Clamp;
  n.value = map(node(a).value, [lo, hi](double x) { return std::clamp(x, lo, hi); });
  n.inputs = {a.id_};
  n.p0 = lo;
  n.p1 = hi;
  return push(std::move(n));
}

Var Tape::sum_all(Var a) {
  const Matrix& av = node(a).value;
  require_nonempty(av, Op::SumAll);
  double s = 0.0;
  for (double x : av.values()) s += x;
  Node n;
  n.op = Op::SumAll;
  n.value = Matrix(1, 1, s);
  n.inputs = {a.id_};
  return push(std::move(n));
}

Var Tape::sum_rows(Var a) {
  const Matrix& av = node(a).value;
  require_nonempty(av, Op::SumRows);
  Node n;
  n.op = Op::SumRows;
  n.value = Matrix(1, av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) n.value(0, j) += av(i, j);
  n.inputs = {a.id_};
  return push(std::move(n));
}

Var Tape::mean_all(Var a) {
  const Matrix& av = node(a).value;
  require_nonempty(av, Op::MeanAll);
  double s = 0.0;
  for (double x : av.values()) s += x;
  Node n;
  n.op = Op::MeanAll;
  n.value = Matrix(1, 1, s / static_cast<double>(av.size()));
  n.inputs = {a.id_};
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  const std::size_t rows = node(parts[0]).value.rows();
  std::size_t cols = 0;
  for (Var p : parts) {
    const Matrix& pv = node(p).value;
    if (pv.rows() != rows) {
      throw DimensionError("concat_cols: row count mismatch " + pv.shape_string() + " vs " +
                           std::to_string(rows) + " rows");
    }
    cols += pv.cols();
  }
  Node n;
  n.op = Op::ConcatCols;
  n.value = Matrix(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Matrix& pv = node(p).value;
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(pv.row(i).begin(), pv.row(i).end(), n.value.row(i).begin() + static_cast<std::ptrdiff_t>(offset));
    offset += pv.cols();
    n.inputs.push_back(p.id_);
  }
  return push(std::move(n));
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  const std::size_t cols = node(parts[0]).value.cols();
  std::vector<double> data;
  std::size_t rows = 0;
  Node n;
  n.op = Op::ConcatRows;
  for (Var p : parts) {
    const Matrix& pv = node(p).value;
    if (pv.cols() != cols) {
      throw DimensionError("concat_rows: column count mismatch " + pv.shape_string() + " vs " +
                           std::to_string(cols) + " cols");
    }
    data.insert(data.end(), pv.values().begin(), pv.values().end());
    rows += pv.rows();
    n.inputs.push_back(p.id_);
  }
  n.value = Matrix(rows, cols, std::move(data));
  return push(std::move(n));
}

Var Tape::softmax_rows(Var a, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("softmax_rows: temperature must be positive");
  Node n;
  n.op = Op::SoftmaxRows;
  softmax_core(node(a).value, temperature, &n.value, nullptr);
  n.inputs = {a.id_};
  n.p0 = temperature;
  return push(std::move(n));
}

Var Tape::log_softmax_rows(Var a, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("log_softmax_rows: temperature must be positive");
  Node n;
  n.op = Op::LogSoftmaxRows;
  softmax_core(node(a).value, temperature, nullptr, &n.value);
  n.inputs = {a.id_};
  n.p0 = temperature;
  return push(std::move(n));
}

Matrix Tape::grad(Var v) const {
  check_owner(v);
  if (v.id_ < grads_.size()) return grads_[v.id_];
  const Matrix& val = nodes_[v.id_].value;
  return Matrix(val.rows(), val.cols());
}

void Tape::backward(Var loss) {
  check_owner(loss);
  const Matrix& lv = nodes_[loss.id_].value;
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw DimensionError("backward: loss must be 1x1, got " + lv.shape_string());
  }
  grads_.clear();
  grads_.reserve(nodes_.size());
  for (const Node& n : nodes_) grads_.emplace_back(n.value.rows(), n.value.cols());
  grads_[loss.id_](0, 0) = 1.0;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    if (nodes_[id].requires_grad && nodes_[id].op != Op::Leaf) propagate(id);
  }
}

void Tape::propagate(std::size_t id) {
  const Node& n = nodes_[id];
  const Matrix& g = grads_[id];
  auto wants = [&](std::size_t k) { return nodes_[n.inputs[k]].requires_grad; };
  auto gin = [&](std::size_t k) -> Matrix& { return grads_[n.inputs[k]]; };
  auto in = [&](std::size_t k) -> const Matrix& { return nodes_[n.inputs[k]].value; };

  // Elementwise accumulation helper: gin(k)[i] += f(i).
  auto accumulate = [&](std::size_t k, auto f) {
    auto dst = gin(k).values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += f(i);
  };
  auto gv = g.values();

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul:
      if (wants(0)) kernels::matmul_nt(g, in(1), gin(0), kernels::Accumulate::Add);
      if (wants(1)) kernels::matmul_tn(in(0), g, gin(1), kernels::Accumulate::Add);
      break;
    case Op::Transpose:
      if (wants(0)) {
        Matrix& ga = gin(0);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
      }
      break;
    case Op::Add:
      if (wants(0)) accumulate(0, [&](std::size_t i) { return gv[i]; });
      if (wants(1)) accumulate(1, [&](std::size_t i) { return gv[i]; });
      break;
    case Op::Sub:
      if (wants(0)) accumulate(0, [&](std::size_t i) { return gv[i]; });
      if (wants(1)) accumulate(1, [&](std::size_t i) { return -gv[i]; });
      break;
    case Op::Mul: {
      auto av = in(0).values();
      auto bv = in(1).values();
      if (wants(0)) accumulate(0, [&](std::size_t i) { return gv[i] * bv[i]; });
      if (wants(1)) accumulate(1, [&](std::size_t i) { return gv[i] * av[i]; });
      break;
    }
    case Op::AddRowBroadcast:
      if (wants(0)) accumulate(0, [&](std::size_t i) { return gv[i]; });
      if (wants(1)) {
        Matrix& gb = gin(1);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
      }
      break;
    case Op::Scale:
      if (wants(0)) accumulate(0, [&](std::size_t i) { return n.p0 * gv[i]; });
      break;
    case Op::Sigmoid: {
      auto y = n.value.values();
      if (wants(0)) accumulate(0, [&](std::size_t i) { return gv[i] * y[i] * (1.0 - y[i]); });
      break;
    }
    case Op::Softplus: {
      auto x = in(0).values();
      if (wants(0)) {
        accumulate(0, [&](std::size_t i) {
          const double s = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
          return gv[i] * s;
        });
      }
      break;
    }
    case Op::LeakyRelu: {
      auto x = in(0).values();
      if (wants(0)) accumulate(0, [&](std::size_t i) { return x[i] > 0 ? gv[i] : n.p0 * gv[i]; });
      break;
    }
    case Op::Log: {
      auto x = in(0).values();
      if (wants(0)) accumulate(0, [&](std::size_t i) { return gv[i] / x[i]; });
      break;
    }
    case Op::Exp: {
      auto y = n.value.values();
      if (wants(0)) accumulate(0, [&](std::size_t i) { return gv[i] * y[i]; });
      break;
    }
    case Op::Clamp: {
      auto x = in(0).values();
      if (wants(0))
        accumulate(0, [&](std::size_t i) { return (x[i] >= n.p0 && x[i] <= n.p1) ? gv[i] : 0.0; });
      break;
    }
    case Op::SumAll:
      if (wants(0)) accumulate(0, [&](std::size_t) { return g(0, 0); });
      break;
    case Op::SumRows:
      if (wants(0)) {
        Matrix& ga = gin(0);
        for (std::size_t i = 0; i < ga.rows(); ++i)
          for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j);
      }
      break;
    case Op::MeanAll:
      if (wants(0)) {
        const double share = g(0, 0) / static_cast<double>(in(0).size());
        accumulate(0, [&](std::size_t) { return share; });
      }
      break;
    case Op::ConcatCols: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t width = in(k).cols();
        if (wants(k)) {
          Matrix& gk = gin(k);
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < width; ++j) gk(i, j) += g(i, offset + j);
        }
        offset += width;
      }
      break;
    }
    case Op::ConcatRows: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const std::size_t height = in(k).rows();
        if (wants(k)) {
          Matrix& gk = gin(k);
          for (std::size_t i = 0; i < height; ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) gk(i, j) += g(offset + i, j);
        }
        offset += height;
      }
      break;
    }
    case Op::SoftmaxRows:
      if (wants(0)) {
        const Matrix& y = n.value;
        Matrix& ga = gin(0);
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double dot = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot) / n.p0;
        }
      }
      break;
    case Op::LogSoftmaxRows:
      if (wants(0)) {
        const Matrix& y = n.value;
        Matrix& ga = gin(0);
        for (std::size_t i = 0; i < y.rows(); ++i) {
          double gsum = 0.0;
          for (std::size_t j = 0; j < y.cols(); ++j) gsum += g(i, j);
          for (std::size_t j = 0; j < y.cols(); ++j)
            ga(i, j) += (g(i, j) - std::exp(y(i, j)) * gsum) / n.p0;
        }
      }
      break;
  }
}

}  // namespace fgad::ad
