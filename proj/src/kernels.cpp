#include "fgad/kernels.hpp"

#include <omp.h>

#include <vector>

#include "fgad/error.hpp"

namespace fgad::kernels {
namespace {

void ensure_output(Matrix& out, std::size_t rows, std::size_t cols, Accumulate acc) {
  if (acc == Accumulate::Add) {
    if (out.rows() != rows || out.cols() != cols) {
      throw DimensionError("accumulation target " + out.shape_string() + " expected " +
                           shape_string(rows, cols));
    }
  } else if (out.rows() != rows || out.cols() != cols) {
    out = Matrix(rows, cols);
  }
}

void check_mm(const Matrix& a, const Matrix& b, std::size_t a_inner, std::size_t b_inner,
              const char* what) {
  if (a_inner != b_inner) {
    throw DimensionError(std::string(what) + ": incompatible shapes " + a.shape_string() +
                         " and " + b.shape_string());
  }
}

inline void store(double& dst, double v, Accumulate acc) {
  if (acc == Accumulate::Add)
    dst += v;
  else
    dst = v;
}

// Row i of a*b, streamed over k so the j loop vectorises; per element the
// sum still runs over k in increasing order.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i,
                       std::vector<double>& tmp, Accumulate acc) {
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  tmp.assign(n, 0.0);
  const double* arow = a.row(i).data();
  for (std::size_t k = 0; k < inner; ++k) {
    const double aik = arow[k];
    const double* brow = b.row(k).data();
    for (std::size_t j = 0; j < n; ++j) tmp[j] += aik * brow[j];
  }
  double* orow = out.row(i).data();
  for (std::size_t j = 0; j < n; ++j) store(orow[j], tmp[j], acc);
}

inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i,
                          std::vector<double>& tmp, Accumulate acc) {
  const std::size_t inner = a.rows();
  const std::size_t n = b.cols();
  tmp.assign(n, 0.0);
  for (std::size_t k = 0; k < inner; ++k) {
    const double aki = a(k, i);
    const double* brow = b.row(k).data();
    for (std::size_t j = 0; j < n; ++j) tmp[j] += aki * brow[j];
  }
  double* orow = out.row(i).data();
  for (std::size_t j = 0; j < n; ++j) store(orow[j], tmp[j], acc);
}

inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i,
                          Accumulate acc) {
  const std::size_t inner = a.cols();
  const double* arow = a.row(i).data();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* brow = b.row(j).data();
    double s = 0.0;
    for (std::size_t k = 0; k < inner; ++k) s += arow[k] * brow[k];
    store(out(i, j), s, acc);
  }
}

void check_weighted(std::span<const std::span<const double>> vectors,
                    std::span<const double> weights, std::span<double> out) {
  if (vectors.size() != weights.size()) {
    throw DimensionError("weighted_sum: " + std::to_string(vectors.size()) + " vectors but " +
                         std::to_string(weights.size()) + " weights");
  }
  for (const auto& v : vectors) {
    if (v.size() != out.size()) throw DimensionError("weighted_sum: vector length mismatch");
  }
}

}  // namespace

namespace reference {

void matmul(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  check_mm(a, b, a.cols(), b.rows(), "matmul");
  ensure_output(out, a.rows(), b.cols(), acc);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      store(out(i, j), s, acc);
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  check_mm(a, b, a.rows(), b.rows(), "matmul_tn");
  ensure_output(out, a.cols(), b.cols(), acc);
  for (std::size_t i = 0; i < a.cols(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
      store(out(i, j), s, acc);
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  check_mm(a, b, a.cols(), b.cols(), "matmul_nt");
  ensure_output(out, a.rows(), b.rows(), acc);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      store(out(i, j), s, acc);
    }
  }
}

void weighted_sum(std::span<const std::span<const double>> vectors, std::span<const double> weights,
                  std::span<double> out) {
  check_weighted(vectors, weights, out);
  for (std::size_t j = 0; j < out.size(); ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < vectors.size(); ++c) s += weights[c] * vectors[c][j];
    out[j] = s;
  }
}

}  // namespace reference

namespace parallel {

void matmul(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  check_mm(a, b, a.cols(), b.rows(), "matmul");
  ensure_output(out, a.rows(), b.cols(), acc);
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel
  {
    std::vector<double> tmp;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
      matmul_row(a, b, out, static_cast<std::size_t>(i), tmp, acc);
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  check_mm(a, b, a.rows(), b.rows(), "matmul_tn");
  ensure_output(out, a.cols(), b.cols(), acc);
  const auto rows = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel
  {
    std::vector<double> tmp;
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i)
      matmul_tn_row(a, b, out, static_cast<std::size_t>(i), tmp, acc);
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  check_mm(a, b, a.cols(), b.cols(), "matmul_nt");
  ensure_output(out, a.rows(), b.rows(), acc);
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_nt_row(a, b, out, static_cast<std::size_t>(i), acc);
}

void weighted_sum(std::span<const std::span<const double>> vectors, std::span<const double> weights,
                  std::span<double> out) {
  check_weighted(vectors, weights, out);
  const auto n = static_cast<std::ptrdiff_t>(out.size());
  const std::size_t clients = vectors.size();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t c = 0; c < clients; ++c) s += weights[c] * vectors[c][static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(j)] = s;
  }
}

}  // namespace parallel

namespace {

bool go_parallel(std::size_t work) {
  return work >= kParallelWorkThreshold && !omp_in_parallel() && omp_get_max_threads() > 1;
}

}  // namespace

// The serial fallbacks below are the row kernels, not the naive reference
// loops: same arithmetic order, better memory access on small operands.
void matmul(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  if (go_parallel(a.rows() * a.cols() * b.cols())) return parallel::matmul(a, b, out, acc);
  check_mm(a, b, a.cols(), b.rows(), "matmul");
  ensure_output(out, a.rows(), b.cols(), acc);
  std::vector<double> tmp;
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, out, i, tmp, acc);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  if (go_parallel(a.rows() * a.cols() * b.cols())) return parallel::matmul_tn(a, b, out, acc);
  check_mm(a, b, a.rows(), b.rows(), "matmul_tn");
  ensure_output(out, a.cols(), b.cols(), acc);
  std::vector<double> tmp;
  for (std::size_t i = 0; i < a.cols(); ++i) matmul_tn_row(a, b, out, i, tmp, acc);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out, Accumulate acc) {
  if (go_parallel(a.rows() * a.cols() * b.rows())) return parallel::matmul_nt(a, b, out, acc);
  check_mm(a, b, a.cols(), b.cols(), "matmul_nt");
  ensure_output(out, a.rows(), b.rows(), acc);
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_nt_row(a, b, out, i, acc);
}

void weighted_sum(std::span<const std::span<const double>> vectors, std::span<const double> weights,
                  std::span<double> out) {
  if (go_parallel(out.size() * vectors.size())) return parallel::weighted_sum(vectors, weights, out);
  reference::weighted_sum(vectors, weights, out);
}

}  // namespace fgad::kernels
