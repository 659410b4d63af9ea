#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "fgad/matrix.hpp"

// Reverse-mode differentiation over dense matrices.
//
// A Tape records operations in execution order (define-by-run). Each
// recorded node keeps its value, the producing operation and the ids of its
// inputs; backward() replays the record in exact reverse order, so the
// record is topologically sorted by construction. A tape is built for one
// forward pass and thrown away afterwards.
namespace fgad::ad {

enum class Op : std::uint8_t {
  Leaf,
  MatMul,
  Transpose,
  Add,
  Sub,
  Mul,
  AddRowBroadcast,
  Scale,
  Sigmoid,
  Softplus,
  LeakyRelu,
  Log,
  Exp,
  Clamp,
  SumAll,
  SumRows,
  MeanAll,
  ConcatCols,
  ConcatRows,
  SoftmaxRows,
  LogSoftmaxRows,
};
inline constexpr std::size_t kOpCount = static_cast<std::size_t>(Op::LogSoftmaxRows) + 1;

std::string_view op_name(Op op);

inline constexpr double kDefaultLeakySlope = 0.01;

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Matrix& value() const;
  Matrix grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Scalar value of a 1x1 node.
  double item() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad);
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var parameter(Matrix value) { return leaf(std::move(value), true); }
  /// New leaf holding a copy of v's value; no gradient flows back through it.
  Var detach(Var v);

  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  /// a (n x d) plus row vector b (1 x d) added to every row.
  Var add_row_broadcast(Var a, Var b);
  Var scale(Var a, double c);
  Var sigmoid(Var a);
  /// log(1 + exp(x)), evaluated without overflow.
  Var softplus(Var a);
  Var leaky_relu(Var a, double slope = kDefaultLeakySlope);
  /// Natural log; every entry must be strictly positive.
  Var log(Var a);
  Var exp(Var a);
  Var clamp(Var a, double lo, double hi);
  Var sum_all(Var a);
  /// Column sums: n x d -> 1 x d.
  Var sum_rows(Var a);
  Var mean_all(Var a);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  Var softmax_rows(Var a, double temperature = 1.0);
  Var log_softmax_rows(Var a, double temperature = 1.0);

  /// Gradients of a 1x1 loss with respect to every node on the tape.
  /// Resets gradients from any previous sweep.
  void backward(Var loss);

  const Matrix& value(Var v) const { return nodes_.at(v.id_).value; }
  Matrix grad(Var v) const;
  Op op(Var v) const { return nodes_.at(v.id_).op; }
  std::span<const std::size_t> inputs(Var v) const { return nodes_.at(v.id_).inputs; }
  bool requires_grad(Var v) const { return nodes_.at(v.id_).requires_grad; }

  std::size_t size() const noexcept { return nodes_.size(); }
  std::size_t count(Op op) const noexcept { return op_counts_[static_cast<std::size_t>(op)]; }

 private:
  struct Node {
    Matrix value;
    Op op = Op::Leaf;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    double p0 = 0.0;
    double p1 = 0.0;
  };

  Var push(Node node);
  const Node& node(Var v) const;
  void check_owner(Var v) const;
  void propagate(std::size_t id);

  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
  std::array<std::size_t, kOpCount> op_counts_{};
};

// Free-function spelling so model code reads as expressions over Vars.
inline Var matmul(Var a, Var b) { return a.tape().matmul(a, b); }
inline Var transpose(Var a) { return a.tape().transpose(a); }
inline Var add(Var a, Var b) { return a.tape().add(a, b); }
inline Var sub(Var a, Var b) { return a.tape().sub(a, b); }
inline Var mul(Var a, Var b) { return a.tape().mul(a, b); }
inline Var add_row_broadcast(Var a, Var b) { return a.tape().add_row_broadcast(a, b); }
inline Var scale(Var a, double c) { return a.tape().scale(a, c); }
inline Var sigmoid(Var a) { return a.tape().sigmoid(a); }
inline Var softplus(Var a) { return a.tape().softplus(a); }
inline Var leaky_relu(Var a, double slope = kDefaultLeakySlope) { return a.tape().leaky_relu(a, slope); }
inline Var log(Var a) { return a.tape().log(a); }
inline Var exp(Var a) { return a.tape().exp(a); }
inline Var clamp(Var a, double lo, double hi) { return a.tape().clamp(a, lo, hi); }
inline Var sum_all(Var a) { return a.tape().sum_all(a); }
inline Var sum_rows(Var a) { return a.tape().sum_rows(a); }
inline Var mean_all(Var a) { return a.tape().mean_all(a); }
inline Var softmax_rows(Var a, double t = 1.0) { return a.tape().softmax_rows(a, t); }
inline Var log_softmax_rows(Var a, double t = 1.0) { return a.tape().log_softmax_rows(a, t); }
inline Var detach(Var a) { return a.tape().detach(a); }
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

}  // namespace fgad::ad
