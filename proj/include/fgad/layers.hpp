#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fgad/autodiff.hpp"
#include "fgad/matrix.hpp"
#include "fgad/rng.hpp"

namespace fgad {

/// Affine map x -> x * weight + bias with weight d_in x d_out, bias 1 x d_out.
struct DenseLayer {
  Matrix weight;
  Matrix bias;

  std::size_t in_dim() const noexcept { return weight.rows(); }
  std::size_t out_dim() const noexcept { return weight.cols(); }
  std::size_t parameter_count() const noexcept { return weight.size() + bias.size(); }
};

/// An ordered stack of dense layers that is trained, exchanged and
/// checkpointed as one unit.
struct LayerGroup {
  std::string name;
  std::vector<DenseLayer> layers;

  /// Zero-filled layers for dims d0 -> d1 -> ... -> dL.
  static LayerGroup with_dims(std::string name, std::span<const std::size_t> dims);

  std::size_t parameter_count() const;
  /// weight0, bias0, weight1, bias1, ... -- the canonical tensor order.
  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  bool same_shapes(const LayerGroup& other) const;
  std::vector<std::size_t> dims() const;
};

/// Uniform(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))) weights,
/// zero biases.
void glorot_uniform(LayerGroup& group, Rng& rng);

struct BoundLayer {
  ad::Var weight;
  ad::Var bias;
};
using BoundGroup = std::vector<BoundLayer>;

BoundGroup bind(ad::Tape& tape, const LayerGroup& group, bool trainable);
/// Gradients in LayerGroup::tensors() order.
std::vector<Matrix> gradients(const BoundGroup& bound);

inline ad::Var dense(ad::Var x, const BoundLayer& layer) {
  return ad::add_row_broadcast(ad::matmul(x, layer.weight), layer.bias);
}

}  // namespace fgad
