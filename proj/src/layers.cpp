#include "fgad/layers.hpp"

#include <cmath>

#include "fgad/error.hpp"

namespace fgad {

LayerGroup LayerGroup::with_dims(std::string name, std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw ParameterError("layer group " + name + " needs at least input and output dims");
  LayerGroup g;
  g.name = std::move(name);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] == 0 || dims[i + 1] == 0) throw ParameterError("layer group " + g.name + " has a zero-width layer");
    g.layers.push_back({Matrix(dims[i], dims[i + 1]), Matrix(1, dims[i + 1])});
  }
  return g;
}

std::size_t LayerGroup::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.parameter_count();
  return n;
}

std::vector<Matrix*> LayerGroup::tensors() {
  std::vector<Matrix*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Matrix*> LayerGroup::tensors() const {
  std::vector<const Matrix*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

bool LayerGroup::same_shapes(const LayerGroup& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].weight.same_shape(other.layers[i].weight) || !layers[i].bias.same_shape(other.layers[i].bias))
      return false;
  }
  return true;
}

std::vector<std::size_t> LayerGroup::dims() const {
  std::vector<std::size_t> d;
  if (layers.empty()) return d;
  d.push_back(layers.front().in_dim());
  for (const auto& l : layers) d.push_back(l.out_dim());
  return d;
}

void glorot_uniform(LayerGroup& group, Rng& rng) {
  for (auto& l : group.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(l.in_dim() + l.out_dim()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : l.weight.values()) w = u(rng);
    l.bias.fill(0.0);
  }
}

BoundGroup bind(ad::Tape& tape, const LayerGroup& group, bool trainable) {
  BoundGroup out;
  out.reserve(group.layers.size());
  for (const auto& l : group.layers) out.push_back({tape.leaf(l.weight, trainable), tape.leaf(l.bias, trainable)});
  return out;
}

std::vector<Matrix> gradients(const BoundGroup& bound) {
  std::vector<Matrix> out;
  out.reserve(bound.size() * 2);
  for (const auto& l : bound) {
    out.push_back(l.weight.grad());
    out.push_back(l.bias.grad());
  }
  return out;
}

}  // namespace fgad
