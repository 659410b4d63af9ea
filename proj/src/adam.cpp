#include "fgad/adam.hpp"

#include <cmath>

#include "fgad/error.hpp"

namespace fgad {

AdamState AdamState::for_shapes(std::span<const Matrix* const> params) {
  AdamState s;
  s.moments.reserve(params.size());
  for (const Matrix* p : params) s.moments.push_back({Matrix(p->rows(), p->cols()), Matrix(p->rows(), p->cols())});
  return s;
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& state,
               const AdamSettings& settings) {
  if (params.size() != grads.size() || params.size() != state.moments.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " + std::to_string(state.moments.size()) +
                         " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& p = *params[i];
    if (!p.same_shape(*grads[i]) || !p.same_shape(state.moments[i].m) || !p.same_shape(state.moments[i].v)) {
      throw DimensionError("adam_step: shape mismatch at slot " + std::to_string(i) + " (param " +
                           p.shape_string() + ", grad " + grads[i]->shape_string() + ")");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(settings.beta1, t);
  const double bc2 = 1.0 - std::pow(settings.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->values();
    auto g = grads[i]->values();
    auto m = state.moments[i].m.values();
    auto v = state.moments[i].v.values();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = settings.beta1 * m[k] + (1.0 - settings.beta1) * g[k];
      v[k] = settings.beta2 * v[k] + (1.0 - settings.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] -= settings.lr * mhat / (std::sqrt(vhat) + settings.eps);
    }
  }
}

}  // namespace fgad
