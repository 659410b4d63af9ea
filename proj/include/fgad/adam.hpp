#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fgad/matrix.hpp"

namespace fgad {

struct AdamSettings {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers for one parameter matrix.
struct AdamMoments {
  Matrix m;
  Matrix v;
};

/// Moments for a list of parameter matrices plus the shared step counter.
struct AdamState {
  std::vector<AdamMoments> moments;
  std::uint64_t step = 0;

  static AdamState for_shapes(std::span<const Matrix* const> params);
};

// One bias-corrected Adam update over matching lists of parameters and
// gradients. Advances state.step by one.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix* const> grads, AdamState& state,
               const AdamSettings& settings);

}  // namespace fgad
