#pragma once

// Helpers shared by the test binaries: random data, a central-difference
// gradient oracle and small model configurations that keep tests fast.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "fgad/autodiff.hpp"
#include "fgad/federation.hpp"
#include "fgad/graph.hpp"
#include "fgad/matrix.hpp"
#include "fgad/model.hpp"
#include "fgad/synthetic.hpp"
#include "fgad/tudataset.hpp"

namespace fgad::test {

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (double& x : m.values()) x = u(rng);
  return m;
}

/// Entries bounded away from zero, for ops with a kink there.
inline Matrix random_away_from_zero(std::size_t r, std::size_t c, std::mt19937_64& rng, double gap = 0.05) {
  Matrix m = random_matrix(r, c, rng);
  for (double& x : m.values()) x = x >= 0 ? x + gap : x - gap;
  return m;
}

inline Matrix random_adjacency(std::size_t n, double p, std::mt19937_64& rng) {
  Rng r(rng());
  return sample_er(n, p, r);
}

inline Graph random_graph(std::size_t n, std::size_t feature_dim, std::mt19937_64& rng, double p = 0.5) {
  Graph g;
  g.adjacency = random_adjacency(n, p, rng);
  g.features = random_matrix(n, feature_dim, rng);
  return g;
}

using ScalarFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

struct GradCheck {
  double max_rel_error = 0.0;  // per input, inf-norm relative error
  double worst = 0.0;
};

/// Compares tape gradients of fn against central differences, input by
/// input. Error for one input: max|analytic - numeric| / max(max|analytic|,
/// max|numeric|, 1e-8).
inline GradCheck check_gradients(const ScalarFn& fn, std::vector<Matrix> inputs, double h = 1e-5) {
  std::vector<Matrix> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const Matrix& m : inputs) vars.push_back(tape.parameter(m));
    ad::Var loss = fn(tape, vars);
    tape.backward(loss);
    for (const ad::Var& v : vars) analytic.push_back(v.grad());
  }
  auto eval = [&](const std::vector<Matrix>& in) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const Matrix& m : in) vars.push_back(tape.constant(m));
    return fn(tape, vars).item();
  };
  GradCheck out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    double diff = 0.0, scale = 1e-8;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k].values()[i];
      inputs[k].values()[i] = x0 + h;
      const double up = eval(inputs);
      inputs[k].values()[i] = x0 - h;
      const double down = eval(inputs);
      inputs[k].values()[i] = x0;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k].values()[i];
      diff = std::max(diff, std::abs(a - numeric));
      scale = std::max({scale, std::abs(a), std::abs(numeric)});
    }
    out.max_rel_error = std::max(out.max_rel_error, diff / scale);
  }
  out.worst = out.max_rel_error;
  return out;
}

// Max relative error of the analytic parameter gradient of one batch
// objective against central differences, over every trainable group.
inline double objective_gradient_error(const LocalModel& model, const std::vector<Graph>& graphs,
                                       const TrainSettings& settings, Phase phase, std::uint64_t noise_seed = 99,
                                       double h = 1e-5) {
  std::vector<const Graph*> batch;
  std::vector<Matrix> noise;
  std::mt19937_64 rng(noise_seed);
  for (const Graph& g : graphs) {
    batch.push_back(&g);
    noise.push_back(random_matrix(g.node_count(), model.dims().latent_dim, rng));
  }
  const GroupMask mask = phase_mask(phase);
  std::array<std::vector<Matrix>, kGroupCount> analytic;
  {
    ad::Tape tape;
    BatchObjective obj = batch_objective(tape, model, mask, batch, noise, settings, phase);
    tape.backward(obj.total);
    for (Group g : kAllGroups)
      if (mask[static_cast<std::size_t>(g)]) analytic[static_cast<std::size_t>(g)] = gradients(obj.bound[g]);
  }
  auto loss_at = [&](const LocalModel& m) {
    ad::Tape tape;
    return batch_objective(tape, m, kTrainNone, batch, noise, settings, phase).total.item();
  };
  double worst = 0.0;
  std::vector<double> diffs, scales;
  LocalModel probe = model;
  for (Group g : kAllGroups) {
    if (!mask[static_cast<std::size_t>(g)]) continue;
    auto tensors = probe.group(g).tensors();
    double diff = 0.0, scale = 1e-8;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      for (std::size_t i = 0; i < tensors[t]->size(); ++i) {
        double& x = tensors[t]->values()[i];
        const double x0 = x;
        x = x0 + h;
        const double up = loss_at(probe);
        x = x0 - h;
        const double down = loss_at(probe);
        x = x0;
        const double numeric = (up - down) / (2 * h);
        const double a = analytic[static_cast<std::size_t>(g)][t].values()[i];
        diff = std::max(diff, std::abs(a - numeric));
        scale = std::max({scale, std::abs(a), std::abs(numeric)});
      }
    }
    diffs.push_back(diff);
    scales.push_back(scale);
  }
  // A group whose gradient is vanishingly small next to the others (both heads
  // saturated on the same class, say) is compared against the overall scale.
  const double overall = *std::max_element(scales.begin(), scales.end());
  for (std::size_t i = 0; i < diffs.size(); ++i) worst = std::max(worst, diffs[i] / std::max(scales[i], 1e-3 * overall));
  return worst;
}

/// A deliberately small architecture for unit tests.
inline ModelDims small_dims(std::size_t input_dim = 4) {
  ModelDims d;
  d.input_dim = input_dim;
  d.layers = 2;
  d.hidden_dim = 4;
  d.latent_dim = 3;
  d.teacher_hidden = {6, 5};
  d.student_hidden = {5};
  return d;
}

/// Small synthetic federation used by the federation and CLI tests.
inline SyntheticSpec small_synthetic(std::size_t clients = 3) {
  SyntheticSpec s;
  s.clients = clients;
  s.normals_per_client = 20;
  s.anomalies_per_client = 8;
  s.nodes = 8;
  s.degree_cap = 8;
  return s;
}

}  // namespace fgad::test
