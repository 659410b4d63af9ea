#pragma once

// Brute-force references used by the unit tests and the acceptance run.

#include <algorithm>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "fgad/metrics.hpp"

namespace fgad::test {

/// O(n^2) pairwise comparison: P(score_pos > score_neg) + 0.5 P(tie).
inline double auc_oracle(const ScoredSet& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.scores.size(); ++i) {
    if (s.labels[i] != 1) continue;
    for (std::size_t j = 0; j < s.scores.size(); ++j) {
      if (s.labels[j] != 0) continue;
      pairs += 1.0;
      if (s.scores[i] > s.scores[j]) wins += 1.0;
      else if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Sweeps every distinct score as a threshold (predict positive when
/// score >= t) and re-counts the confusion matrix from scratch each time.
inline double auprc_oracle(const ScoredSet& s) {
  std::set<double, std::greater<>> thresholds(s.scores.begin(), s.scores.end());
  double positives = 0.0;
  for (int l : s.labels) positives += l == 1;
  double prev_recall = 0.0, area = 0.0;
  for (double t : thresholds) {
    double tp = 0.0, fp = 0.0;
    for (std::size_t i = 0; i < s.scores.size(); ++i) {
      if (s.scores[i] < t) continue;
      if (s.labels[i] == 1) tp += 1.0;
      else fp += 1.0;
    }
    const double recall = tp / positives;
    area += (recall - prev_recall) * (tp / (tp + fp));
    prev_recall = recall;
  }
  return area;
}

/// Random set with both classes present; scores drawn from a small grid so
/// ties are frequent.
inline ScoredSet random_scored_set(std::mt19937_64& rng, std::size_t max_n = 50) {
  std::uniform_int_distribution<std::size_t> size(2, max_n);
  std::uniform_int_distribution<int> grid(0, 20);
  std::bernoulli_distribution coin(0.4);
  ScoredSet s;
  const std::size_t n = size(rng);
  for (std::size_t i = 0; i < n; ++i) {
    s.scores.push_back(grid(rng) / 20.0);
    s.labels.push_back(coin(rng) ? 1 : 0);
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

/// Naive weighted average of equally long vectors, the ground truth for
/// the server aggregation.
inline std::vector<double> weighted_average_oracle(std::span<const std::vector<double>> xs,
                                                   std::span<const double> w) {
  std::vector<double> out(xs.front().size(), 0.0);
  for (std::size_t c = 0; c < xs.size(); ++c)
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[c] * xs[c][i];
  return out;
}

}  // namespace fgad::test
