#pragma once

#include <span>
#include <vector>

namespace fgad {

/// Scores (higher = more anomalous) with labels 1 = anomalous (positive),
/// 0 = normal.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// ROC area via the Mann-Whitney rank sum; tied pairs count one half.
double auc(const ScoredSet& set);

/// Average precision: sum over distinct thresholds (descending) of
/// (R_k - R_{k-1}) * P_k.
double auprc(const ScoredSet& set);

}  // namespace fgad
