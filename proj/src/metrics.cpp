#include "fgad/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "fgad/error.hpp"

namespace fgad {
namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts check(const ScoredSet& set) {
  if (set.scores.size() != set.labels.size()) throw MetricError("scores and labels differ in length");
  Counts c;
  for (int l : set.labels) {
    if (l == 1)
      ++c.pos;
    else if (l == 0)
      ++c.neg;
    else
      throw MetricError("labels must be 0 or 1");
  }
  return c;
}

std::vector<std::size_t> order_descending(const ScoredSet& set) {
  std::vector<std::size_t> idx(set.scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] > set.scores[b]; });
  return idx;
}

}  // namespace

double auc(const ScoredSet& set) {
  const Counts c = check(set);
  if (c.pos == 0 || c.neg == 0) throw MetricError("AUC needs both classes present");
  // Ascending order, mid-ranks for ties.
  std::vector<std::size_t> idx(set.scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return set.scores[a] < set.scores[b]; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && set.scores[idx[j + 1]] == set.scores[idx[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k)
      if (set.labels[idx[k]] == 1) rank_sum += mid;
    i = j + 1;
  }
  const double p = static_cast<double>(c.pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(c.neg));
}

double auprc(const ScoredSet& set) {
  const Counts c = check(set);
  if (c.pos == 0) throw MetricError("AUPRC needs at least one positive");
  const auto idx = order_descending(set);
  const double p = static_cast<double>(c.pos);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && set.scores[idx[j]] == set.scores[idx[i]]) {
      if (set.labels[idx[j]] == 1)
        ++tp;
      else
        ++fp;
      ++j;
    }
    const double recall = static_cast<double>(tp) / p;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

}  // namespace fgad
