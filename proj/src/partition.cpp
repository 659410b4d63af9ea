#include "fgad/partition.hpp"

#include <algorithm>
#include <cmath>

#include "fgad/error.hpp"
#include "fgad/rng.hpp"

namespace fgad {

std::vector<Graph> NormalSplit::test_set() const {
  std::vector<Graph> out = test_normals;
  out.insert(out.end(), test_anomalies.begin(), test_anomalies.end());
  return out;
}

NormalSplit label_and_split(const GraphDataset& dataset, int normal_class, double train_fraction,
                            std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1), got " + std::to_string(train_fraction));
  }
  std::vector<const Graph*> normals;
  std::vector<const Graph*> anomalies;
  for (const Graph& g : dataset.graphs) (g.class_label == normal_class ? normals : anomalies).push_back(&g);
  if (normals.empty()) {
    throw ConfigError("dataset " + dataset.name + " has no graphs of normal class " + std::to_string(normal_class));
  }
  Rng rng(seed);
  std::shuffle(normals.begin(), normals.end(), rng);
  std::shuffle(anomalies.begin(), anomalies.end(), rng);

  const auto n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(normals.size())));
  NormalSplit split;
  split.anomalies_available = anomalies.size();
  auto labelled = [normal_class](const Graph* g) {
    Graph copy = *g;
    copy.anomaly_label = g->class_label == normal_class ? kNormal : kAnomalous;
    return copy;
  };
  for (std::size_t i = 0; i < normals.size(); ++i)
    (i < n_train ? split.train_normals : split.test_normals).push_back(labelled(normals[i]));
  const std::size_t n_anom = std::min(split.test_normals.size(), anomalies.size());
  for (std::size_t i = 0; i < n_anom; ++i) split.test_anomalies.push_back(labelled(anomalies[i]));
  return split;
}

std::vector<std::size_t> near_equal_sizes(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> sizes(parts, parts ? total / parts : 0);
  for (std::size_t i = 0; i < (parts ? total % parts : 0); ++i) sizes[i] += 1;
  return sizes;
}

ClientPartition partition_single_dataset(const GraphDataset& dataset, std::size_t clients, double train_fraction,
                                         std::uint64_t seed) {
  if (clients < 2) throw ConfigError("single-dataset federation needs at least 2 clients, got " + std::to_string(clients));
  NormalSplit split = label_and_split(dataset, dataset.normal_class, train_fraction,
                                      derive_seed(seed, Stream::Partition, {0}));
  if (split.train_normals.size() < clients) {
    throw ConfigError("partition needs at least " + std::to_string(clients) + " training normals, " +
                      std::to_string(split.train_normals.size()) + " available");
  }
  // label_and_split already shuffled; dealing contiguous blocks is a
  // uniform random disjoint split.
  const auto train_sizes = near_equal_sizes(split.train_normals.size(), clients);
  const auto normal_sizes = near_equal_sizes(split.test_normals.size(), clients);
  const auto anomaly_sizes = near_equal_sizes(split.test_anomalies.size(), clients);
  const auto wanted_sizes = near_equal_sizes(split.test_normals.size(), clients);

  ClientPartition part;
  std::size_t t0 = 0, n0 = 0, a0 = 0;
  for (std::size_t c = 0; c < clients; ++c) {
    ClientShard shard;
    shard.source = dataset.name;
    shard.train.assign(split.train_normals.begin() + static_cast<std::ptrdiff_t>(t0),
                       split.train_normals.begin() + static_cast<std::ptrdiff_t>(t0 + train_sizes[c]));
    shard.test.assign(split.test_normals.begin() + static_cast<std::ptrdiff_t>(n0),
                      split.test_normals.begin() + static_cast<std::ptrdiff_t>(n0 + normal_sizes[c]));
    shard.test.insert(shard.test.end(), split.test_anomalies.begin() + static_cast<std::ptrdiff_t>(a0),
                      split.test_anomalies.begin() + static_cast<std::ptrdiff_t>(a0 + anomaly_sizes[c]));
    shard.test_normals = normal_sizes[c];
    shard.test_anomalies = anomaly_sizes[c];
    shard.anomalies_requested = wanted_sizes[c];
    shard.anomalies_available = anomaly_sizes[c];
    t0 += train_sizes[c];
    n0 += normal_sizes[c];
    a0 += anomaly_sizes[c];
    part.shards.push_back(std::move(shard));
  }
  part.validate();
  return part;
}

ClientPartition partition_multi_dataset(std::span<const GraphDataset> datasets, double train_fraction,
                                        std::uint64_t seed) {
  if (datasets.size() < 2) {
    throw ConfigError("multi-dataset federation needs at least 2 datasets, got " + std::to_string(datasets.size()));
  }
  ClientPartition part;
  for (std::size_t c = 0; c < datasets.size(); ++c) {
    const GraphDataset& ds = datasets[c];
    NormalSplit split = label_and_split(ds, ds.normal_class, train_fraction, derive_seed(seed, Stream::Partition, {c}));
    if (split.train_normals.empty()) {
      throw ConfigError("dataset " + ds.name + " leaves no training normals (need 1, have 0)");
    }
    ClientShard shard;
    shard.source = ds.name;
    shard.train = std::move(split.train_normals);
    shard.test_normals = split.test_normals.size();
    shard.test_anomalies = split.test_anomalies.size();
    shard.anomalies_requested = split.test_normals.size();
    shard.anomalies_available = split.anomalies_available;
    shard.test = std::move(split.test_normals);
    shard.test.insert(shard.test.end(), split.test_anomalies.begin(), split.test_anomalies.end());
    part.shards.push_back(std::move(shard));
  }
  part.validate();
  return part;
}

}  // namespace fgad
