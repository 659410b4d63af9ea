#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fgad/graph.hpp"

namespace fgad {

struct NormalSplit {
  std::vector<Graph> train_normals;
  std::vector<Graph> test_normals;
  std::vector<Graph> test_anomalies;
  std::size_t anomalies_available = 0;

  /// Held-out normals followed by the sampled anomalies.
  std::vector<Graph> test_set() const;
};

/// Shuffles the normals under `seed`, keeps the first floor(f * #normals)
/// for training and pairs the rest with an equally sized random sample of
/// anomalies (all of them when fewer exist).
NormalSplit label_and_split(const GraphDataset& dataset, int normal_class, double train_fraction,
                            std::uint64_t seed);

/// Sizes of `total` items dealt into `parts` near-equal shares; the
/// remainder goes to the lowest-index shares.
std::vector<std::size_t> near_equal_sizes(std::size_t total, std::size_t parts);

/// One dataset spread over `clients` shards.
ClientPartition partition_single_dataset(const GraphDataset& dataset, std::size_t clients,
                                         double train_fraction, std::uint64_t seed);

/// One client per dataset, each split on its own.
ClientPartition partition_multi_dataset(std::span<const GraphDataset> datasets, double train_fraction,
                                        std::uint64_t seed);

}  // namespace fgad
