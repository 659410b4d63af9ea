#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fgad/matrix.hpp"

namespace fgad {

inline constexpr int kNormal = 1;
inline constexpr int kAnomalous = 0;

/// One attributed, undirected graph. The stored adjacency is binary,
/// symmetric and has a zero diagonal; self-connections are the model's
/// business, not the data's.
struct Graph {
  std::string origin;      // dataset the graph came from
  std::size_t index = 0;   // position within that dataset
  Matrix adjacency;        // n x n
  Matrix features;         // n x d
  int class_label = 0;
  int anomaly_label = kNormal;

  std::size_t node_count() const noexcept { return adjacency.rows(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }
  /// Undirected edge count.
  std::size_t edge_count() const;
  /// Throws FormatError when a stored invariant does not hold.
  void validate() const;
};

/// Content hash over identity, labels, structure and features (FNV-1a).
std::uint64_t graph_hash(const Graph& g);
std::uint64_t graphs_hash(const std::vector<Graph>& graphs);

struct GraphDataset {
  std::string name;
  std::vector<Graph> graphs;
  std::size_t feature_dim = 0;
  int normal_class = 0;

  /// Sorted unique class labels.
  std::vector<int> classes() const;
};

/// First class of the sorted unique labels.
int default_normal_class(const GraphDataset& ds);
/// Sets normal_class and every graph's anomaly_label accordingly.
void assign_anomaly_labels(GraphDataset& ds, int normal_class);

struct ClientShard {
  std::string source;  // dataset name (or synthetic client tag)
  std::vector<Graph> train;
  std::vector<Graph> test;
  std::size_t test_normals = 0;
  std::size_t test_anomalies = 0;
  // Anomalies the shard's share would have needed vs. what existed.
  std::size_t anomalies_requested = 0;
  std::size_t anomalies_available = 0;

  std::size_t feature_dim() const;
  std::uint64_t hash() const;
};

struct ClientPartition {
  std::vector<ClientShard> shards;

  std::size_t client_count() const noexcept { return shards.size(); }
  std::size_t total_train() const;
  /// Training-set share |D_c| / |D| per client.
  std::vector<double> shard_weights() const;
  std::uint64_t hash() const;
  /// Checks disjointness and the train-normals-only rule.
  void validate() const;
};

}  // namespace fgad
