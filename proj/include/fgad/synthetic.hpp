#pragma once

#include <cstddef>
#include <cstdint>

#include "fgad/graph.hpp"
#include "fgad/matrix.hpp"
#include "fgad/rng.hpp"

namespace fgad {

/// Planted-anomaly benchmark: normals are two-community stochastic block
/// graphs, anomalies are Erdos-Renyi graphs with the same expected edge
/// count. Each client perturbs p_in by up to +/- p_in_jitter (relative) so
/// shards are non-IID.
struct SyntheticSpec {
  std::size_t clients = 3;
  std::size_t normals_per_client = 100;
  std::size_t anomalies_per_client = 40;
  std::size_t nodes = 20;
  double p_in = 0.4;
  double p_out = 0.05;
  double p_in_jitter = 0.1;
  double train_fraction = 0.8;
  std::size_t degree_cap = 64;

  void validate() const;
};

/// Expected undirected edges of an n-node SBM with halves of size
/// floor(n/2) and n - floor(n/2).
double sbm_expected_edges(std::size_t n, double p_in, double p_out);
/// Edge probability giving an n-node ER graph `edges` expected edges.
double matched_er_probability(std::size_t n, double edges);

Matrix sample_sbm(std::size_t n, double p_in, double p_out, Rng& rng);
Matrix sample_er(std::size_t n, double p, Rng& rng);

/// Per-client jittered p_in values, as used by synthetic_benchmark.
std::vector<double> client_p_in(const SyntheticSpec& spec, std::uint64_t seed);

ClientPartition synthetic_benchmark(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace fgad
