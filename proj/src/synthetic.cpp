#include "fgad/synthetic.hpp"

#include "fgad/error.hpp"
#include "fgad/partition.hpp"
#include "fgad/tudataset.hpp"

namespace fgad {
namespace {

void check_probability(double p, const char* name) {
  if (!(p > 0.0 && p < 1.0)) throw ParameterError(std::string(name) + " must lie in (0, 1), got " + std::to_string(p));
}

}  // namespace

void SyntheticSpec::validate() const {
  check_probability(p_in, "p_in");
  check_probability(p_out, "p_out");
  if (!(p_in > p_out)) throw ParameterError("p_in must exceed p_out");
  if (nodes < 4) throw ParameterError("synthetic graphs need at least 4 nodes");
  if (clients < 1) throw ParameterError("synthetic benchmark needs at least one client");
  if (!(p_in_jitter >= 0.0 && p_in_jitter < 1.0)) throw ParameterError("p_in_jitter must lie in [0, 1)");
  if (p_in * (1.0 + p_in_jitter) >= 1.0) throw ParameterError("jittered p_in reaches 1");
  if (p_in * (1.0 - p_in_jitter) <= p_out) throw ParameterError("jittered p_in falls to p_out");
  if (normals_per_client < 2) throw ParameterError("need at least 2 normals per client");
  if (degree_cap < 1) throw ParameterError("degree_cap must be at least 1");
}

double sbm_expected_edges(std::size_t n, double p_in, double p_out) {
  const double a = static_cast<double>(n / 2);
  const double b = static_cast<double>(n - n / 2);
  const double intra = a * (a - 1) / 2 + b * (b - 1) / 2;
  return intra * p_in + a * b * p_out;
}

double matched_er_probability(std::size_t n, double edges) {
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return edges / pairs;
}

Matrix sample_sbm(std::size_t n, double p_in, double p_out, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t half = n / 2;
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool same = (i < half) == (j < half);
      if (u(rng) < (same ? p_in : p_out)) a(i, j) = a(j, i) = 1.0;
    }
  }
  return a;
}

Matrix sample_er(std::size_t n, double p, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < p) a(i, j) = a(j, i) = 1.0;
  return a;
}

std::vector<double> client_p_in(const SyntheticSpec& spec, std::uint64_t seed) {
  std::vector<double> out;
  for (std::size_t c = 0; c < spec.clients; ++c) {
    Rng rng(derive_seed(seed, Stream::Synthetic, {c, 0}));
    std::uniform_real_distribution<double> jitter(-spec.p_in_jitter, spec.p_in_jitter);
    out.push_back(spec.p_in * (1.0 + jitter(rng)));
  }
  return out;
}

ClientPartition synthetic_benchmark(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto p_in = client_p_in(spec, seed);
  ClientPartition part;
  for (std::size_t c = 0; c < spec.clients; ++c) {
    Rng rng(derive_seed(seed, Stream::Synthetic, {c, 1}));
    const double p_er = matched_er_probability(spec.nodes, sbm_expected_edges(spec.nodes, p_in[c], spec.p_out));

    GraphDataset ds;
    ds.name = "synthetic/c" + std::to_string(c);
    const std::size_t total = spec.normals_per_client + spec.anomalies_per_client;
    for (std::size_t i = 0; i < total; ++i) {
      Graph g;
      g.origin = ds.name;
      g.index = i;
      const bool normal = i < spec.normals_per_client;
      g.class_label = normal ? 0 : 1;
      g.adjacency = normal ? sample_sbm(spec.nodes, p_in[c], spec.p_out, rng) : sample_er(spec.nodes, p_er, rng);
      ds.graphs.push_back(std::move(g));
    }
    ds = synthesize_features(std::move(ds), {FeatureStrategy::DegreeOneHot, spec.degree_cap});
    assign_anomaly_labels(ds, 0);

    NormalSplit split = label_and_split(ds, 0, spec.train_fraction, derive_seed(seed, Stream::Synthetic, {c, 2}));
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
