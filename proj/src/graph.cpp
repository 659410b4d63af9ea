#include "fgad/graph.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <utility>

#include "fgad/error.hpp"

namespace fgad {
namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ull;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 0x100000001b3ull;
    }
  }
  template <class T>
  void pod(const T& v) {
    bytes(&v, sizeof(T));
  }
};

}  // namespace

std::size_t Graph::edge_count() const {
  std::size_t e = 0;
  const std::size_t n = node_count();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (adjacency(i, j) != 0.0) ++e;
  return e;
}

void Graph::validate() const {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n) throw FormatError("graph " + origin + "#" + std::to_string(index) + ": adjacency not square");
  if (features.rows() != n) {
    throw FormatError("graph " + origin + "#" + std::to_string(index) + ": " + std::to_string(features.rows()) +
                      " feature rows for " + std::to_string(n) + " nodes");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency(i, i) != 0.0) throw FormatError("graph " + origin + "#" + std::to_string(index) + ": nonzero diagonal");
    for (std::size_t j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      if ((a != 0.0 && a != 1.0) || a != adjacency(j, i)) {
        throw FormatError("graph " + origin + "#" + std::to_string(index) + ": adjacency not binary symmetric");
      }
    }
  }
}

std::uint64_t graph_hash(const Graph& g) {
  Fnv f;
  f.bytes(g.origin.data(), g.origin.size());
  f.pod(g.index);
  f.pod(g.class_label);
  f.pod(g.anomaly_label);
  const std::size_t n = g.node_count();
  const std::size_t d = g.feature_dim();
  f.pod(n);
  f.pod(d);
  f.bytes(g.adjacency.values().data(), g.adjacency.size() * sizeof(double));
  f.bytes(g.features.values().data(), g.features.size() * sizeof(double));
  return f.h;
}

std::uint64_t graphs_hash(const std::vector<Graph>& graphs) {
  Fnv f;
  for (const Graph& g : graphs) f.pod(graph_hash(g));
  return f.h;
}

std::vector<int> GraphDataset::classes() const {
  std::set<int> s;
  for (const Graph& g : graphs) s.insert(g.class_label);
  return {s.begin(), s.end()};
}

int default_normal_class(const GraphDataset& ds) {
  const auto cls = ds.classes();
  if (cls.empty()) throw ConfigError("dataset " + ds.name + " has no graphs");
  return cls.front();
}

void assign_anomaly_labels(GraphDataset& ds, int normal_class) {
  const auto cls = ds.classes();
  if (std::find(cls.begin(), cls.end(), normal_class) == cls.end()) {
    throw ConfigError("normal class " + std::to_string(normal_class) + " not present in dataset " + ds.name);
  }
  ds.normal_class = normal_class;
  for (Graph& g : ds.graphs) g.anomaly_label = g.class_label == normal_class ? kNormal : kAnomalous;
}

std::size_t ClientShard::feature_dim() const {
  if (!train.empty()) return train.front().feature_dim();
  if (!test.empty()) return test.front().feature_dim();
  return 0;
}

std::uint64_t ClientShard::hash() const {
  Fnv f;
  f.bytes(source.data(), source.size());
  f.pod(graphs_hash(train));
  f.pod(graphs_hash(test));
  return f.h;
}

std::size_t ClientPartition::total_train() const {
  std::size_t n = 0;
  for (const auto& s : shards) n += s.train.size();
  return n;
}

std::vector<double> ClientPartition::shard_weights() const {
  const double total = static_cast<double>(total_train());
  std::vector<double> w;
  w.reserve(shards.size());
  for (const auto& s : shards) w.push_back(static_cast<double>(s.train.size()) / total);
  return w;
}

std::uint64_t ClientPartition::hash() const {
  Fnv f;
  for (const auto& s : shards) f.pod(s.hash());
  return f.h;
}

void ClientPartition::validate() const {
  std::set<std::pair<std::string, std::size_t>> seen;
  for (std::size_t c = 0; c < shards.size(); ++c) {
    const auto& s = shards[c];
    if (s.train.empty()) throw ConfigError("client " + std::to_string(c) + " has an empty training shard");
    for (const Graph& g : s.train) {
      if (g.anomaly_label != kNormal) {
        throw ConfigError("client " + std::to_string(c) + " training shard contains an anomalous graph");
      }
    }
    for (const auto* set : {&s.train, &s.test}) {
      for (const Graph& g : *set) {
        if (!seen.emplace(g.origin, g.index).second) {
          throw ConfigError("graph " + g.origin + "#" + std::to_string(g.index) + " appears in more than one shard slot");
        }
      }
    }
  }
}

}  // namespace fgad
