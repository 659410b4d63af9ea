#include "fgad/tudataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <optional>
#include <vector>

#include "fgad/error.hpp"

namespace fgad {
namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(std::string_view tok, const fs::path& file, std::size_t line) {
  tok = trim(tok);
  T value{};
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end || tok.empty()) {
    throw FormatError(file.filename().string() + ":" + std::to_string(line) + ": cannot parse '" +
                      std::string(tok) + "'");
  }
  return value;
}

// Non-empty lines of a file, with their 1-based line numbers.
std::vector<std::pair<std::size_t, std::string>> read_lines(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IngestionError("cannot open " + file.string());
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (!trim(line).empty()) lines.emplace_back(no, line);
  }
  return lines;
}

fs::path resolve_dir(const fs::path& directory, std::string_view name) {
  const std::string a_file = std::string(name) + "_A.txt";
  if (fs::exists(directory / a_file)) return directory;
  if (fs::exists(directory / std::string(name) / a_file)) return directory / std::string(name);
  throw IngestionError("missing mandatory file " + a_file + " under " + directory.string());
}

fs::path mandatory(const fs::path& dir, std::string_view name, std::string_view suffix) {
  fs::path p = dir / (std::string(name) + std::string(suffix));
  if (!fs::exists(p)) throw IngestionError("missing mandatory file " + p.filename().string() + " in " + dir.string());
  return p;
}

}  // namespace

std::string_view to_string(FeatureStrategy s) {
  return s == FeatureStrategy::ConstantOne ? "constant_one" : "degree_onehot";
}

FeatureStrategy feature_strategy_from_string(std::string_view s) {
  if (s == "constant_one") return FeatureStrategy::ConstantOne;
  if (s == "degree_onehot") return FeatureStrategy::DegreeOneHot;
  throw ParameterError("unknown feature strategy '" + std::string(s) + "'");
}

Matrix degree_onehot(const Matrix& adjacency, std::size_t cap) {
  if (cap < 1) throw ParameterError("degree_onehot: cap must be at least 1");
  const std::size_t n = adjacency.rows();
  Matrix x(n, cap + 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t deg = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (adjacency(i, j) != 0.0) ++deg;
    x(i, std::min(deg, cap)) = 1.0;
  }
  return x;
}

GraphDataset synthesize_features(GraphDataset dataset, const FeatureSpec& spec) {
  if (spec.strategy == FeatureStrategy::DegreeOneHot && spec.degree_cap < 1) {
    throw ParameterError("degree_onehot: cap must be at least 1");
  }
  for (Graph& g : dataset.graphs) {
    g.features = spec.strategy == FeatureStrategy::ConstantOne ? Matrix::ones(g.node_count(), 1)
                                                               : degree_onehot(g.adjacency, spec.degree_cap);
  }
  dataset.feature_dim = spec.strategy == FeatureStrategy::ConstantOne ? 1 : spec.degree_cap + 1;
  return dataset;
}

GraphDataset load_tudataset(const fs::path& directory, std::string_view name, const LoadOptions& options) {
  const fs::path dir = resolve_dir(directory, name);
  const fs::path a_path = mandatory(dir, name, "_A.txt");
  const fs::path ind_path = mandatory(dir, name, "_graph_indicator.txt");
  const fs::path lab_path = mandatory(dir, name, "_graph_labels.txt");

  // Node k (1-indexed, global) belongs to graph node_graph[k-1].
  std::vector<std::size_t> node_graph;
  for (const auto& [no, line] : read_lines(ind_path)) {
    const auto gid = parse_number<long long>(line, ind_path, no);
    if (gid < 1) throw FormatError(ind_path.filename().string() + ":" + std::to_string(no) + ": graph id must be >= 1");
    node_graph.push_back(static_cast<std::size_t>(gid - 1));
  }

  std::vector<int> graph_labels;
  for (const auto& [no, line] : read_lines(lab_path)) graph_labels.push_back(parse_number<int>(line, lab_path, no));
  const std::size_t graph_count = graph_labels.size();

  std::vector<std::size_t> sizes(graph_count, 0);
  std::vector<std::size_t> local(node_graph.size());
  for (std::size_t k = 0; k < node_graph.size(); ++k) {
    if (node_graph[k] >= graph_count) {
      throw FormatError(ind_path.filename().string() + ":" + std::to_string(k + 1) + ": graph id " +
                        std::to_string(node_graph[k] + 1) + " exceeds " + std::to_string(graph_count) +
                        " labelled graphs");
    }
    local[k] = sizes[node_graph[k]]++;
  }

  GraphDataset ds;
  ds.name = std::string(name);
  ds.graphs.resize(graph_count);
  for (std::size_t g = 0; g < graph_count; ++g) {
    ds.graphs[g].origin = ds.name;
    ds.graphs[g].index = g;
    ds.graphs[g].class_label = graph_labels[g];
    ds.graphs[g].adjacency = Matrix(sizes[g], sizes[g]);
  }

  for (const auto& [no, line] : read_lines(a_path)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw FormatError(a_path.filename().string() + ":" + std::to_string(no) + ": expected 'i, j'");
    }
    const auto u = parse_number<long long>(std::string_view(line).substr(0, comma), a_path, no);
    const auto v = parse_number<long long>(std::string_view(line).substr(comma + 1), a_path, no);
    const auto nodes = static_cast<long long>(node_graph.size());
    if (u < 1 || v < 1 || u > nodes || v > nodes) {
      throw FormatError(a_path.filename().string() + ":" + std::to_string(no) + ": node id out of range");
    }
    const std::size_t ui = static_cast<std::size_t>(u - 1);
    const std::size_t vi = static_cast<std::size_t>(v - 1);
    if (node_graph[ui] != node_graph[vi]) {
      throw FormatError(a_path.filename().string() + ":" + std::to_string(no) + ": edge " + std::to_string(u) +
                        "-" + std::to_string(v) + " crosses graphs " + std::to_string(node_graph[ui] + 1) +
                        " and " + std::to_string(node_graph[vi] + 1));
    }
    if (ui == vi) continue;
    Matrix& adj = ds.graphs[node_graph[ui]].adjacency;
    adj(local[ui], local[vi]) = 1.0;
    adj(local[vi], local[ui]) = 1.0;
  }

  const fs::path nl_path = dir / (ds.name + "_node_labels.txt");
  const fs::path na_path = dir / (ds.name + "_node_attributes.txt");
  const bool has_labels = fs::exists(nl_path);
  const bool has_attrs = fs::exists(na_path);

  if (options.force_synthetic || (!has_labels && !has_attrs)) {
    ds = synthesize_features(std::move(ds), options.fallback_features);
  } else {
    std::vector<int> node_labels;
    std::map<int, std::size_t> label_slot;
    if (has_labels) {
      for (const auto& [no, line] : read_lines(nl_path)) {
        // Some releases carry several comma-separated label columns; the
        // first column is the node label.
        const auto comma = line.find(',');
        node_labels.push_back(parse_number<int>(std::string_view(line).substr(0, comma), nl_path, no));
      }
      if (node_labels.size() != node_graph.size()) {
        throw FormatError(nl_path.filename().string() + ": " + std::to_string(node_labels.size()) +
                          " labels for " + std::to_string(node_graph.size()) + " nodes");
      }
      for (int l : node_labels) label_slot.emplace(l, 0);
      std::size_t slot = 0;
      for (auto& [l, s] : label_slot) s = slot++;
    }
    std::vector<std::vector<double>> attrs;
    std::size_t attr_dim = 0;
    if (has_attrs) {
      for (const auto& [no, line] : read_lines(na_path)) {
        std::vector<double> row;
        std::string_view rest(line);
        while (true) {
          const auto comma = rest.find(',');
          row.push_back(parse_number<double>(rest.substr(0, comma), na_path, no));
          if (comma == std::string_view::npos) break;
          rest = rest.substr(comma + 1);
        }
        if (attrs.empty()) attr_dim = row.size();
        if (row.size() != attr_dim) {
          throw FormatError(na_path.filename().string() + ":" + std::to_string(no) + ": expected " +
                            std::to_string(attr_dim) + " attributes");
        }
        attrs.push_back(std::move(row));
      }
      if (attrs.size() != node_graph.size()) {
        throw FormatError(na_path.filename().string() + ": " + std::to_string(attrs.size()) + " rows for " +
                          std::to_string(node_graph.size()) + " nodes");
      }
    }
    const std::size_t label_dim = label_slot.size();
    ds.feature_dim = label_dim + attr_dim;
    for (Graph& g : ds.graphs) g.features = Matrix(g.node_count(), ds.feature_dim);
    for (std::size_t k = 0; k < node_graph.size(); ++k) {
      Matrix& x = ds.graphs[node_graph[k]].features;
      if (has_labels) x(local[k], label_slot.at(node_labels[k])) = 1.0;
      for (std::size_t a = 0; a < attr_dim; ++a) x(local[k], label_dim + a) = attrs[k][a];
    }
  }

  assign_anomaly_labels(ds, default_normal_class(ds));
  for (const Graph& g : ds.graphs) g.validate();
  return ds;
}

}  // namespace fgad
