#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgad/graph.hpp"
#include "fgad/metrics.hpp"
#include "fgad/model.hpp"

namespace fgad {

enum class ScoreSource { Teacher, Student };
std::string_view to_string(ScoreSource s);
ScoreSource score_source_from_string(std::string_view s);

/// Probability of the anomalous class (logit index 0) under the chosen head.
double anomaly_score(const LocalModel& model, const Graph& g, ScoreSource source = ScoreSource::Teacher);
ScoredSet score_graphs(const LocalModel& model, std::span<const Graph> graphs, ScoreSource source);

struct ClientMetrics {
  std::size_t client_id = 0;
  std::size_t test_size = 0;
  double auc = 0.0;
  double auprc = 0.0;
  bool flagged = false;  // degenerate test set; excluded from the aggregate
  std::string reason;
};

struct MetricSummary {
  double weighted = 0.0;  // test-size weighted mean over unflagged clients
  double min = 0.0;
  double max = 0.0;
  double stddev = 0.0;  // population std across unflagged clients
};

struct FederationEvaluation {
  std::vector<ClientMetrics> clients;
  MetricSummary auc;
  MetricSummary auprc;
  std::size_t evaluated_clients = 0;
};

struct EvalClient {
  std::size_t id;
  const LocalModel* model;
  const std::vector<Graph>* test;
};

/// Combines per-client metrics; flagged clients are skipped.
FederationEvaluation aggregate_metrics(std::vector<ClientMetrics> clients);

FederationEvaluation evaluate_federation(std::span<const EvalClient> clients, ScoreSource source);

struct TaggedGraph {
  const Graph* graph;
  std::string_view split;  // "train" / "test"
};

/// CSV: graph_id,anomaly_label,split,e0..e{K*hidden-1}; one row per graph.
void export_embeddings(const LocalModel& model, std::span<const TaggedGraph> graphs,
                       const std::filesystem::path& path);

}  // namespace fgad
