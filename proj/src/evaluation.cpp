#include "fgad/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>

#include "fgad/error.hpp"

namespace fgad {

std::string_view to_string(ScoreSource s) { return s == ScoreSource::Teacher ? "teacher" : "student"; }

ScoreSource score_source_from_string(std::string_view s) {
  if (s == "teacher") return ScoreSource::Teacher;
  if (s == "student") return ScoreSource::Student;
  throw ParameterError("unknown score source '" + std::string(s) + "'");
}

double anomaly_score(const LocalModel& model, const Graph& g, ScoreSource source) {
  ad::Tape tape;
  BoundModel bound = bind(tape, model, kTrainNone);
  GinOutput emb = gin_forward(bound, tape, g);
  ad::Var logits = source == ScoreSource::Teacher ? teacher_logits(bound, emb.graph_embedding)
                                                  : student_logits(bound, emb.graph_embedding);
  return ad::softmax_rows(logits).value()(0, 0);
}

ScoredSet score_graphs(const LocalModel& model, std::span<const Graph> graphs, ScoreSource source) {
  ScoredSet set;
  set.scores.reserve(graphs.size());
  set.labels.reserve(graphs.size());
  for (const Graph& g : graphs) {
    set.scores.push_back(anomaly_score(model, g, source));
    set.labels.push_back(g.anomaly_label == kAnomalous ? 1 : 0);
  }
  return set;
}

namespace {

MetricSummary summarize(const std::vector<ClientMetrics>& clients, double ClientMetrics::*field) {
  MetricSummary s;
  double total = 0.0;
  std::vector<double> values;
  for (const auto& c : clients) {
    if (c.flagged) continue;
    total += static_cast<double>(c.test_size);
    values.push_back(c.*field);
  }
  if (values.empty()) return s;
  for (const auto& c : clients)
    if (!c.flagged) s.weighted += static_cast<double>(c.test_size) / total * (c.*field);
  s.min = *std::min_element(values.begin(), values.end());
  s.max = *std::max_element(values.begin(), values.end());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  s.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

}  // namespace

FederationEvaluation aggregate_metrics(std::vector<ClientMetrics> clients) {
  FederationEvaluation ev;
  ev.auc = summarize(clients, &ClientMetrics::auc);
  ev.auprc = summarize(clients, &ClientMetrics::auprc);
  ev.evaluated_clients = static_cast<std::size_t>(
      std::count_if(clients.begin(), clients.end(), [](const ClientMetrics& c) { return !c.flagged; }));
  ev.clients = std::move(clients);
  return ev;
}

FederationEvaluation evaluate_federation(std::span<const EvalClient> clients, ScoreSource source) {
  std::vector<ClientMetrics> metrics(clients.size());
  std::vector<std::exception_ptr> failures(clients.size());
  const auto n = static_cast<std::ptrdiff_t>(clients.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) try {
    const EvalClient& c = clients[static_cast<std::size_t>(i)];
    ClientMetrics& m = metrics[static_cast<std::size_t>(i)];
    m.client_id = c.id;
    m.test_size = c.test->size();
    std::size_t pos = 0;
    for (const Graph& g : *c.test) pos += g.anomaly_label == kAnomalous ? 1 : 0;
    if (pos == 0 || pos == c.test->size()) {
      m.flagged = true;
      m.reason = pos == 0 ? "test set has no anomalous graphs" : "test set has no normal graphs";
      continue;
    }
    const ScoredSet set = score_graphs(*c.model, *c.test, source);
    m.auc = auc(set);
    m.auprc = auprc(set);
  } catch (...) {
    failures[static_cast<std::size_t>(i)] = std::current_exception();
  }
  for (std::size_t i = 0; i < failures.size(); ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const Error& e) {
      rethrow_with_context(e, "evaluating client " + std::to_string(clients[i].id));
    }
  }
  return aggregate_metrics(std::move(metrics));
}

void export_embeddings(const LocalModel& model, std::span<const TaggedGraph> graphs, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write embeddings to " + path.string());
  const std::size_t width = model.dims().embedding_dim();
  out << "graph_id,anomaly_label,split";
  for (std::size_t j = 0; j < width; ++j) out << ",e" << j;
  out << '\n';
  char buf[32];
  for (const TaggedGraph& tg : graphs) {
    ad::Tape tape;
    BoundModel bound = bind(tape, model, kTrainNone);
    const Matrix& e = gin_forward(bound, tape, *tg.graph).graph_embedding.value();
    out << tg.graph->index << ',' << tg.graph->anomaly_label << ',' << tg.split;
    for (double v : e.values()) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed while writing " + path.string());
}

}  // namespace fgad
