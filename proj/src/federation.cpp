#include "fgad/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>

#include <omp.h>

#include "fgad/error.hpp"
#include "fgad/kernels.hpp"
#include "fgad/params.hpp"

namespace fgad {

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::Fgad: return "fgad";
    case RunMode::AggregateAll: return "aggregate_all";
    case RunMode::SelfTrain: return "self_train";
  }
  return "unknown";
}

RunMode run_mode_from_string(std::string_view s) {
  for (RunMode m : {RunMode::Fgad, RunMode::AggregateAll, RunMode::SelfTrain})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected fgad, aggregate_all or self_train)");
}

std::vector<Group> exchanged_groups(RunMode m) {
  switch (m) {
    case RunMode::Fgad: return {Group::StudentHead};
    case RunMode::AggregateAll: return {kAllGroups.begin(), kAllGroups.end()};
    case RunMode::SelfTrain: return {};
  }
  return {};
}

GroupMask phase_mask(Phase phase) {
  GroupMask m = kTrainAll;
  if (phase == Phase::Pretrain) m[static_cast<std::size_t>(Group::StudentHead)] = false;
  return m;
}

namespace {

// Runs one stage of the objective; numeric failures get the stage name.
template <class F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(std::string(name) + ": " + e.what());
  }
}

Matrix with_self_loops(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.rows(); ++i) out(i, i) += 1.0;
  return out;
}

// Thread count for client loops; never more threads than clients.
int client_threads(std::size_t requested, std::size_t clients) {
  const std::size_t cap = std::max<std::size_t>(1, std::min(requested, clients));
  return static_cast<int>(cap);
}

// Runs fn(i) for every client, possibly in parallel, and rethrows the
// first failure (lowest client index) with `context`.
template <class F>
void for_each_client(std::size_t count, std::size_t threads, const std::string& context, F&& fn) {
  std::vector<std::exception_ptr> failures(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic) num_threads(client_threads(threads, count))
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const Error& e) {
      rethrow_with_context(e, context + ", client " + std::to_string(i));
    }
  }
}

void accumulate(LossBreakdown& acc, const LossBreakdown& b) {
  acc.l_g += b.l_g;
  acc.l_ad += b.l_ad;
  acc.l_kd += b.l_kd;
  acc.l_prior += b.l_prior;
  acc.total += b.total;
  acc.lambda = b.lambda;
  acc.gamma = b.gamma;
  acc.tau = b.tau;
}

void divide(LossBreakdown& acc, double n) {
  acc.l_g /= n;
  acc.l_ad /= n;
  acc.l_kd /= n;
  acc.l_prior /= n;
  acc.total /= n;
}

std::vector<std::vector<const Graph*>> shuffled_batches(const std::vector<Graph>& graphs, std::size_t batch_size,
                                                        Rng& rng) {
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<const Graph*>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::vector<const Graph*> b;
    for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) b.push_back(&graphs[order[i]]);
    batches.push_back(std::move(b));
  }
  return batches;
}

void require_train(const ClientState& client) {
  if (client.shard == nullptr || client.shard->train.empty()) {
    throw ConfigError("client " + std::to_string(client.id) + " has an empty training shard");
  }
}

}  // namespace

std::vector<Matrix> draw_batch_noise(const LocalModel& model, std::span<const Graph* const> batch, Rng& rng) {
  std::vector<Matrix> noise;
  noise.reserve(batch.size());
  for (const Graph* g : batch) noise.push_back(draw_noise(g->node_count(), model.dims().latent_dim, rng));
  return noise;
}

BatchObjective batch_objective(ad::Tape& tape, const LocalModel& model, const GroupMask& trainable,
                               std::span<const Graph* const> batch, std::span<const Matrix> noise,
                               const TrainSettings& settings, Phase phase) {
  if (batch.empty()) throw ParameterError("batch_objective: empty batch");
  if (noise.size() != batch.size()) throw DimensionError("batch_objective: one noise matrix per graph required");
  if (settings.lambda < 0.0 || settings.gamma < 0.0 || settings.prior_kl_weight < 0.0) {
    throw ParameterError("batch_objective: loss weights must be non-negative");
  }

  BatchObjective out;
  out.bound = bind(tape, model, trainable);
  const BoundModel& bm = out.bound;
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const bool with_prior = settings.prior_kl_weight > 0.0;

  std::vector<ad::Var> real_emb, gen_emb;
  ad::Var lg_sum, prior_sum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Graph& g = *batch[i];
    ad::Var a_hat = tape.constant(with_self_loops(g.adjacency));
    ad::Var x = tape.constant(g.features);

    GeneratorOutput gen = stage("generator", [&] { return generator_forward(bm, a_hat, x, noise[i]); });
    ad::Var lg = stage("generator loss", [&] {
      return generator_loss_logits(a_hat, gen.logits, !settings.unnormalized_generator_loss);
    });
    lg_sum = lg_sum.valid() ? ad::add(lg_sum, lg) : lg;
    if (with_prior) {
      ad::Var kl = stage("latent prior", [&] { return latent_prior_kl(gen.mu, gen.logvar); });
      prior_sum = prior_sum.valid() ? ad::add(prior_sum, kl) : kl;
    }

    ad::Var gen_adj = self_loop_adjacency(settings.stop_generator_grad ? ad::detach(gen.a_tilde) : gen.a_tilde);
    real_emb.push_back(stage("backbone", [&] { return gin_forward(bm[Group::Backbone], a_hat, x).graph_embedding; }));
    gen_emb.push_back(stage("backbone", [&] { return gin_forward(bm[Group::Backbone], gen_adj, x).graph_embedding; }));
  }

  ad::Var e_real = real_emb.size() == 1 ? real_emb.front() : ad::concat_rows(real_emb);
  ad::Var e_gen = gen_emb.size() == 1 ? gen_emb.front() : ad::concat_rows(gen_emb);
  ad::Var qt_real = stage("teacher head", [&] { return teacher_logits(bm, e_real); });
  ad::Var qt_gen = stage("teacher head", [&] { return teacher_logits(bm, e_gen); });
  out.l_ad = stage("detector loss", [&] { return detector_loss(qt_real, qt_gen); });

  out.l_g = ad::scale(lg_sum, inv_b);
  if (with_prior) {
    out.l_prior = ad::scale(prior_sum, inv_b);
    out.l_g = ad::add(out.l_g, ad::scale(out.l_prior, settings.prior_kl_weight));
    out.breakdown.l_prior = out.l_prior.item();
  }

  if (phase == Phase::Pretrain) {
    out.total = pretrain_loss(out.l_ad, out.l_g);
    out.breakdown.l_ad = out.l_ad.item();
    out.breakdown.l_g = out.l_g.item();
    out.breakdown.l_kd = 0.0;
    out.breakdown.total = out.total.item();
    out.breakdown.lambda = 1.0;
    out.breakdown.gamma = 0.0;
    out.breakdown.tau = settings.tau;
    return out;
  }

  // Distillation sees the real (normal) graphs only.
  ad::Var qs_real = stage("student head", [&] { return student_logits(bm, e_real); });
  out.l_kd = stage("distillation loss", [&] {
    return distillation_loss(qt_real, qs_real, settings.tau, settings.detach_teacher);
  });
  TotalLoss t = total_loss(out.l_ad, out.l_g, out.l_kd, settings.lambda, settings.gamma, settings.tau);
  out.total = t.value;
  const double prior = out.breakdown.l_prior;
  out.breakdown = t.breakdown;
  out.breakdown.l_prior = prior;
  return out;
}

LossBreakdown train_step(ClientState& client, std::span<const Graph* const> batch, const TrainSettings& settings,
                         Phase phase, std::size_t batch_index) {
  const std::string where = "batch " + std::to_string(batch_index);
  std::vector<Matrix> noise = draw_batch_noise(client.model, batch, client.rng);
  const GroupMask mask = phase_mask(phase);
  ad::Tape tape;
  BatchObjective obj;
  try {
    obj = batch_objective(tape, client.model, mask, batch, noise, settings, phase);
    tape.backward(obj.total);
  } catch (const Error& e) {
    rethrow_with_context(e, where);
  }
  for (Group g : kAllGroups) {
    if (!mask[static_cast<std::size_t>(g)]) continue;
    std::vector<Matrix> grads = gradients(obj.bound[g]);
    std::vector<const Matrix*> gp;
    for (const Matrix& m : grads) {
      if (!m.all_finite()) {
        throw NumericError(where + ": non-finite gradient in " + std::string(group_name(g)));
      }
      gp.push_back(&m);
    }
    std::vector<Matrix*> params = client.model.group(g).tensors();
    adam_step(params, gp, client.model.adam(g), settings.adam);
  }
  return obj.breakdown;
}

std::vector<double> local_pretrain(ClientState& client, std::size_t epochs, const TrainSettings& settings) {
  require_train(client);
  std::vector<double> losses;
  for (std::size_t e = 0; e < epochs; ++e) {
    auto batches = shuffled_batches(client.shard->train, settings.batch_size, client.rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      try {
        sum += train_step(client, batches[b], settings, Phase::Pretrain, b).total;
      } catch (const Error& e2) {
        rethrow_with_context(e2, "pretrain epoch " + std::to_string(e));
      }
    }
    losses.push_back(sum / static_cast<double>(batches.size()));
  }
  client.pretrained = true;
  return losses;
}

LossBreakdown local_train_epoch(ClientState& client, const TrainSettings& settings) {
  require_train(client);
  auto batches = shuffled_batches(client.shard->train, settings.batch_size, client.rng);
  LossBreakdown mean;
  for (std::size_t b = 0; b < batches.size(); ++b) accumulate(mean, train_step(client, batches[b], settings, Phase::Joint, b));
  divide(mean, static_cast<double>(batches.size()));
  return mean;
}

ParameterSnapshot extract_groups(const ClientState& client, std::span<const Group> groups) {
  ParameterSnapshot s;
  s.client_id = client.id;
  s.groups.assign(groups.begin(), groups.end());
  s.values = flatten(client.model, groups);
  return s;
}

ParameterSnapshot extract_student_head(const ClientState& client) {
  const Group g[] = {Group::StudentHead};
  return extract_groups(client, g);
}

std::uint64_t CommunicationLedger::total_uploaded() const {
  return std::accumulate(uploaded.begin(), uploaded.end(), std::uint64_t{0});
}

std::uint64_t CommunicationLedger::total_downloaded() const {
  return std::accumulate(downloaded.begin(), downloaded.end(), std::uint64_t{0});
}

const std::vector<double>& aggregate_uploads(ServerState& server, std::span<const Upload> uploads) {
  if (uploads.empty()) throw ProtocolError("aggregation with no uploads");
  const std::size_t len = uploads.front().snapshot.count();
  double wsum = 0.0;
  for (const Upload& u : uploads) {
    if (u.snapshot.count() != len) {
      throw ProtocolError("client " + std::to_string(u.snapshot.client_id) + " uploaded " +
                          std::to_string(u.snapshot.count()) + " scalars, expected " + std::to_string(len));
    }
    if (!(u.weight > 0.0)) {
      throw ProtocolError("client " + std::to_string(u.snapshot.client_id) + " has non-positive weight");
    }
    if (!server.groups.empty() && u.snapshot.groups != server.groups) {
      throw ProtocolError("client " + std::to_string(u.snapshot.client_id) + " uploaded unexpected groups");
    }
    wsum += u.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw ProtocolError("upload weights sum to " + std::to_string(wsum));

  std::vector<std::span<const double>> vecs;
  std::vector<double> weights;
  for (const Upload& u : uploads) {
    vecs.emplace_back(u.snapshot.values);
    weights.push_back(u.weight);
  }
  server.aggregated.assign(len, 0.0);
  kernels::weighted_sum(vecs, weights, server.aggregated);
  if (server.groups.empty()) server.groups = uploads.front().snapshot.groups;

  if (server.ledger.uploaded.size() <= server.round_index) {
    server.ledger.uploaded.resize(server.round_index + 1, 0);
    server.ledger.downloaded.resize(server.round_index + 1, 0);
  }
  const std::uint64_t moved = static_cast<std::uint64_t>(uploads.size()) * len;
  server.ledger.uploaded[server.round_index] += moved;
  server.ledger.downloaded[server.round_index] += moved;
  return server.aggregated;
}

const std::vector<double>& aggregate_student_heads(ServerState& server, std::span<const Upload> uploads) {
  for (const Upload& u : uploads) {
    if (u.snapshot.groups != std::vector<Group>{Group::StudentHead}) {
      throw ProtocolError("client " + std::to_string(u.snapshot.client_id) + " uploaded more than the student head");
    }
  }
  return aggregate_uploads(server, uploads);
}

void distribute(const ServerState& server, ClientState& client) {
  if (server.groups.empty()) return;
  unflatten(client.model, server.groups, server.aggregated);
}

void check_compatibility(const ClientPartition& partition, const RunSettings& settings) {
  if (partition.client_count() == 0) throw ConfigError("partition has no clients");
  for (std::size_t c = 0; c < partition.client_count(); ++c) {
    if (partition.shards[c].train.empty()) {
      throw ConfigError("client " + std::to_string(c) + " has an empty training shard");
    }
  }
  if (settings.train.batch_size == 0) throw ConfigError("batch_size must be positive");
  settings.dims.validate();
  if (settings.mode == RunMode::AggregateAll) {
    const std::size_t d0 = partition.shards.front().feature_dim();
    for (std::size_t c = 1; c < partition.client_count(); ++c) {
      if (partition.shards[c].feature_dim() != d0) {
        throw ConfigError("aggregate_all needs one input width across clients, but client 0 has " +
                          std::to_string(d0) + " features and client " + std::to_string(c) + " has " +
                          std::to_string(partition.shards[c].feature_dim()) +
                          "; only the student head has a client-independent shape");
      }
    }
  }
}

std::vector<ClientState> make_clients(const ClientPartition& partition, const RunSettings& settings) {
  const std::vector<double> weights = partition.shard_weights();
  const std::vector<Group> shared = exchanged_groups(settings.mode);
  const std::uint64_t server_seed = derive_seed(settings.seed, Stream::ServerInit);
  std::vector<ClientState> clients(partition.client_count());
  for (std::size_t c = 0; c < clients.size(); ++c) {
    ClientState& cs = clients[c];
    cs.id = c;
    cs.shard = &partition.shards[c];
    cs.weight = weights[c];
    ModelDims dims = settings.dims;
    dims.input_dim = cs.shard->feature_dim();
    cs.model = LocalModel(dims);
    const std::uint64_t own_seed = derive_seed(settings.seed, Stream::Init, {c});
    for (Group g : kAllGroups) {
      const bool common = std::find(shared.begin(), shared.end(), g) != shared.end();
      cs.model.init_group(g, common ? server_seed : own_seed);
    }
    cs.rng = Rng(derive_seed(settings.seed, Stream::Train, {c}));
  }
  return clients;
}

FederationEvaluation evaluate_clients(std::span<const ClientState> clients, ScoreSource source,
                                      std::size_t parallel_clients) {
  std::vector<EvalClient> ec;
  for (const ClientState& c : clients) ec.push_back({c.id, &c.model, &c.shard->test});
  const int saved = omp_get_max_threads();
  omp_set_num_threads(client_threads(parallel_clients, clients.size()));
  FederationEvaluation out;
  try {
    out = evaluate_federation(ec, source);
  } catch (...) {
    omp_set_num_threads(saved);
    throw;
  }
  omp_set_num_threads(saved);
  return out;
}

FederationRun start_federation(const ClientPartition& partition, const RunSettings& settings) {
  check_compatibility(partition, settings);
  FederationRun run;
  run.clients = make_clients(partition, settings);
  const std::size_t C = run.clients.size();

  run.server.groups = exchanged_groups(settings.mode);
  if (!run.server.groups.empty()) run.server.aggregated = flatten(run.clients.front().model, run.server.groups);

  run.pretrain_losses.resize(C);
  for_each_client(C, settings.parallel_clients, "pretraining", [&](std::size_t c) {
    run.pretrain_losses[c] = local_pretrain(run.clients[c], settings.train.pretrain_epochs, settings.train);
  });
  return run;
}

void continue_federation(FederationRun& run, const RunSettings& settings, const RoundObserver& observer) {
  const std::size_t C = run.clients.size();
  const TrainSettings& ts = settings.train;
  const std::size_t epochs = std::max<std::size_t>(1, ts.local_epochs);
  const std::uint64_t per_client = run.server.groups.empty() ? 0 : run.server.aggregated.size();

  for (std::size_t r = run.completed_rounds; r < settings.rounds && !run.stopped_early; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    RoundReport rep;
    rep.round_index = r;
    rep.client_losses.resize(C);
    const std::string ctx = "round " + std::to_string(r);
    for_each_client(C, settings.parallel_clients, ctx, [&](std::size_t c) {
      LossBreakdown mean;
      for (std::size_t e = 0; e < epochs; ++e) accumulate(mean, local_train_epoch(run.clients[c], ts));
      divide(mean, static_cast<double>(epochs));
      rep.client_losses[c] = mean;
    });
    for (std::size_t c = 0; c < C; ++c) rep.global_loss += run.clients[c].weight * rep.client_losses[c].total;

    run.server.round_index = r;
    run.server.ledger.uploaded.resize(r + 1, 0);
    run.server.ledger.downloaded.resize(r + 1, 0);
    if (!run.server.groups.empty()) {
      std::vector<Upload> uploads;
      for (const ClientState& c : run.clients) uploads.push_back({extract_groups(c, run.server.groups), c.weight});
      try {
        aggregate_uploads(run.server, uploads);
      } catch (const Error& e) {
        rethrow_with_context(e, ctx);
      }
      for (ClientState& c : run.clients) distribute(run.server, c);
    }
    rep.transmitted = per_client;

    run.loss_history.push_back(rep.global_loss);
    run.completed_rounds = r + 1;
    const auto& h = run.loss_history;
    if (settings.early_stop && h.size() > settings.early_stop_window) {
      const double before = h[h.size() - 1 - settings.early_stop_window];
      run.stopped_early = before - rep.global_loss < settings.early_stop_delta;
    }
    const bool last = run.stopped_early || r + 1 == settings.rounds;
    if (last || (settings.eval_every > 0 && (r + 1) % settings.eval_every == 0)) {
      try {
        rep.evaluation = evaluate_clients(run.clients, settings.score_source, settings.parallel_clients);
      } catch (const Error& e) {
        rethrow_with_context(e, ctx);
      }
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (observer) observer(rep);
    run.rounds.push_back(std::move(rep));
  }

  if (!run.rounds.empty() && run.rounds.back().evaluation && run.rounds.back().round_index + 1 == run.completed_rounds) {
    run.final_evaluation = *run.rounds.back().evaluation;
  } else {
    run.final_evaluation = evaluate_clients(run.clients, settings.score_source, settings.parallel_clients);
  }
}

FederationRun run_federation(const ClientPartition& partition, const RunSettings& settings,
                             const RoundObserver& observer) {
  FederationRun run = start_federation(partition, settings);
  continue_federation(run, settings, observer);
  return run;
}

void attach_partition(FederationRun& run, const ClientPartition& partition) {
  if (partition.client_count() != run.clients.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(run.clients.size()) + " clients, partition has " +
                          std::to_string(partition.client_count()));
  }
  const std::vector<double> w = partition.shard_weights();
  for (std::size_t c = 0; c < run.clients.size(); ++c) {
    if (partition.shards[c].feature_dim() != run.clients[c].model.dims().input_dim) {
      throw CheckpointError("client " + std::to_string(c) + " input width does not match the rebuilt partition");
    }
    run.clients[c].shard = &partition.shards[c];
    run.clients[c].weight = w[c];
  }
}

std::uint64_t transmitted_per_client(const ModelDims& dims, RunMode mode) {
  const LocalModel m(dims);
  std::uint64_t n = 0;
  for (Group g : exchanged_groups(mode)) n += m.parameter_count(g);
  return n;
}

CommunicationSummary communication_report(const FederationRun& run, RunMode mode) {
  CommunicationSummary s;
  s.mode = mode;
  s.clients = run.clients.size();
  s.rounds = run.rounds.size();
  s.total = run.server.ledger.total();
  s.per_round = s.rounds > 0 ? s.total / s.rounds : 0;
  s.per_client_upload = run.rounds.empty() ? 0 : run.rounds.front().transmitted;
  s.model_parameters = run.clients.empty() ? 0 : run.clients.front().model.parameter_count();
  s.ratio = s.model_parameters > 0 ? static_cast<double>(s.per_client_upload) / static_cast<double>(s.model_parameters)
                                   : 0.0;
  return s;
}

}  // namespace fgad
