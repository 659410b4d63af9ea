#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "fgad/checkpoint.hpp"
#include "fgad/error.hpp"
#include "fgad/federation.hpp"
#include "fgad/params.hpp"
#include "fgad/synthetic.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace fgad;
using fgad::test::small_dims;
using fgad::test::small_synthetic;

namespace {

RunSettings small_run(RunMode mode, std::size_t rounds = 3, std::uint64_t seed = 5) {
  RunSettings s;
  s.mode = mode;
  s.dims = small_dims(9);
  s.rounds = rounds;
  s.seed = seed;
  s.train.batch_size = 8;
  s.train.pretrain_epochs = 2;
  return s;
}

Upload upload(std::size_t client, std::vector<double> v, double w) {
  Upload u;
  u.snapshot.client_id = client;
  u.snapshot.groups = {Group::StudentHead};
  u.snapshot.values = std::move(v);
  u.weight = w;
  return u;
}

bool same_breakdown(const LossBreakdown& a, const LossBreakdown& b) {
  return a.l_g == b.l_g && a.l_ad == b.l_ad && a.l_kd == b.l_kd && a.total == b.total;
}

bool same_parameters(const LocalModel& a, const LocalModel& b) {
  return flatten(a, kAllGroups) == flatten(b, kAllGroups);
}

}  // namespace

TEST_CASE("mode names and exchanged groups") {
  CHECK(run_mode_from_string("fgad") == RunMode::Fgad);
  CHECK(run_mode_from_string("aggregate_all") == RunMode::AggregateAll);
  CHECK(run_mode_from_string("self_train") == RunMode::SelfTrain);
  CHECK_THROWS_AS(run_mode_from_string("fedavg"), ConfigError);
  CHECK(exchanged_groups(RunMode::Fgad) == std::vector<Group>{Group::StudentHead});
  CHECK(exchanged_groups(RunMode::SelfTrain).empty());
  CHECK(exchanged_groups(RunMode::AggregateAll).size() == kGroupCount);
}

TEST_CASE("aggregation examples") {
  ServerState server;
  server.groups = {Group::StudentHead};
  std::vector<Upload> ups{upload(0, {1, 3}, 0.5), upload(1, {3, 5}, 0.5)};
  CHECK(aggregate_student_heads(server, ups) == std::vector<double>{2, 4});
  ups = {upload(0, {0}, 0.25), upload(1, {4}, 0.75)};
  CHECK(aggregate_student_heads(server, ups) == std::vector<double>{3});
  ups = {upload(0, {1.5, -2.0, 7.25}, 1.0)};
  CHECK(aggregate_student_heads(server, ups) == std::vector<double>{1.5, -2.0, 7.25});
}

TEST_CASE("aggregation rejects malformed uploads") {
  ServerState server;
  server.groups = {Group::StudentHead};
  std::vector<Upload> ups{upload(0, {1, 3}, 0.5), upload(4, {3, 5, 7}, 0.5)};
  try {
    aggregate_student_heads(server, ups);
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("client 4") != std::string::npos);
  }
  ups = {upload(0, {1}, 0.5), upload(1, {3}, 0.2)};
  CHECK_THROWS_AS(aggregate_student_heads(server, ups), ProtocolError);
  ups = {upload(0, {1}, -0.5), upload(1, {3}, 1.5)};
  CHECK_THROWS_AS(aggregate_student_heads(server, ups), ProtocolError);
  ups = {};
  CHECK_THROWS_AS(aggregate_student_heads(server, ups), ProtocolError);
  Upload wrong = upload(0, {1}, 1.0);
  wrong.snapshot.groups = {Group::Backbone};
  ups = {wrong};
  CHECK_THROWS_AS(aggregate_student_heads(server, ups), ProtocolError);
}

TEST_CASE("aggregation matches the naive weighted loop bit for bit") {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> clients(1, 8), length(1, 300);
  std::uniform_real_distribution<double> u(-5, 5), pos(0.1, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t C = clients(rng), n = length(rng);
    std::vector<std::vector<double>> xs(C, std::vector<double>(n));
    std::vector<double> w(C);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      for (double& x : xs[c]) x = u(rng);
      w[c] = pos(rng);
      sum += w[c];
    }
    for (double& x : w) x /= sum;
    std::vector<Upload> ups;
    for (std::size_t c = 0; c < C; ++c) ups.push_back(upload(c, xs[c], w[c]));
    ServerState server;
    server.groups = {Group::StudentHead};
    CHECK(aggregate_student_heads(server, ups) == fgad::test::weighted_average_oracle(xs, w));
    CHECK(server.ledger.uploaded.at(0) == C * n);
    CHECK(server.ledger.downloaded.at(0) == C * n);
  }
}

TEST_CASE("snapshots are copies and have the closed-form size") {
  RunSettings s = small_run(RunMode::Fgad);
  s.dims = ModelDims{};
  SyntheticSpec spec = small_synthetic();
  spec.degree_cap = 64;
  const ClientPartition p = synthetic_benchmark(spec, 3);
  std::vector<ClientState> clients = make_clients(p, s);
  ParameterSnapshot snap = extract_student_head(clients[0]);
  CHECK(snap.count() == 33090);
  CHECK(transmitted_per_client(s.dims, RunMode::Fgad) == 33090);
  CHECK(extract_student_head(clients[2]).count() == snap.count());
  snap.values[0] += 1.0;
  CHECK(extract_student_head(clients[0]).values[0] != snap.values[0]);
  // exchanged groups start from one common draw
  CHECK(extract_student_head(clients[1]).values == extract_student_head(clients[0]).values);
  const Group bb[] = {Group::Backbone};
  CHECK(extract_groups(clients[1], bb).values != extract_groups(clients[0], bb).values);
}

TEST_CASE("local pretraining") {
  const ClientPartition p = synthetic_benchmark(small_synthetic(), 2);
  RunSettings s = small_run(RunMode::Fgad);
  std::vector<ClientState> clients = make_clients(p, s);
  ClientState& c = clients[0];
  const LocalModel before = c.model;
  CHECK(local_pretrain(c, 0, s.train).empty());
  CHECK(same_parameters(c.model, before));

  const auto losses = local_pretrain(c, 3, s.train);
  CHECK(losses.size() == 3);
  CHECK_FALSE(same_parameters(c.model, before));
  const Group sh[] = {Group::StudentHead};
  CHECK(flatten(c.model, sh) == flatten(before, sh));
  CHECK(c.model.adam(Group::StudentHead).step == 0);
  CHECK(c.model.adam(Group::Backbone).step > 0);

  ClientState empty = clients[1];
  ClientShard none;
  empty.shard = &none;
  CHECK_THROWS_AS(local_pretrain(empty, 1, s.train), ConfigError);
}

TEST_CASE("local train epoch determinism and degenerate weights") {
  const ClientPartition p = synthetic_benchmark(small_synthetic(), 2);
  RunSettings s = small_run(RunMode::Fgad);
  std::vector<ClientState> a = make_clients(p, s);
  std::vector<ClientState> b = make_clients(p, s);
  const LossBreakdown la = local_train_epoch(a[1], s.train);
  const LossBreakdown lb = local_train_epoch(b[1], s.train);
  CHECK(same_breakdown(la, lb));
  CHECK(same_parameters(a[1].model, b[1].model));
  CHECK(la.total == doctest::Approx(la.l_ad + la.l_g + la.l_kd));

  TrainSettings zero = s.train;
  zero.lambda = 0.0;
  zero.gamma = 0.0;
  const LossBreakdown lz = local_train_epoch(a[0], zero);
  CHECK(lz.total == doctest::Approx(lz.l_ad).epsilon(1e-14));
}

TEST_CASE("the distillation term alone leaves the teacher head without gradient") {
  const ClientPartition p = synthetic_benchmark(small_synthetic(), 2);
  RunSettings s = small_run(RunMode::Fgad);
  std::vector<ClientState> clients = make_clients(p, s);
  const auto& train = clients[0].shard->train;
  std::vector<const Graph*> batch{&train[0], &train[1], &train[2]};
  const auto noise = draw_batch_noise(clients[0].model, batch, clients[0].rng);
  ad::Tape tape;
  BatchObjective obj = batch_objective(tape, clients[0].model, kTrainAll, batch, noise, s.train, Phase::Joint);
  tape.backward(obj.l_kd);
  for (const Matrix& g : gradients(obj.bound[Group::TeacherHead])) {
    for (double v : g.values()) CHECK(v == 0.0);
  }
  double student = 0.0;
  for (const Matrix& g : gradients(obj.bound[Group::StudentHead]))
    for (double v : g.values()) student += std::abs(v);
  CHECK(student > 0.0);
}

TEST_CASE("communication ledger by mode") {
  const ClientPartition p = synthetic_benchmark(small_synthetic(), 4);
  const std::size_t R = 3, C = 3;
  const std::uint64_t head = transmitted_per_client(small_dims(9), RunMode::Fgad);

  const FederationRun self = run_federation(p, small_run(RunMode::SelfTrain, R));
  CHECK(self.server.ledger.total() == 0);
  for (const RoundReport& r : self.rounds) CHECK(r.transmitted == 0);

  const FederationRun fgad = run_federation(p, small_run(RunMode::Fgad, R));
  CHECK(fgad.server.ledger.total_uploaded() == R * C * head);
  CHECK(fgad.server.ledger.total_downloaded() == R * C * head);
  CHECK(fgad.rounds.back().transmitted == head);
  // every client finishes with the aggregated head
  const Group sh[] = {Group::StudentHead};
  for (const ClientState& c : fgad.clients) CHECK(flatten(c.model, sh) == fgad.server.aggregated);
  // nothing else is shared
  const Group bb[] = {Group::Backbone};
  CHECK(flatten(fgad.clients[0].model, bb) != flatten(fgad.clients[1].model, bb));

  const FederationRun all = run_federation(p, small_run(RunMode::AggregateAll, R));
  const std::uint64_t full = all.clients[0].model.parameter_count();
  CHECK(all.server.ledger.total_uploaded() == R * C * full);
  for (std::size_t c = 1; c < C; ++c) CHECK(same_parameters(all.clients[c].model, all.clients[0].model));

  const CommunicationSummary cs_self = communication_report(self, RunMode::SelfTrain);
  const CommunicationSummary cs_fgad = communication_report(fgad, RunMode::Fgad);
  const CommunicationSummary cs_all = communication_report(all, RunMode::AggregateAll);
  CHECK(cs_self.total == 0);
  CHECK(cs_fgad.per_client_upload == head);
  CHECK(cs_all.per_client_upload == full);
  CHECK(cs_all.ratio == 1.0);
  CHECK(cs_self.ratio < cs_fgad.ratio);
  CHECK(cs_fgad.ratio < cs_all.ratio);
  CHECK(cs_fgad.per_round == 2 * C * head);
  CHECK(cs_fgad.total == R * cs_fgad.per_round);
}

TEST_CASE("runs are deterministic and the global loss is the weighted client mean") {
  const ClientPartition p = synthetic_benchmark(small_synthetic(), 6);
  RunSettings s = small_run(RunMode::Fgad, 3);
  s.eval_every = 1;
  const FederationRun a = run_federation(p, s);
  const FederationRun b = run_federation(p, s);
  REQUIRE(a.rounds.size() == 3);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.pretrain_losses == b.pretrain_losses);
  for (std::size_t r = 0; r < 3; ++r) {
    REQUIRE(a.rounds[r].evaluation.has_value());
    CHECK(a.rounds[r].evaluation->auc.weighted == b.rounds[r].evaluation->auc.weighted);
    double g = 0.0;
    for (std::size_t c = 0; c < a.clients.size(); ++c) g += a.clients[c].weight * a.rounds[r].client_losses[c].total;
    CHECK(std::abs(g - a.rounds[r].global_loss) <= 1e-9);
  }
  for (std::size_t c = 0; c < a.clients.size(); ++c) CHECK(same_parameters(a.clients[c].model, b.clients[c].model));

  RunSettings par = s;
  par.parallel_clients = 3;
  const FederationRun pc = run_federation(p, par);
  CHECK(pc.loss_history == a.loss_history);

  RunSettings other = s;
  other.seed = 7;
  CHECK(run_federation(p, other).loss_history != a.loss_history);
}

TEST_CASE("evaluation schedule and early stopping") {
  const ClientPartition p = synthetic_benchmark(small_synthetic(), 6);
  RunSettings s = small_run(RunMode::Fgad, 4);
  s.eval_every = 0;
  const FederationRun a = run_federation(p, s);
  for (std::size_t r = 0; r + 1 < a.rounds.size(); ++r) CHECK_FALSE(a.rounds[r].evaluation.has_value());
  CHECK(a.rounds.back().evaluation.has_value());
  CHECK(a.final_evaluation.auc.weighted == a.rounds.back().evaluation->auc.weighted);

  RunSettings e = small_run(RunMode::Fgad, 30);
  e.early_stop = true;
  e.early_stop_window = 2;
  e.early_stop_delta = 1e9;  // any round without a 1e9 drop stops the run
  const FederationRun es = run_federation(p, e);
  CHECK(es.stopped_early);
  CHECK(es.completed_rounds == 3);
  CHECK(es.rounds.back().evaluation.has_value());
}

TEST_CASE("aggregate_all refuses clients with different input widths") {
  ClientPartition p = synthetic_benchmark(small_synthetic(2), 1);
  for (Graph& g : p.shards[1].train) g.features = Matrix::ones(g.node_count(), 3);
  for (Graph& g : p.shards[1].test) g.features = Matrix::ones(g.node_count(), 3);
  CHECK_THROWS_AS(run_federation(p, small_run(RunMode::AggregateAll, 1)), ConfigError);
  // fgad only shares the student head, whose shape does not depend on the input width
  const FederationRun ok = run_federation(p, small_run(RunMode::Fgad, 1));
  CHECK(ok.clients[1].model.dims().input_dim == 3);
  CHECK(ok.clients[0].model.dims().input_dim == 9);
}

TEST_CASE("a round failure names the client and batch") {
  ClientPartition p = synthetic_benchmark(small_synthetic(2), 1);
  RunSettings s = small_run(RunMode::Fgad, 1);
  s.train.pretrain_epochs = 0;
  FederationRun run = start_federation(p, s);
  p.shards[1].train[0].features(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    continue_federation(run, s);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("client 1") != std::string::npos);
    CHECK(msg.find("batch") != std::string::npos);
  }
}

TEST_CASE("checkpoint round trip and resume") {
  const ClientPartition p = synthetic_benchmark(small_synthetic(), 8);
  RunSettings s = small_run(RunMode::Fgad, 4);
  const FederationRun straight = run_federation(p, s);

  RunSettings half = s;
  half.rounds = 2;
  const FederationRun first = run_federation(p, half);
  const auto path = std::filesystem::temp_directory_path() / "fgad_test.ckpt";
  const nlohmann::json cfg = {{"note", "test"}};
  save_checkpoint(path, cfg, p, first, RunMode::Fgad);

  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.config == cfg);
  CHECK(ck.partition_hash == p.hash());
  CHECK(ck.mode == RunMode::Fgad);
  CHECK(ck.run.completed_rounds == 2);
  CHECK(ck.run.loss_history == first.loss_history);
  CHECK(ck.run.server.aggregated == first.server.aggregated);
  for (std::size_t c = 0; c < first.clients.size(); ++c) {
    CHECK(same_parameters(ck.run.clients[c].model, first.clients[c].model));
    CHECK(ck.run.clients[c].model.adam(Group::Backbone).step == first.clients[c].model.adam(Group::Backbone).step);
  }

  attach_partition(ck.run, p);
  continue_federation(ck.run, s);
  CHECK(ck.run.loss_history == straight.loss_history);
  CHECK(ck.run.server.ledger.total() == straight.server.ledger.total());
  CHECK(ck.run.final_evaluation.auc.weighted == straight.final_evaluation.auc.weighted);
  for (std::size_t c = 0; c < straight.clients.size(); ++c)
    CHECK(same_parameters(ck.run.clients[c].model, straight.clients[c].model));

  const ClientPartition other = synthetic_benchmark(small_synthetic(2), 8);
  Checkpoint again = load_checkpoint(path);
  CHECK_THROWS_AS(attach_partition(again.run, other), CheckpointError);

  // bump the version field that follows the magic
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    const char v = 99;
    f.write(&v, 1);
  }
  try {
    load_checkpoint(path);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
}
