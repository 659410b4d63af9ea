#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fgad/adam.hpp"
#include "fgad/evaluation.hpp"
#include "fgad/graph.hpp"
#include "fgad/losses.hpp"
#include "fgad/model.hpp"
#include "fgad/rng.hpp"

namespace fgad {

/// fgad exchanges the student head only; aggregate_all averages every group
/// (plain FedAvg); self_train never communicates.
enum class RunMode { Fgad, AggregateAll, SelfTrain };
std::string_view to_string(RunMode m);
RunMode run_mode_from_string(std::string_view s);

/// Groups a mode sends to and receives from the server, in upload order.
std::vector<Group> exchanged_groups(RunMode m);

struct TrainSettings {
  double lambda = 1.0;
  double gamma = 1.0;
  double tau = 1.0;
  AdamSettings adam;
  std::size_t batch_size = 64;
  std::size_t pretrain_epochs = 10;
  std::size_t local_epochs = 1;
  bool stop_generator_grad = false;   // detach a_tilde before it reaches the detector
  double prior_kl_weight = 0.0;       // 0 disables the latent prior term
  bool unnormalized_generator_loss = false;
  bool detach_teacher = true;
};

enum class Phase { Pretrain, Joint };

struct ClientState {
  std::size_t id = 0;
  LocalModel model;
  const ClientShard* shard = nullptr;
  double weight = 0.0;  // |D_c| / |D| over training sets
  Rng rng;              // Train stream: shuffling and reparameterisation noise
  bool pretrained = false;
};

/// Loss terms of one batch, still on the tape.
struct BatchObjective {
  ad::Var l_g;
  ad::Var l_ad;
  ad::Var l_kd;      // invalid in the pretrain phase
  ad::Var l_prior;   // invalid unless prior_kl_weight > 0
  ad::Var total;
  BoundModel bound;
  LossBreakdown breakdown;
};

/// Trainable groups of a phase: pretraining leaves the student head frozen.
GroupMask phase_mask(Phase phase);

/// Builds the batch loss on `tape`. One generated graph per real graph,
/// driven by noise[i]; the backbone runs once per real graph and feeds both
/// heads. Pretrain: l_ad + l_g. Joint: l_ad + lambda l_g + gamma l_kd.
BatchObjective batch_objective(ad::Tape& tape, const LocalModel& model, const GroupMask& trainable,
                               std::span<const Graph* const> batch, std::span<const Matrix> noise,
                               const TrainSettings& settings, Phase phase);

/// Noise matrices for a batch, drawn in batch order from `rng`.
std::vector<Matrix> draw_batch_noise(const LocalModel& model, std::span<const Graph* const> batch, Rng& rng);

/// One Adam step on one batch; returns the batch breakdown.
LossBreakdown train_step(ClientState& client, std::span<const Graph* const> batch, const TrainSettings& settings,
                         Phase phase, std::size_t batch_index = 0);

/// Per-epoch mean pretrain loss.
std::vector<double> local_pretrain(ClientState& client, std::size_t epochs, const TrainSettings& settings);

/// One shuffled pass over the train shard; mean breakdown over batches.
LossBreakdown local_train_epoch(ClientState& client, const TrainSettings& settings);

struct ParameterSnapshot {
  std::size_t client_id = 0;
  std::vector<Group> groups;
  std::vector<double> values;
  std::size_t count() const noexcept { return values.size(); }
};

/// By-value copy of the given groups (student head by default).
ParameterSnapshot extract_groups(const ClientState& client, std::span<const Group> groups);
ParameterSnapshot extract_student_head(const ClientState& client);

struct Upload {
  ParameterSnapshot snapshot;
  double weight = 0.0;
};

/// Scalars moved per round, kept as exact integers.
struct CommunicationLedger {
  std::vector<std::uint64_t> uploaded;    // per round
  std::vector<std::uint64_t> downloaded;  // per round
  std::uint64_t total_uploaded() const;
  std::uint64_t total_downloaded() const;
  std::uint64_t total() const { return total_uploaded() + total_downloaded(); }
};

struct ServerState {
  std::vector<double> aggregated;
  std::vector<Group> groups;
  std::size_t round_index = 0;
  CommunicationLedger ledger;
};

/// Weighted elementwise sum in upload order. Credits the ledger's current
/// round with C uploads and C downloads of `count` scalars.
const std::vector<double>& aggregate_uploads(ServerState& server, std::span<const Upload> uploads);
/// Same as aggregate_uploads, for the student head uploads of fgad mode.
const std::vector<double>& aggregate_student_heads(ServerState& server, std::span<const Upload> uploads);

/// Writes the server vector into the client's copies of the exchanged groups.
void distribute(const ServerState& server, ClientState& client);

struct RunSettings {
  RunMode mode = RunMode::Fgad;
  TrainSettings train;
  ModelDims dims;
  std::size_t rounds = 200;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;      // 0: evaluate after the last round only
  bool early_stop = false;
  double early_stop_delta = 1e-5;
  std::size_t early_stop_window = 10;
  ScoreSource score_source = ScoreSource::Teacher;
  std::size_t parallel_clients = 1;
};

struct RoundReport {
  std::size_t round_index = 0;
  std::vector<LossBreakdown> client_losses;
  double global_loss = 0.0;  // sum_c w_c * client mean total
  std::uint64_t transmitted = 0;
  double seconds = 0.0;      // wall clock, excluded from determinism checks
  std::optional<FederationEvaluation> evaluation;
};

struct FederationRun {
  std::vector<ClientState> clients;
  ServerState server;
  std::vector<std::vector<double>> pretrain_losses;  // per client, per epoch
  std::vector<RoundReport> rounds;                   // rounds run by this process
  std::vector<double> loss_history;                  // global loss of every completed round
  std::size_t completed_rounds = 0;
  FederationEvaluation final_evaluation;
  bool stopped_early = false;
};

/// Clients for a partition with the mode's initialisation: exchanged groups
/// start from one common server draw, the rest from per-client draws.
std::vector<ClientState> make_clients(const ClientPartition& partition, const RunSettings& settings);

/// Rejects settings a partition cannot support (mixed input dims under
/// aggregate_all, input dim mismatch, empty shards).
void check_compatibility(const ClientPartition& partition, const RunSettings& settings);

using RoundObserver = std::function<void(const RoundReport&)>;

/// Client initialisation and local pretraining.
FederationRun start_federation(const ClientPartition& partition, const RunSettings& settings);
/// Runs the remaining rounds up to settings.rounds and the final evaluation.
/// Also used to resume a run restored from a checkpoint.
void continue_federation(FederationRun& run, const RunSettings& settings, const RoundObserver& observer = {});

FederationRun run_federation(const ClientPartition& partition, const RunSettings& settings,
                             const RoundObserver& observer = {});

/// Re-points restored clients at the shards of a rebuilt partition.
void attach_partition(FederationRun& run, const ClientPartition& partition);

/// Evaluates every client's current model on its test split.
FederationEvaluation evaluate_clients(std::span<const ClientState> clients, ScoreSource source,
                                      std::size_t parallel_clients = 1);

struct CommunicationSummary {
  RunMode mode = RunMode::Fgad;
  std::size_t clients = 0;
  std::size_t rounds = 0;
  std::uint64_t per_round = 0;            // uploads + downloads per round
  std::uint64_t per_client_upload = 0;    // scalars one client sends per round
  std::uint64_t total = 0;
  std::uint64_t model_parameters = 0;     // one client's full model
  double ratio = 0.0;                     // per_client_upload / model_parameters
};

CommunicationSummary communication_report(const FederationRun& run, RunMode mode);
/// Closed-form per-client upload count of a mode for a given architecture.
std::uint64_t transmitted_per_client(const ModelDims& dims, RunMode mode);

}  // namespace fgad
