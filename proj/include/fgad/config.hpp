#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgad/federation.hpp"
#include "fgad/synthetic.hpp"
#include "fgad/tudataset.hpp"

namespace fgad {

/// Everything a run needs. Serialised as one flat JSON object whose keys are
/// the field names below; CLI flags are the same names in kebab case.
struct FederationConfig {
  // data
  std::string dataset_kind = "synthetic";  // "synthetic" | "tudataset"
  std::vector<std::string> dataset_names;  // one name: split over clients; several: one client each
  std::string data_dir;                    // empty: $FEDGAD_DATA_DIR
  std::size_t clients = 3;
  double train_fraction = 0.8;
  FeatureStrategy feature_strategy = FeatureStrategy::DegreeOneHot;
  std::size_t degree_cap = 64;
  std::size_t synthetic_normals = 100;
  std::size_t synthetic_anomalies = 40;
  std::size_t synthetic_nodes = 20;
  double synthetic_p_in = 0.4;
  double synthetic_p_out = 0.05;
  double synthetic_p_in_jitter = 0.1;

  // model
  std::size_t layers = 3;
  std::size_t hidden_dim = 64;
  std::size_t latent_dim = 64;
  std::vector<std::size_t> teacher_hidden{192, 128, 64};
  std::vector<std::size_t> student_hidden{128, 64};

  // training
  RunMode mode = RunMode::Fgad;
  double lambda = 1.0;
  double gamma = 1.0;
  double tau = 1.0;
  double lr = 0.001;
  std::size_t batch_size = 64;
  std::size_t pretrain_epochs = 10;
  std::size_t rounds = 200;
  std::size_t local_epochs = 1;
  std::uint64_t seed = 0;
  bool stop_generator_grad_in_detector = false;
  double prior_kl_weight = 0.0;
  ScoreSource score_source = ScoreSource::Teacher;
  bool unnormalized_generator_loss = false;
  bool detach_teacher = true;
  std::size_t eval_every = 0;
  bool early_stop = false;
  std::size_t parallel_clients = 0;  // 0: min(clients, cores)

  friend bool operator==(const FederationConfig&, const FederationConfig&) = default;
};

nlohmann::json to_json(const FederationConfig& cfg);
/// Unknown keys and ill-typed values are configuration errors naming the key.
FederationConfig config_from_json(const nlohmann::json& j);
FederationConfig load_config(const std::string& path);

/// Field-level checks; throws ConfigError listing every problem found.
void validate(const FederationConfig& cfg);
/// Accepted-but-unusual settings (lambda or gamma outside [1e-4, 1e3]).
std::vector<std::string> config_warnings(const FederationConfig& cfg);

RunSettings run_settings(const FederationConfig& cfg);
SyntheticSpec synthetic_spec(const FederationConfig& cfg);
/// Data root: the config's data_dir, else $FEDGAD_DATA_DIR, else "data".
std::string resolve_data_dir(const FederationConfig& cfg);

/// Builds the client partition the config describes.
ClientPartition build_partition(const FederationConfig& cfg);

}  // namespace fgad
