#include "fgad/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <omp.h>

#include "fgad/error.hpp"
#include "fgad/partition.hpp"

namespace fgad {

using nlohmann::json;

namespace {

// One entry per config field: how to write it and how to read it back.
struct Field {
  std::function<json(const FederationConfig&)> get;
  std::function<void(FederationConfig&, const json&)> set;
};

template <class T>
T as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': unexpected value " + v.dump());
  }
}

#define FGAD_FIELD(name)                                                                      \
  {                                                                                           \
    #name, Field {                                                                            \
      [](const FederationConfig& c) { return json(c.name); },                                 \
          [](FederationConfig& c, const json& v) { c.name = as<decltype(c.name)>(v, #name); } \
    }                                                                                         \
  }

template <class T>
std::vector<T> as_list(const json& v, const std::string& key) {
  if (!v.is_array()) throw ConfigError("config key '" + key + "': expected a list, got " + v.dump());
  std::vector<T> out;
  for (const json& e : v) out.push_back(as<T>(e, key));
  return out;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      FGAD_FIELD(dataset_kind),
      {"dataset_names",
       {[](const FederationConfig& c) { return json(c.dataset_names); },
        [](FederationConfig& c, const json& v) { c.dataset_names = as_list<std::string>(v, "dataset_names"); }}},
      FGAD_FIELD(data_dir),
      FGAD_FIELD(clients),
      FGAD_FIELD(train_fraction),
      {"feature_strategy",
       {[](const FederationConfig& c) { return json(std::string(to_string(c.feature_strategy))); },
        [](FederationConfig& c, const json& v) {
          try {
            c.feature_strategy = feature_strategy_from_string(as<std::string>(v, "feature_strategy"));
          } catch (const Error& e) {
            throw ConfigError(std::string("config key 'feature_strategy': ") + e.what());
          }
        }}},
      FGAD_FIELD(degree_cap),
      FGAD_FIELD(synthetic_normals),
      FGAD_FIELD(synthetic_anomalies),
      FGAD_FIELD(synthetic_nodes),
      FGAD_FIELD(synthetic_p_in),
      FGAD_FIELD(synthetic_p_out),
      FGAD_FIELD(synthetic_p_in_jitter),
      FGAD_FIELD(layers),
      FGAD_FIELD(hidden_dim),
      FGAD_FIELD(latent_dim),
      {"teacher_hidden",
       {[](const FederationConfig& c) { return json(c.teacher_hidden); },
        [](FederationConfig& c, const json& v) { c.teacher_hidden = as_list<std::size_t>(v, "teacher_hidden"); }}},
      {"student_hidden",
       {[](const FederationConfig& c) { return json(c.student_hidden); },
        [](FederationConfig& c, const json& v) { c.student_hidden = as_list<std::size_t>(v, "student_hidden"); }}},
      {"mode",
       {[](const FederationConfig& c) { return json(std::string(to_string(c.mode))); },
        [](FederationConfig& c, const json& v) { c.mode = run_mode_from_string(as<std::string>(v, "mode")); }}},
      FGAD_FIELD(lambda),
      FGAD_FIELD(gamma),
      FGAD_FIELD(tau),
      FGAD_FIELD(lr),
      FGAD_FIELD(batch_size),
      FGAD_FIELD(pretrain_epochs),
      FGAD_FIELD(rounds),
      FGAD_FIELD(local_epochs),
      FGAD_FIELD(seed),
      FGAD_FIELD(stop_generator_grad_in_detector),
      FGAD_FIELD(prior_kl_weight),
      {"score_source",
       {[](const FederationConfig& c) { return json(std::string(to_string(c.score_source))); },
        [](FederationConfig& c, const json& v) {
          try {
            c.score_source = score_source_from_string(as<std::string>(v, "score_source"));
          } catch (const ConfigError&) {
            throw;
          } catch (const Error& e) {
            throw ConfigError(std::string("config key 'score_source': ") + e.what());
          }
        }}},
      FGAD_FIELD(unnormalized_generator_loss),
      FGAD_FIELD(detach_teacher),
      FGAD_FIELD(eval_every),
      FGAD_FIELD(early_stop),
      FGAD_FIELD(parallel_clients),
  };
  return table;
}

#undef FGAD_FIELD

}  // namespace

json to_json(const FederationConfig& cfg) {
  json j = json::object();
  for (const auto& [key, f] : fields()) j[key] = f.get(cfg);
  return j;
}

FederationConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  FederationConfig cfg;
  std::vector<std::string> unknown;
  for (const auto& [key, value] : j.items()) {
    auto it = fields().find(key);
    if (it == fields().end()) {
      unknown.push_back(key);
      continue;
    }
    it->second.set(cfg, value);
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config key(s):";
    for (const auto& k : unknown) msg += " '" + k + "'";
    throw ConfigError(msg);
  }
  return cfg;
}

FederationConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void validate(const FederationConfig& c) {
  std::vector<std::string> errs;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok) errs.push_back(msg);
  };
  check(c.dataset_kind == "synthetic" || c.dataset_kind == "tudataset",
        "dataset_kind: expected 'synthetic' or 'tudataset', got '" + c.dataset_kind + "'");
  if (c.dataset_kind == "tudataset") check(!c.dataset_names.empty(), "dataset_names: at least one dataset required");
  check(c.clients >= 1, "clients: must be at least 1");
  if (c.dataset_kind == "tudataset" && c.dataset_names.size() == 1) {
    check(c.clients >= 2, "clients: a single-dataset federation needs at least 2 clients");
  }
  if (c.dataset_kind == "tudataset" && c.dataset_names.size() > 1) {
    check(c.clients == c.dataset_names.size(), "clients: a multi-dataset federation has one client per dataset (" +
                                                   std::to_string(c.dataset_names.size()) + ")");
  }
  check(c.train_fraction > 0.0 && c.train_fraction < 1.0, "train_fraction: must lie in (0, 1)");
  check(c.degree_cap >= 1, "degree_cap: must be at least 1");
  if (c.dataset_kind == "synthetic") {
    check(c.synthetic_normals >= 2, "synthetic_normals: must be at least 2");
    check(c.synthetic_anomalies >= 1, "synthetic_anomalies: must be at least 1");
    check(c.synthetic_nodes >= 4, "synthetic_nodes: must be at least 4");
    check(c.synthetic_p_in > 0.0 && c.synthetic_p_in < 1.0, "synthetic_p_in: must lie in (0, 1)");
    check(c.synthetic_p_out > 0.0 && c.synthetic_p_out < 1.0, "synthetic_p_out: must lie in (0, 1)");
    check(c.synthetic_p_in > c.synthetic_p_out, "synthetic_p_in: must exceed synthetic_p_out");
    check(c.synthetic_p_in_jitter >= 0.0 && c.synthetic_p_in_jitter < 1.0,
          "synthetic_p_in_jitter: must lie in [0, 1)");
  }
  check(c.layers >= 1, "layers: must be at least 1");
  check(c.hidden_dim >= 1, "hidden_dim: must be positive");
  check(c.latent_dim >= 1, "latent_dim: must be positive");
  check(std::none_of(c.teacher_hidden.begin(), c.teacher_hidden.end(), [](std::size_t w) { return w == 0; }),
        "teacher_hidden: widths must be positive");
  check(std::none_of(c.student_hidden.begin(), c.student_hidden.end(), [](std::size_t w) { return w == 0; }),
        "student_hidden: widths must be positive");
  check(c.teacher_hidden.size() == c.student_hidden.size() + 1,
        "teacher_hidden: must have exactly one more layer than student_hidden");
  check(c.lambda >= 0.0, "lambda: must be non-negative");
  check(c.gamma >= 0.0, "gamma: must be non-negative");
  check(c.tau > 0.0, "tau: must be positive");
  check(c.lr > 0.0, "lr: must be positive");
  check(c.batch_size >= 1, "batch_size: must be positive");
  check(c.local_epochs >= 1, "local_epochs: must be at least 1");
  check(c.prior_kl_weight >= 0.0, "prior_kl_weight: must be non-negative");
  if (!errs.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

std::vector<std::string> config_warnings(const FederationConfig& c) {
  std::vector<std::string> w;
  auto range = [&](double v, const char* name) {
    if (v != 0.0 && (v < 1e-4 || v > 1e3)) {
      std::ostringstream os;
      os << name << " = " << v << " lies outside the usual range [1e-4, 1e3]";
      w.push_back(os.str());
    }
  };
  range(c.lambda, "lambda");
  range(c.gamma, "gamma");
  return w;
}

RunSettings run_settings(const FederationConfig& c) {
  RunSettings s;
  s.mode = c.mode;
  s.rounds = c.rounds;
  s.seed = c.seed;
  s.eval_every = c.eval_every;
  s.early_stop = c.early_stop;
  s.score_source = c.score_source;
  s.dims.layers = c.layers;
  s.dims.hidden_dim = c.hidden_dim;
  s.dims.latent_dim = c.latent_dim;
  s.dims.teacher_hidden = c.teacher_hidden;
  s.dims.student_hidden = c.student_hidden;
  s.train.lambda = c.lambda;
  s.train.gamma = c.gamma;
  s.train.tau = c.tau;
  s.train.adam.lr = c.lr;
  s.train.batch_size = c.batch_size;
  s.train.pretrain_epochs = c.pretrain_epochs;
  s.train.local_epochs = c.local_epochs;
  s.train.stop_generator_grad = c.stop_generator_grad_in_detector;
  s.train.prior_kl_weight = c.prior_kl_weight;
  s.train.unnormalized_generator_loss = c.unnormalized_generator_loss;
  s.train.detach_teacher = c.detach_teacher;
  const std::size_t cores = static_cast<std::size_t>(std::max(1, omp_get_num_procs()));
  s.parallel_clients = c.parallel_clients > 0 ? c.parallel_clients : std::min(c.clients, cores);
  return s;
}

SyntheticSpec synthetic_spec(const FederationConfig& c) {
  SyntheticSpec s;
  s.clients = c.clients;
  s.normals_per_client = c.synthetic_normals;
  s.anomalies_per_client = c.synthetic_anomalies;
  s.nodes = c.synthetic_nodes;
  s.p_in = c.synthetic_p_in;
  s.p_out = c.synthetic_p_out;
  s.p_in_jitter = c.synthetic_p_in_jitter;
  s.train_fraction = c.train_fraction;
  s.degree_cap = c.degree_cap;
  return s;
}

std::string resolve_data_dir(const FederationConfig& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv("FEDGAD_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return "data";
}

ClientPartition build_partition(const FederationConfig& c) {
  validate(c);
  if (c.dataset_kind == "synthetic") {
    ClientPartition p = synthetic_benchmark(synthetic_spec(c), derive_seed(c.seed, Stream::Synthetic));
    if (c.feature_strategy != FeatureStrategy::DegreeOneHot) {
      for (ClientShard& s : p.shards) {
        for (auto* set : {&s.train, &s.test}) {
          GraphDataset ds;
          ds.graphs = std::move(*set);
          ds = synthesize_features(std::move(ds), FeatureSpec{c.feature_strategy, c.degree_cap});
          *set = std::move(ds.graphs);
        }
      }
    }
    return p;
  }
  LoadOptions opts;
  opts.fallback_features = FeatureSpec{c.feature_strategy, c.degree_cap};
  const std::string root = resolve_data_dir(c);
  const std::uint64_t split_seed = derive_seed(c.seed, Stream::Partition);
  if (c.dataset_names.size() == 1) {
    GraphDataset ds = load_tudataset(root, c.dataset_names.front(), opts);
    return partition_single_dataset(ds, c.clients, c.train_fraction, split_seed);
  }
  std::vector<GraphDataset> all;
  for (const auto& name : c.dataset_names) all.push_back(load_tudataset(root, name, opts));
  return partition_multi_dataset(all, c.train_fraction, split_seed);
}

}  // namespace fgad
