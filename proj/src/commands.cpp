#include "fgad/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fgad/checkpoint.hpp"
#include "fgad/error.hpp"

namespace fgad::cli {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const LossBreakdown& b) {
  return json{{"l_g", b.l_g},       {"l_ad", b.l_ad},     {"l_kd", b.l_kd},  {"l_prior", b.l_prior},
              {"total", b.total},   {"lambda", b.lambda}, {"gamma", b.gamma}, {"tau", b.tau}};
}

namespace {

json summary_json(const MetricSummary& m) {
  return json{{"weighted", m.weighted}, {"min", m.min}, {"max", m.max}, {"std", m.stddev}};
}

}  // namespace

json to_json(const FederationEvaluation& e) {
  json clients = json::array();
  for (const ClientMetrics& c : e.clients) {
    json jc{{"client", c.client_id}, {"test_size", c.test_size}, {"flagged", c.flagged}};
    if (c.flagged) {
      jc["reason"] = c.reason;
    } else {
      jc["auc"] = c.auc;
      jc["auprc"] = c.auprc;
    }
    clients.push_back(std::move(jc));
  }
  return json{{"clients", clients},
              {"evaluated_clients", e.evaluated_clients},
              {"auc", summary_json(e.auc)},
              {"auprc", summary_json(e.auprc)}};
}

json to_json(const CommunicationSummary& s) {
  return json{{"mode", std::string(to_string(s.mode))},
              {"clients", s.clients},
              {"rounds", s.rounds},
              {"per_client_upload", s.per_client_upload},
              {"per_round", s.per_round},
              {"total", s.total},
              {"model_parameters", s.model_parameters},
              {"ratio", s.ratio}};
}

json to_json(const RoundReport& r) {
  json losses = json::array();
  for (const LossBreakdown& b : r.client_losses) losses.push_back(to_json(b));
  json j{{"round", r.round_index},
         {"global_loss", r.global_loss},
         {"client_losses", losses},
         {"transmitted_parameter_count", r.transmitted},
         {"timing", {{"seconds", r.seconds}}}};
  if (r.evaluation) j["evaluation"] = to_json(*r.evaluation);
  return j;
}

json partition_summary(const ClientPartition& p) {
  json shards = json::array();
  const std::vector<double> w = p.shard_weights();
  for (std::size_t c = 0; c < p.client_count(); ++c) {
    const ClientShard& s = p.shards[c];
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(s.hash()));
    shards.push_back(json{{"client", c},
                          {"source", s.source},
                          {"train", s.train.size()},
                          {"test", s.test.size()},
                          {"test_normals", s.test_normals},
                          {"test_anomalies", s.test_anomalies},
                          {"anomalies_requested", s.anomalies_requested},
                          {"anomalies_available", s.anomalies_available},
                          {"feature_dim", s.feature_dim()},
                          {"weight", w[c]},
                          {"hash", hash}});
  }
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(p.hash()));
  return json{{"clients", p.client_count()}, {"hash", hash}, {"shards", shards}};
}

json strip_timing(json j) {
  if (j.is_object()) {
    j.erase("timing");
    for (auto& [k, v] : j.items()) v = strip_timing(std::move(v));
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(std::move(v));
  }
  return j;
}

namespace {

std::string kebab(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

std::vector<std::string> split_commas(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const std::string& r : raw) {
    std::stringstream ss(r);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Converts flag text to the JSON type of the field's default value.
json flag_value(const std::string& flag, const json& like, const std::vector<std::string>& raw) {
  try {
    if (like.is_array()) {
      json arr = json::array();
      for (const std::string& item : split_commas(raw)) {
        if (flag == "--dataset-names") {
          arr.push_back(item);
        } else {
          std::size_t pos = 0;
          const unsigned long long v = std::stoull(item, &pos);
          if (pos != item.size() || item.front() == '-') throw std::invalid_argument(item);
          arr.push_back(v);
        }
      }
      return arr;
    }
    const std::string v = raw.empty() ? std::string() : raw.back();
    if (like.is_boolean()) {
      if (v.empty() || v == "true" || v == "1") return true;
      if (v == "false" || v == "0") return false;
      throw std::invalid_argument(v);
    }
    if (like.is_number_unsigned() || like.is_number_integer()) {
      std::size_t pos = 0;
      const unsigned long long n = std::stoull(v, &pos);
      if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
      return n;
    }
    if (like.is_number_float()) {
      std::size_t pos = 0;
      const double d = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return d;
    }
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    std::string joined;
    for (const auto& r : raw) joined += (joined.empty() ? "" : " ") + r;
    throw ConfigError(flag + ": invalid value '" + joined + "'");
  }
}

const std::map<std::string, std::string>& field_help() {
  static const std::map<std::string, std::string> help{
      {"dataset_kind", "synthetic | tudataset"},
      {"dataset_names", "TUDataset names; one is split over clients, several give one client each"},
      {"data_dir", "dataset root (else $FEDGAD_DATA_DIR, else ./data)"},
      {"clients", "number of clients"},
      {"train_fraction", "share of normal graphs used for training"},
      {"feature_strategy", "features for attribute-free graphs: degree_onehot | constant_one"},
      {"degree_cap", "degree one-hot cap"},
      {"synthetic_normals", "synthetic normal graphs per client"},
      {"synthetic_anomalies", "synthetic anomalous graphs per client"},
      {"synthetic_nodes", "nodes per synthetic graph"},
      {"synthetic_p_in", "intra-community edge probability of normal graphs"},
      {"synthetic_p_out", "inter-community edge probability of normal graphs"},
      {"synthetic_p_in_jitter", "relative per-client jitter on p_in"},
      {"layers", "GIN layers"},
      {"hidden_dim", "GIN hidden width"},
      {"latent_dim", "generator latent width"},
      {"teacher_hidden", "teacher head hidden widths"},
      {"student_hidden", "student head hidden widths"},
      {"mode", "fgad | aggregate_all | self_train"},
      {"lambda", "generator loss weight"},
      {"gamma", "distillation loss weight"},
      {"tau", "distillation temperature"},
      {"lr", "Adam learning rate"},
      {"batch_size", "graphs per batch"},
      {"pretrain_epochs", "local pretraining epochs"},
      {"rounds", "communication rounds"},
      {"local_epochs", "local epochs per round"},
      {"seed", "root seed"},
      {"stop_generator_grad_in_detector", "detach the generated adjacency before the detector"},
      {"prior_kl_weight", "weight of the latent prior KL term (0 disables it)"},
      {"score_source", "head used for anomaly scores: teacher | student"},
      {"unnormalized_generator_loss", "sum the reconstruction loss instead of averaging it"},
      {"detach_teacher", "treat teacher logits as constants in distillation"},
      {"eval_every", "evaluate every N rounds (0: last round only)"},
      {"early_stop", "stop once the global loss plateaus"},
      {"parallel_clients", "concurrent client loops (0: min(clients, cores))"},
  };
  return help;
}

// Config flags shared by run, ablate and partition.
struct ConfigFlags {
  std::string config_path;
  bool synthetic = false;
  std::vector<std::string> datasets;
  std::map<std::string, CLI::Option*> options;  // config key -> option

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config file; flags override its values");
    app.add_flag("--synthetic", synthetic, "use the synthetic benchmark (dataset_kind = synthetic)");
    app.add_option("--dataset", datasets, "TUDataset name, repeatable (dataset_kind = tudataset)");
    const json defaults = to_json(FederationConfig{});
    for (const auto& [key, value] : defaults.items()) {
      const auto h = field_help().find(key);
      std::string desc = h == field_help().end() ? key : h->second;
      desc += " [default: " + value.dump() + "]";
      CLI::Option* opt = app.add_option("--" + kebab(key))->description(desc);
      if (value.is_boolean()) {
        opt->expected(0, 1);
      } else if (value.is_array()) {
        opt->expected(1, -1);
      }
      options[key] = opt;
    }
  }

  FederationConfig resolve() const {
    json j = config_path.empty() ? to_json(FederationConfig{}) : to_json(load_config(config_path));
    const json defaults = to_json(FederationConfig{});
    if (synthetic) j["dataset_kind"] = "synthetic";
    if (!datasets.empty()) {
      j["dataset_kind"] = "tudataset";
      j["dataset_names"] = split_commas(datasets);
    }
    for (const auto& [key, opt] : options) {
      if (opt->count() == 0) continue;
      j[key] = flag_value("--" + kebab(key), defaults[key], opt->results());
    }
    if (synthetic && !datasets.empty()) throw ConfigError("--synthetic and --dataset are mutually exclusive");
    FederationConfig cfg = config_from_json(j);
    validate(cfg);
    return cfg;
  }
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << content;
  if (!f) throw IoError("short write to " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
}

json seeds_json(const FederationConfig& cfg) {
  json clients = json::array();
  for (std::size_t c = 0; c < cfg.clients; ++c) {
    clients.push_back(json{{"init", derive_seed(cfg.seed, Stream::Init, {c})},
                           {"train", derive_seed(cfg.seed, Stream::Train, {c})}});
  }
  return json{{"root", cfg.seed},
              {"synthetic", derive_seed(cfg.seed, Stream::Synthetic)},
              {"partition", derive_seed(cfg.seed, Stream::Partition)},
              {"server_init", derive_seed(cfg.seed, Stream::ServerInit)},
              {"clients", clients}};
}

void print_warnings(const FederationConfig& cfg, std::ostream& err) {
  for (const std::string& w : config_warnings(cfg)) err << "warning: " << w << '\n';
}

void print_evaluation(const FederationEvaluation& e, std::ostream& out) {
  char line[160];
  for (const ClientMetrics& c : e.clients) {
    if (c.flagged) {
      std::snprintf(line, sizeof line, "client %zu  flagged: %s\n", c.client_id, c.reason.c_str());
    } else {
      std::snprintf(line, sizeof line, "client %zu  test=%zu  AUC=%.4f  AUPRC=%.4f\n", c.client_id, c.test_size,
                    c.auc, c.auprc);
    }
    out << line;
  }
  std::snprintf(line, sizeof line, "aggregate  AUC=%.4f (min %.4f max %.4f std %.4f)  AUPRC=%.4f\n", e.auc.weighted,
                e.auc.min, e.auc.max, e.auc.stddev, e.auprc.weighted);
  out << line;
}

int cmd_run(const ConfigFlags& flags, const std::string& out_dir, const std::string& resume, bool quiet,
            std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  FederationConfig cfg;
  std::unique_ptr<Checkpoint> ck;
  if (!resume.empty()) {
    ck = std::make_unique<Checkpoint>(load_checkpoint(resume));
    cfg = config_from_json(ck->config);
    // Flags may extend the round budget of a resumed run, nothing else.
    std::vector<std::string> ignored;
    if (!flags.config_path.empty()) ignored.push_back("--config");
    if (flags.synthetic) ignored.push_back("--synthetic");
    if (!flags.datasets.empty()) ignored.push_back("--dataset");
    for (const auto& [key, opt] : flags.options)
      if (key != "rounds" && opt->count() > 0) ignored.push_back("--" + kebab(key));
    if (!ignored.empty()) {
      std::string list;
      for (const auto& f : ignored) list += (list.empty() ? "" : ", ") + f;
      throw ConfigError("--resume takes its configuration from the checkpoint; only --rounds may change (got " +
                        list + ")");
    }
    if (auto it = flags.options.find("rounds"); it != flags.options.end() && it->second->count() > 0) {
      cfg.rounds = flag_value("--rounds", json(std::size_t{0}), it->second->results()).get<std::size_t>();
    }
    validate(cfg);
  } else {
    cfg = flags.resolve();
  }
  print_warnings(cfg, err);
  const RunSettings settings = run_settings(cfg);
  const ClientPartition partition = build_partition(cfg);

  std::ofstream rounds_file;
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    rounds_file.open(fs::path(out_dir) / "rounds.jsonl", std::ios::trunc);
    if (!rounds_file) throw IoError("cannot write " + (fs::path(out_dir) / "rounds.jsonl").string());
  }
  json rounds = json::array();
  auto observer = [&](const RoundReport& r) {
    json j = to_json(r);
    if (rounds_file) rounds_file << j.dump() << '\n' << std::flush;
    rounds.push_back(j);
    if (!quiet) {
      char line[160];
      std::snprintf(line, sizeof line, "round %zu  loss %.6f%s\n", r.round_index + 1, r.global_loss,
                    r.evaluation ? ("  AUC " + std::to_string(r.evaluation->auc.weighted)).c_str() : "");
      err << line;
    }
  };

  FederationRun run;
  if (ck) {
    if (ck->partition_hash != partition.hash()) {
      throw CheckpointError("checkpoint " + resume + " was written for a different partition");
    }
    run = std::move(ck->run);
    attach_partition(run, partition);
    continue_federation(run, settings, observer);
  } else {
    run = start_federation(partition, settings);
    continue_federation(run, settings, observer);
  }

  const CommunicationSummary comm = communication_report(run, cfg.mode);
  json report{{"config", to_json(cfg)},
              {"seeds", seeds_json(cfg)},
              {"partition", partition_summary(partition)},
              {"pretrain_losses", run.pretrain_losses},
              {"rounds", rounds},
              {"completed_rounds", run.completed_rounds},
              {"stopped_early", run.stopped_early},
              {"final", to_json(run.final_evaluation)},
              {"communication", to_json(comm)}};
  if (ck) report["resumed_from"] = resume;
  report["timing"] = {{"total_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};

  if (!out_dir.empty()) {
    write_file(fs::path(out_dir) / "report.json", report.dump(2) + "\n");
    save_checkpoint(fs::path(out_dir) / "checkpoint.fgad", to_json(cfg), partition, run, cfg.mode);
  }
  print_evaluation(run.final_evaluation, out);
  char line[128];
  std::snprintf(line, sizeof line, "transmitted scalars: %llu total (%llu per client per round)\n",
                static_cast<unsigned long long>(comm.total), static_cast<unsigned long long>(comm.per_client_upload));
  out << line;
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir, const std::string& out_dir,
             std::ostream& out) {
  Checkpoint ck = load_checkpoint(checkpoint);
  FederationConfig cfg = config_from_json(ck.config);
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  const ClientPartition partition = build_partition(cfg);
  if (partition.hash() != ck.partition_hash) {
    throw CheckpointError("rebuilt partition does not match the one recorded in " + checkpoint);
  }
  attach_partition(ck.run, partition);
  const RunSettings settings = run_settings(cfg);
  const FederationEvaluation ev = evaluate_clients(ck.run.clients, cfg.score_source, settings.parallel_clients);
  json report{{"checkpoint", checkpoint},
              {"completed_rounds", ck.run.completed_rounds},
              {"mode", std::string(to_string(ck.mode))},
              {"final", to_json(ev)}};
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_file(fs::path(out_dir) / "eval.json", report.dump(2) + "\n");
  }
  print_evaluation(ev, out);
  return kExitOk;
}

int cmd_ablate(const ConfigFlags& flags, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const FederationConfig base = flags.resolve();
  print_warnings(base, err);
  const ClientPartition partition = build_partition(base);
  json rows = json::array();
  char line[200];
  std::snprintf(line, sizeof line, "%-14s %8s %8s %14s %12s %8s  %s\n", "mode", "AUC", "AUPRC", "transmitted",
                "per_client", "ratio", "partition");
  out << line;
  for (RunMode mode : {RunMode::SelfTrain, RunMode::Fgad, RunMode::AggregateAll}) {
    FederationConfig cfg = base;
    cfg.mode = mode;
    RunSettings settings = run_settings(cfg);
    FederationRun run = run_federation(partition, settings);
    const CommunicationSummary comm = communication_report(run, mode);
    const std::string hash = partition_summary(partition)["hash"];
    rows.push_back(json{{"mode", std::string(to_string(mode))},
                        {"final", to_json(run.final_evaluation)},
                        {"communication", to_json(comm)},
                        {"partition_hash", hash}});
    std::snprintf(line, sizeof line, "%-14s %8.4f %8.4f %14llu %12llu %8.4f  %s\n", std::string(to_string(mode)).c_str(),
                  run.final_evaluation.auc.weighted, run.final_evaluation.auprc.weighted,
                  static_cast<unsigned long long>(comm.total), static_cast<unsigned long long>(comm.per_client_upload),
                  comm.ratio, hash.c_str());
    out << line;
  }
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    json report{{"config", to_json(base)}, {"partition", partition_summary(partition)}, {"modes", rows}};
    write_file(fs::path(out_dir) / "ablation.json", report.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_partition(const ConfigFlags& flags, std::ostream& out, std::ostream& err) {
  const FederationConfig cfg = flags.resolve();
  print_warnings(cfg, err);
  out << partition_summary(build_partition(cfg)).dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated graph anomaly detection", "fedgad"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "train a federation and write a report");
  ConfigFlags run_flags;
  run_flags.attach(*run);
  std::string run_out, resume;
  bool quiet = false;
  run->add_option("--out", run_out, "directory for rounds.jsonl, report.json and checkpoint.fgad");
  run->add_option("--resume", resume, "continue from a checkpoint (config is taken from it)");
  run->add_flag("--quiet", quiet, "no per-round progress on stderr");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint without training");
  std::string ckpt, eval_data, eval_out;
  eval->add_option("--checkpoint", ckpt, "checkpoint written by run")->required();
  eval->add_option("--data-dir", eval_data, "dataset root override");
  eval->add_option("--out", eval_out, "directory for eval.json");

  CLI::App* ablate = app.add_subcommand("ablate", "run self_train, fgad and aggregate_all on one partition");
  ConfigFlags ablate_flags;
  ablate_flags.attach(*ablate);
  std::string ablate_out;
  ablate->add_option("--out", ablate_out, "directory for ablation.json");

  CLI::App* part = app.add_subcommand("partition", "print the client shards a config produces");
  ConfigFlags part_flags;
  part_flags.attach(*part);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_flags, run_out, resume, quiet, out, err);
    if (*eval) return cmd_eval(ckpt, eval_data, eval_out, out);
    if (*ablate) return cmd_ablate(ablate_flags, ablate_out, out, err);
    if (*part) return cmd_partition(part_flags, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace fgad::cli
