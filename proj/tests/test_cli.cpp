#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fgad/commands.hpp"

using namespace fgad;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kSmall{"--synthetic",       "--clients",         "3",  "--seed",
                                      "7",                 "--synthetic-normals", "20", "--synthetic-anomalies",
                                      "8",                 "--synthetic-nodes", "8",  "--degree-cap",
                                      "8",                 "--pretrain-epochs", "1",  "--layers",
                                      "2",                 "--hidden-dim",      "8",  "--latent-dim",
                                      "4",                 "--teacher-hidden",  "16,8", "--student-hidden",
                                      "8",                 "--batch-size",      "8"};

struct Result {
  int code;
  std::string out, err;
};

Result invoke(std::vector<std::string> args, const std::vector<std::string>& extra = {}) {
  args.insert(args.end(), extra.begin(), extra.end());
  std::ostringstream out, err;
  const int code = cli::main(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> with_small(std::vector<std::string> head, const std::vector<std::string>& tail = {}) {
  head.insert(head.end(), kSmall.begin(), kSmall.end());
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fgad_cli_" + name);
  fs::remove_all(p);
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::vector<json> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) out.push_back(json::parse(line));
  return out;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("run emits one record per round and a consolidated report") {
  const fs::path dir = scratch("run");
  const Result r = invoke(with_small({"run", "--rounds", "5", "--out", dir.string(), "--quiet"}));
  REQUIRE(r.code == cli::kExitOk);
  const auto rounds = read_lines(dir / "rounds.jsonl");
  REQUIRE(rounds.size() == 5);
  for (std::size_t i = 0; i < rounds.size(); ++i) {
    CHECK(rounds[i]["round"] == i);
    CHECK(rounds[i]["client_losses"].size() == 3);
    CHECK(rounds[i].contains("timing"));
  }
  const json rep = read_json(dir / "report.json");
  CHECK(rep["completed_rounds"] == 5);
  CHECK(rep["rounds"].size() == 5);
  CHECK(rep["config"]["seed"] == 7);
  CHECK(rep["config"]["rounds"] == 5);
  CHECK(rep.contains("seeds"));
  CHECK(rep["final"]["clients"].size() == 3);
  CHECK(rep["communication"]["per_client_upload"] == rounds[0]["transmitted_parameter_count"]);
  CHECK(fs::exists(dir / "checkpoint.fgad"));
  CHECK(r.out.find("aggregate") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("two runs with the same config and seed agree on every numeric field") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  REQUIRE(invoke(with_small({"run", "--rounds", "3", "--eval-every", "1", "--out", a.string(), "--quiet"})).code == 0);
  REQUIRE(invoke(with_small({"run", "--rounds", "3", "--eval-every", "1", "--out", b.string(), "--quiet"})).code == 0);
  CHECK(cli::strip_timing(read_json(a / "report.json")).dump() == cli::strip_timing(read_json(b / "report.json")).dump());
  const auto ra = read_lines(a / "rounds.jsonl"), rb = read_lines(b / "rounds.jsonl");
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) CHECK(cli::strip_timing(ra[i]).dump() == cli::strip_timing(rb[i]).dump());

  // the echoed config reproduces the run on its own
  const fs::path c = scratch("det_c");
  {
    std::ofstream cfg(fs::temp_directory_path() / "fgad_cli_echo.json");
    cfg << read_json(a / "report.json")["config"].dump();
  }
  REQUIRE(invoke({"run", "--config", (fs::temp_directory_path() / "fgad_cli_echo.json").string(), "--out", c.string(),
               "--quiet"})
              .code == 0);
  CHECK(cli::strip_timing(read_json(c / "report.json")).dump() == cli::strip_timing(read_json(a / "report.json")).dump());
  for (const auto& p : {a, b, c}) fs::remove_all(p);
  fs::remove(fs::temp_directory_path() / "fgad_cli_echo.json");
}

TEST_CASE("self_train transmits nothing") {
  const fs::path dir = scratch("self");
  REQUIRE(invoke(with_small({"run", "--rounds", "2", "--mode", "self_train", "--out", dir.string(), "--quiet"})).code == 0);
  const json rep = read_json(dir / "report.json");
  CHECK(rep["communication"]["total"] == 0);
  for (const json& r : rep["rounds"]) CHECK(r["transmitted_parameter_count"] == 0);
  fs::remove_all(dir);
}

TEST_CASE("eval reproduces the final metrics without touching the checkpoint") {
  const fs::path dir = scratch("eval"), ev = scratch("eval_out");
  REQUIRE(invoke(with_small({"run", "--rounds", "2", "--out", dir.string(), "--quiet"})).code == 0);
  const std::string before = file_bytes(dir / "checkpoint.fgad");
  const Result r = invoke({"eval", "--checkpoint", (dir / "checkpoint.fgad").string(), "--out", ev.string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(file_bytes(dir / "checkpoint.fgad") == before);
  CHECK(read_json(ev / "eval.json")["final"] == read_json(dir / "report.json")["final"]);

  const fs::path none = scratch("eval_none");
  const Result missing = invoke({"eval", "--checkpoint", (dir / "nope.fgad").string(), "--out", none.string()});
  CHECK(missing.code != 0);
  CHECK_FALSE(fs::exists(none));
  CHECK(missing.err.find("nope.fgad") != std::string::npos);
  for (const auto& p : {dir, ev}) fs::remove_all(p);
}

TEST_CASE("resume continues to the requested round count") {
  const fs::path a = scratch("resume_a"), b = scratch("resume_b"), full = scratch("resume_full");
  REQUIRE(invoke(with_small({"run", "--rounds", "2", "--out", a.string(), "--quiet"})).code == 0);
  REQUIRE(invoke({"run", "--resume", (a / "checkpoint.fgad").string(), "--rounds", "4", "--out", b.string(), "--quiet"})
              .code == 0);
  REQUIRE(invoke(with_small({"run", "--rounds", "4", "--out", full.string(), "--quiet"})).code == 0);
  const json rb = read_json(b / "report.json"), rf = read_json(full / "report.json");
  CHECK(rb["completed_rounds"] == 4);
  CHECK(rb["final"] == rf["final"]);
  CHECK(rb["communication"]["total"] == rf["communication"]["total"]);
  CHECK(rb["rounds"].size() == 2);
  CHECK(rb.contains("resumed_from"));
  CHECK(invoke({"run", "--resume", (a / "checkpoint.fgad").string(), "--lambda", "2"}).code == cli::kExitConfig);
  for (const auto& p : {a, b, full}) fs::remove_all(p);
}

TEST_CASE("ablate prints three modes over one partition") {
  const fs::path dir = scratch("ablate");
  const Result r = invoke(with_small({"ablate", "--rounds", "2", "--out", dir.string()}));
  REQUIRE(r.code == cli::kExitOk);
  std::istringstream lines(r.out);
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line))
    if (!line.empty()) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].rfind("self_train", 0) == 0);
  CHECK(rows[2].rfind("fgad", 0) == 0);
  CHECK(rows[3].rfind("aggregate_all", 0) == 0);

  const json rep = read_json(dir / "ablation.json");
  REQUIRE(rep["modes"].size() == 3);
  const std::string hash = rep["modes"][0]["partition_hash"];
  for (const json& m : rep["modes"]) CHECK(m["partition_hash"] == hash);
  const auto total = [&](std::size_t i) { return rep["modes"][i]["communication"]["total"].get<std::uint64_t>(); };
  CHECK(total(0) == 0);
  CHECK(total(0) < total(1));
  CHECK(total(1) < total(2));
  fs::remove_all(dir);
}

TEST_CASE("partition dry run") {
  const Result r = invoke(with_small({"partition"}));
  REQUIRE(r.code == cli::kExitOk);
  const json j = json::parse(r.out);
  CHECK(j["shards"].size() == 3);
  CHECK(j.contains("hash"));
  CHECK(j == json::parse(invoke(with_small({"partition"})).out));
}

TEST_CASE("configuration problems exit with code 2") {
  CHECK(invoke({"run", "--bogus"}).code == cli::kExitConfig);
  CHECK(invoke({}).code == cli::kExitConfig);
  const Result bad = invoke(with_small({"run", "--tau", "0", "--train-fraction", "2"}));
  CHECK(bad.code == cli::kExitConfig);
  CHECK(bad.err.find("tau") != std::string::npos);
  CHECK(bad.err.find("train_fraction") != std::string::npos);
  CHECK(invoke(with_small({"run", "--rounds", "abc"})).code == cli::kExitConfig);
  CHECK(invoke({"run", "--config", "/nonexistent/cfg.json"}).code == cli::kExitConfig);
  CHECK(invoke({"run", "--synthetic", "--dataset", "MUTAG"}).code == cli::kExitConfig);
  CHECK(invoke({"run", "--dataset", "MUTAG", "--clients", "3"}).code != cli::kExitOk);
}

TEST_CASE("boolean flags accept a bare switch or an explicit value") {
  for (const std::string& v : {"", "true", "1", "false", "0"}) {
    std::vector<std::string> args{"partition", "--early-stop"};
    if (!v.empty()) args.push_back(v);
    args = with_small(args);
    CAPTURE(v);
    CHECK(invoke(args).code == cli::kExitOk);
  }
  const fs::path dir = scratch("bool");
  REQUIRE(invoke(with_small({"run", "--rounds", "1", "--detach-teacher", "false", "--early-stop", "--out", dir.string(),
                          "--quiet"}))
              .code == 0);
  const json cfg = read_json(dir / "report.json")["config"];
  CHECK(cfg["detach_teacher"] == false);
  CHECK(cfg["early_stop"] == true);
  fs::remove_all(dir);
}

TEST_CASE("warnings for unusual loss weights go to stderr") {
  const Result r = invoke(with_small({"partition", "--lambda", "5000"}));
  CHECK(r.code == cli::kExitOk);
  CHECK(r.err.find("lambda") != std::string::npos);
}
