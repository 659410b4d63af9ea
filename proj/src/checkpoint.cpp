#include "fgad/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "fgad/error.hpp"
#include "fgad/params.hpp"

namespace fgad {
namespace {

using namespace wire;

void write_sizes(std::ostream& out, const std::vector<std::size_t>& v) {
  write_u64(out, v.size());
  for (std::size_t x : v) write_u64(out, x);
}

std::vector<std::size_t> read_sizes(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > 4096) throw FormatError("implausible list length");
  std::vector<std::size_t> v(n);
  for (auto& x : v) x = read_u64(in);
  return v;
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  for (double x : v) write_f64(out, x);
}

std::vector<double> read_doubles(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (std::uint64_t{1} << 32)) throw FormatError("implausible vector length");
  std::vector<double> v(n);
  for (auto& x : v) x = read_f64(in);
  return v;
}

void write_u64s(std::ostream& out, const std::vector<std::uint64_t>& v) {
  write_u64(out, v.size());
  for (auto x : v) write_u64(out, x);
}

std::vector<std::uint64_t> read_u64s(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (std::uint64_t{1} << 32)) throw FormatError("implausible vector length");
  std::vector<std::uint64_t> v(n);
  for (auto& x : v) x = read_u64(in);
  return v;
}

void write_groups(std::ostream& out, const std::vector<Group>& groups) {
  write_u64(out, groups.size());
  for (Group g : groups) write_string(out, std::string(group_name(g)));
}

std::vector<Group> read_groups(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > kGroupCount) throw FormatError("too many parameter groups");
  std::vector<Group> g;
  for (std::uint64_t i = 0; i < n; ++i) g.push_back(group_from_name(read_string(in)));
  return g;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     const ClientPartition& partition, const FederationRun& run, RunMode mode) {
  std::ostringstream out(std::ios::binary);
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  write_string(out, config.dump());
  write_u64(out, partition.hash());
  write_string(out, std::string(to_string(mode)));

  write_u64(out, run.completed_rounds);
  write_u32(out, run.stopped_early ? 1 : 0);
  write_doubles(out, run.loss_history);

  write_groups(out, run.server.groups);
  write_doubles(out, run.server.aggregated);
  write_u64(out, run.server.round_index);
  write_u64s(out, run.server.ledger.uploaded);
  write_u64s(out, run.server.ledger.downloaded);

  write_u64(out, run.clients.size());
  for (std::size_t c = 0; c < run.clients.size(); ++c) {
    const ClientState& cs = run.clients[c];
    const ModelDims& d = cs.model.dims();
    write_u64(out, cs.id);
    write_u64(out, d.input_dim);
    write_u64(out, d.layers);
    write_u64(out, d.hidden_dim);
    write_u64(out, d.latent_dim);
    write_sizes(out, d.teacher_hidden);
    write_sizes(out, d.student_hidden);
    write_records(out, to_records(cs.model, kAllGroups, true));
    for (Group g : kAllGroups) write_u64(out, cs.model.adam(g).step);
    std::ostringstream rng;
    rng << cs.rng;
    write_string(out, rng.str());
    write_u32(out, cs.pretrained ? 1 : 0);
    write_doubles(out, c < run.pretrain_losses.size() ? run.pretrain_losses[c] : std::vector<double>{});
  }

  const std::string bytes = out.str();
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[sizeof kCheckpointMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw CheckpointError(path.string() + " is not a checkpoint file");
  }
  Checkpoint ck;
  try {
    const std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint " + path.string() + " has format version " + std::to_string(version) +
                            "; this build reads version " + std::to_string(kCheckpointVersion));
    }
    ck.config = nlohmann::json::parse(read_string(in));
    ck.partition_hash = read_u64(in);
    ck.mode = run_mode_from_string(read_string(in));

    FederationRun& run = ck.run;
    run.completed_rounds = read_u64(in);
    run.stopped_early = read_u32(in) != 0;
    run.loss_history = read_doubles(in);

    run.server.groups = read_groups(in);
    run.server.aggregated = read_doubles(in);
    run.server.round_index = read_u64(in);
    run.server.ledger.uploaded = read_u64s(in);
    run.server.ledger.downloaded = read_u64s(in);

    const std::uint64_t clients = read_u64(in);
    if (clients > 100000) throw FormatError("implausible client count");
    for (std::uint64_t c = 0; c < clients; ++c) {
      ClientState cs;
      cs.id = read_u64(in);
      ModelDims d;
      d.input_dim = read_u64(in);
      d.layers = read_u64(in);
      d.hidden_dim = read_u64(in);
      d.latent_dim = read_u64(in);
      d.teacher_hidden = read_sizes(in);
      d.student_hidden = read_sizes(in);
      cs.model = LocalModel(d);
      const auto records = read_records(in);
      apply_records(cs.model, records);
      for (Group g : kAllGroups) cs.model.adam(g).step = read_u64(in);
      std::istringstream rng(read_string(in));
      rng >> cs.rng;
      if (rng.fail()) throw FormatError("corrupt RNG state");
      cs.pretrained = read_u32(in) != 0;
      run.pretrain_losses.push_back(read_doubles(in));
      run.clients.push_back(std::move(cs));
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + " is unreadable: " + e.what());
  }
  return ck;
}

}  // namespace fgad
