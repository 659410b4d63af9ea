#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "fgad/federation.hpp"

// Binary snapshot of a whole federation: resolved config, server vector and
// ledger, and per client the parameters, Adam moments and RNG state. Shard
// contents are not stored; they are rebuilt from the config and checked
// against the recorded partition hash.
namespace fgad {

inline constexpr char kCheckpointMagic[8] = {'F', 'G', 'A', 'D', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json config;
  std::uint64_t partition_hash = 0;
  RunMode mode = RunMode::Fgad;
  FederationRun run;  // clients carry no shard pointers until attach_partition
};

/// Written to a sibling temporary and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& config,
                     const ClientPartition& partition, const FederationRun& run, RunMode mode);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fgad
