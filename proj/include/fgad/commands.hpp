#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "fgad/config.hpp"
#include "fgad/federation.hpp"

namespace fgad::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;

/// Entry point behind the fedgad binary; args exclude the program name.
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Report pieces, shared with the tests.
nlohmann::json to_json(const LossBreakdown& b);
nlohmann::json to_json(const FederationEvaluation& e);
nlohmann::json to_json(const CommunicationSummary& s);
/// Per-round record; wall-clock time sits under "timing" only.
nlohmann::json to_json(const RoundReport& r);
nlohmann::json partition_summary(const ClientPartition& p);
/// Copy of a report with every "timing" member removed, recursively.
nlohmann::json strip_timing(nlohmann::json j);

}  // namespace fgad::cli
