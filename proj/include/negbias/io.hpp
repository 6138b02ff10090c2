#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "json.hpp"
#include "negbias/cmle.hpp"
#include "negbias/core.hpp"

namespace negbias {

inline constexpr int kTraceSchemaVersion = 1;

nlohmann::json policy_to_json(const PolicyConfig& policy);
PolicyConfig policy_from_json(const nlohmann::json& j);

nlohmann::json arms_to_json(const std::vector<ArmModel>& arms);
std::vector<ArmModel> arms_from_json(const nlohmann::json& j);

/// Versioned trace document. Non-finite estimate entries are written as null.
nlohmann::json trace_to_json(const Trace& trace);
/// Throws MalformedTrace on schema or structural errors.
Trace trace_from_json(const nlohmann::json& j);

void save_trace(const Trace& trace, const std::filesystem::path& path);
Trace load_trace(const std::filesystem::path& path);

nlohmann::json cmle_config_to_json(const CmleConfig& config);
nlohmann::json cmle_result_to_json(const CmleResult& result);

/// One row per iterate: iteration, theta_1..theta_K.
void write_trajectory_csv(std::ostream& out, const CmleResult& result);

}  // namespace negbias
