#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "rmpt/netsim.hpp"
#include "rmpt/reward_machine.hpp"
#include "rmpt/trainer.hpp"

namespace rmpt::cli {

/// Bad input from the user: maps to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One experiment run. Unset overrides fall back to TrainConfig defaults.
struct RunManifest {
  AgentKind agent = AgentKind::DqrmRm2;
  std::string env_id = "chain-1";  // chain-N, toyctf, or a document path
  std::string rm_id;               // rm1, rm2, or a document path; empty = agent default
  bool allow_rm_mismatch = false;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/out";
  nlohmann::json overrides = nlohmann::json::object();

  std::string effective_rm_id() const;
  /// TrainConfig defaults with `overrides` and `seed` applied.
  TrainConfig config() const;
  nlohmann::json to_json() const;

  /// Throws UsageError naming the offending field.
  static RunManifest from_json(const nlohmann::json& doc);
  static RunManifest load(const std::filesystem::path& path);
};

/// Applies a single override; `key` uses the TrainConfig field names.
void apply_override(TrainConfig& config, std::string_view key, const nlohmann::json& value);
nlohmann::json config_to_json(const TrainConfig& config);

/// Environment and reward machine named by a manifest. Errors surface as
/// UsageError mentioning the field.
EnvironmentSpec resolve_env(std::string_view env_id);
RewardMachine resolve_rm(std::string_view rm_id);

/// Checks that the agent's reward machine matches the RM id.
void check_agent_rm(const RunManifest& manifest);

}  // namespace rmpt::cli
