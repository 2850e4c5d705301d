#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "rmpt/netsim.hpp"

namespace rmpt {

inline constexpr int kEnvSpecVersion = 1;

/// Parses and validates a JSON environment document. Throws SchemaError,
/// CapacityError, DanglingReferenceError or SpecInvariantError.
EnvironmentSpec load_env_spec(std::string_view document);
EnvironmentSpec load_env_spec_file(const std::filesystem::path& path);

/// Canonical document; load_env_spec(save_env_spec(s)) == s.
std::string save_env_spec(const EnvironmentSpec& spec);

}  // namespace rmpt
