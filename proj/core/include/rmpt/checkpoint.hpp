#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include "rmpt/capacities.hpp"
#include "rmpt/qnet.hpp"

namespace rmpt {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything needed to resume greedy evaluation: the networks plus the
/// identity of the configuration they were trained under.
struct Checkpoint {
  std::string agent;
  Capacities capacities;
  std::uint64_t config_hash = 0;
  QEnsemble nets;

  bool operator==(const Checkpoint&) const = default;
};

/// FNV-1a over the fields that fix the network layout.
std::uint64_t config_hash(std::string_view agent, const Capacities& caps, const NetShape& shape,
                          int rm_state_count);

/// Binary layout (little-endian): "RMPTQNET", u32 version, u64 config hash,
/// agent string, capacities, net shape, state map, then every online and
/// target network as raw f64 in column-major order. Round-trips bit-exactly.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rmpt
