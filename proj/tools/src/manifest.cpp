#include "rmpt/cli/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rmpt/env_io.hpp"

namespace rmpt::cli {
namespace {

using nlohmann::json;

template <typename T>
T integer_field(std::string_view key, const json& value, T min_value) {
  if (!value.is_number_integer()) {
    throw UsageError("override '" + std::string(key) + "' must be an integer");
  }
  const auto v = value.get<long long>();
  if (v < static_cast<long long>(min_value)) {
    throw UsageError("override '" + std::string(key) + "' is out of range");
  }
  return static_cast<T>(v);
}

double real_field(std::string_view key, const json& value) {
  if (!value.is_number()) throw UsageError("override '" + std::string(key) + "' must be a number");
  return value.get<double>();
}

std::string read_text(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(std::string("cannot read ") + what + " '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void apply_override(TrainConfig& c, std::string_view key, const json& value) {
  if (key == "max_steps") {
    c.max_steps = integer_field<int>(key, value, 1);
  } else if (key == "episodes") {
    c.episodes = integer_field<int>(key, value, 1);
  } else if (key == "eval_episodes") {
    c.eval_episodes = integer_field<int>(key, value, 1);
  } else if (key == "gamma") {
    c.gamma = real_field(key, value);
  } else if (key == "learning_rate") {
    c.learning_rate = real_field(key, value);
  } else if (key == "sync_interval") {
    c.sync_interval = integer_field<int>(key, value, 1);
  } else if (key == "batch_size") {
    c.batch_size = integer_field<int>(key, value, 1);
  } else if (key == "hidden_layers") {
    c.hidden_layers = integer_field<int>(key, value, 1);
  } else if (key == "hidden_size") {
    c.hidden_size = integer_field<int>(key, value, 1);
  } else if (key == "epsilon") {
    c.epsilon = real_field(key, value);
  } else if (key == "buffer_capacity") {
    c.buffer_capacity = integer_field<std::size_t>(key, value, 1);
  } else if (key == "optimizer") {
    const auto kind = value.is_string() ? parse_optimizer_kind(value.get<std::string>())
                                        : std::nullopt;
    if (!kind) throw UsageError("override 'optimizer' must be \"sgd\" or \"adam\"");
    c.optimizer = *kind;
  } else {
    throw UsageError("unknown override '" + std::string(key) + "'");
  }
}

json config_to_json(const TrainConfig& c) {
  return json{{"max_steps", c.max_steps},
              {"episodes", c.episodes},
              {"eval_episodes", c.eval_episodes},
              {"gamma", c.gamma},
              {"learning_rate", c.learning_rate},
              {"sync_interval", c.sync_interval},
              {"batch_size", c.batch_size},
              {"hidden_layers", c.hidden_layers},
              {"hidden_size", c.hidden_size},
              {"epsilon", c.epsilon},
              {"buffer_capacity", c.buffer_capacity},
              {"optimizer", std::string(to_string(c.optimizer))},
              {"seed", c.seed}};
}

std::string RunManifest::effective_rm_id() const {
  return rm_id.empty() ? std::string(default_rm_id(agent)) : rm_id;
}

TrainConfig RunManifest::config() const {
  TrainConfig c;
  for (const auto& [key, value] : overrides.items()) apply_override(c, key, value);
  c.seed = seed;
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

json RunManifest::to_json() const {
  return json{{"agent", std::string(to_string(agent))},
              {"env", env_id},
              {"rm", effective_rm_id()},
              {"allow_rm_mismatch", allow_rm_mismatch},
              {"seed", seed},
              {"output_dir", output_dir.generic_string()},
              {"overrides", overrides}};
}

RunManifest RunManifest::from_json(const json& doc) {
  if (!doc.is_object()) throw UsageError("manifest must be a JSON object");
  RunManifest m;
  for (const auto& [key, value] : doc.items()) {
    if (key == "agent") {
      const auto kind = value.is_string() ? parse_agent_kind(value.get<std::string>())
                                          : std::nullopt;
      if (!kind) throw UsageError("manifest field 'agent' is not a known agent kind");
      m.agent = *kind;
    } else if (key == "env") {
      if (!value.is_string()) throw UsageError("manifest field 'env' must be a string");
      m.env_id = value.get<std::string>();
    } else if (key == "rm") {
      if (!value.is_string()) throw UsageError("manifest field 'rm' must be a string");
      m.rm_id = value.get<std::string>();
    } else if (key == "allow_rm_mismatch") {
      if (!value.is_boolean()) throw UsageError("manifest field 'allow_rm_mismatch' must be a bool");
      m.allow_rm_mismatch = value.get<bool>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) {
        throw UsageError("manifest field 'seed' must be a non-negative integer");
      }
      m.seed = value.get<std::uint64_t>();
    } else if (key == "output_dir") {
      if (!value.is_string()) throw UsageError("manifest field 'output_dir' must be a string");
      m.output_dir = value.get<std::string>();
    } else if (key == "overrides") {
      if (!value.is_object()) throw UsageError("manifest field 'overrides' must be an object");
      TrainConfig probe;
      for (const auto& [k, v] : value.items()) apply_override(probe, k, v);
      m.overrides = value;
    } else {
      throw UsageError("unknown manifest field '" + key + "'");
    }
  }
  return m;
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  const std::string text = read_text(path, "manifest");
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

EnvironmentSpec resolve_env(std::string_view id) {
  try {
    if (id == "toyctf") return build_toyctf_env();
    if (id.starts_with("chain-")) {
      const std::string_view digits = id.substr(6);
      int n = 0;
      const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
      if (ec != std::errc() || end != digits.data() + digits.size() || n < 1) {
        throw UsageError("field 'env': bad chain size in '" + std::string(id) + "'");
      }
      return build_chain_env(n);
    }
    const std::filesystem::path path(id);
    if (!std::filesystem::is_regular_file(path)) {
      throw UsageError("field 'env': unknown environment id '" + std::string(id) + "'");
    }
    return load_env_spec(read_text(path, "environment"));
  } catch (const EnvSpecError& e) {
    throw UsageError("field 'env': " + std::string(e.what()));
  }
}

RewardMachine resolve_rm(std::string_view id) {
  if (id == "rm1") return build_rm1();
  if (id == "rm2") return build_rm2();
  const std::filesystem::path path(id);
  if (!std::filesystem::is_regular_file(path)) {
    throw UsageError("field 'rm': unknown reward machine id '" + std::string(id) + "'");
  }
  try {
    return load_rm_document(read_text(path, "reward machine"));
  } catch (const RewardMachineError& e) {
    throw UsageError("field 'rm': " + std::string(e.what()));
  }
}

void check_agent_rm(const RunManifest& m) {
  const std::string rm = m.effective_rm_id();
  if ((rm == "rm1" || rm == "rm2") && rm != default_rm_id(m.agent) && !m.allow_rm_mismatch) {
    throw UsageError("field 'rm': agent " + std::string(to_string(m.agent)) + " expects " +
                     std::string(default_rm_id(m.agent)) + ", got " + rm);
  }
}

}  // namespace rmpt::cli
