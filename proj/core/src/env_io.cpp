#include "rmpt/env_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rmpt {
namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(where + ": missing field '" + key + "'");
  return *it;
}

int as_int(const json& value, const std::string& where) {
  if (!value.is_number_integer()) throw SchemaError(where + ": expected an integer");
  return value.get<int>();
}

bool as_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_boolean()) throw SchemaError(where + "." + key + ": expected a boolean");
  return it->get<bool>();
}

const json& as_array(const json& value, const std::string& where) {
  if (!value.is_array()) throw SchemaError(where + ": expected an array");
  return value;
}

CredentialRef parse_credential_ref(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected a credential object");
  return {as_int(require(j, "node_id", where), where + ".node_id"),
          as_int(require(j, "port_id", where), where + ".port_id"),
          as_int(require(j, "cred_id", where), where + ".cred_id")};
}

VulnerabilitySpec parse_vuln(const json& j, VulnKind kind, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  VulnerabilitySpec v;
  v.kind = kind;
  v.vuln_id = as_int(require(j, "vuln_id", where), where + ".vuln_id");
  v.required_connected = as_bool(j, "required_connected", true, where);
  v.repeatable = as_bool(j, "repeatable", false, where);
  const json& tag = require(j, "outcome", where);
  if (!tag.is_string()) throw SchemaError(where + ".outcome: expected a string tag");
  const auto name = tag.get<std::string>();
  if (name == "credential_leak") {
    CredentialLeak leak;
    const json& payload = as_array(require(j, "payload", where), where + ".payload");
    for (std::size_t i = 0; i < payload.size(); ++i) {
      leak.credentials.push_back(
          parse_credential_ref(payload[i], where + ".payload[" + std::to_string(i) + "]"));
    }
    v.outcome = std::move(leak);
  } else if (name == "node_discovery") {
    NodeDiscovery disc;
    const json& payload = as_array(require(j, "payload", where), where + ".payload");
    for (const auto& id : payload) disc.nodes.push_back(as_int(id, where + ".payload"));
    v.outcome = std::move(disc);
  } else if (name == "privilege_escalation") {
    v.outcome = PrivilegeEscalation{};
  } else {
    throw SchemaError(where + ".outcome: unknown tag '" + name + "'");
  }
  return v;
}

NodeSpec parse_node(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  NodeSpec node;
  node.node_id = as_int(require(j, "node_id", where), where + ".node_id");
  if (auto it = j.find("name"); it != j.end()) {
    if (!it->is_string()) throw SchemaError(where + ".name: expected a string");
    node.name = it->get<std::string>();
  }
  for (const auto& bit : as_array(require(j, "properties", where), where + ".properties")) {
    const int b = as_int(bit, where + ".properties");
    if (b != 0 && b != 1) throw SchemaError(where + ".properties: entries must be 0 or 1");
    node.properties.push_back(static_cast<std::uint8_t>(b));
  }
  for (const auto& port : as_array(require(j, "ports", where), where + ".ports")) {
    node.listening_ports.insert(as_int(port, where + ".ports"));
  }
  const std::string creds_where = where + ".accepted_credentials";
  for (const auto& pair : as_array(require(j, "accepted_credentials", where), creds_where)) {
    if (!pair.is_array() || pair.size() != 2) {
      throw SchemaError(creds_where + ": entries must be [port, cred] pairs");
    }
    node.accepted_credentials.emplace(as_int(pair[0], creds_where), as_int(pair[1], creds_where));
  }
  const json& locals = as_array(require(j, "local_vulns", where), where + ".local_vulns");
  for (std::size_t i = 0; i < locals.size(); ++i) {
    node.local_vulns.push_back(
        parse_vuln(locals[i], VulnKind::Local, where + ".local_vulns[" + std::to_string(i) + "]"));
  }
  const json& remotes = as_array(require(j, "remote_vulns", where), where + ".remote_vulns");
  for (std::size_t i = 0; i < remotes.size(); ++i) {
    node.remote_vulns.push_back(parse_vuln(remotes[i], VulnKind::Remote,
                                           where + ".remote_vulns[" + std::to_string(i) + "]"));
  }
  node.is_flag = as_bool(j, "is_flag", false, where);
  return node;
}

json dump_vuln(const VulnerabilitySpec& v) {
  json out = {{"vuln_id", v.vuln_id},
              {"required_connected", v.required_connected},
              {"repeatable", v.repeatable}};
  if (const auto* leak = std::get_if<CredentialLeak>(&v.outcome)) {
    out["outcome"] = "credential_leak";
    json payload = json::array();
    for (const auto& ref : leak->credentials) {
      payload.push_back({{"node_id", ref.node_id}, {"port_id", ref.port_id}, {"cred_id", ref.cred_id}});
    }
    out["payload"] = std::move(payload);
  } else if (const auto* disc = std::get_if<NodeDiscovery>(&v.outcome)) {
    out["outcome"] = "node_discovery";
    out["payload"] = disc->nodes;
  } else {
    out["outcome"] = "privilege_escalation";
  }
  return out;
}

}  // namespace

EnvironmentSpec load_env_spec(std::string_view document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("environment document is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("environment document must be a JSON object");

  const int version = as_int(require(root, "version", "document"), "version");
  if (version != kEnvSpecVersion) {
    throw SchemaError("unsupported environment document version " + std::to_string(version));
  }

  EnvironmentSpec spec;
  const json& caps = require(root, "capacities", "document");
  if (!caps.is_object()) throw SchemaError("capacities: expected an object");
  spec.capacities.nodes = as_int(require(caps, "n", "capacities"), "capacities.n");
  spec.capacities.local_vulns = as_int(require(caps, "n_l", "capacities"), "capacities.n_l");
  spec.capacities.remote_vulns = as_int(require(caps, "n_r", "capacities"), "capacities.n_r");
  spec.capacities.ports = as_int(require(caps, "n_p", "capacities"), "capacities.n_p");
  spec.capacities.credentials = as_int(require(caps, "n_c", "capacities"), "capacities.n_c");
  spec.capacities.properties = as_int(require(caps, "n_pr", "capacities"), "capacities.n_pr");
  spec.start_node = as_int(require(root, "start_node", "document"), "start_node");

  const json& nodes = as_array(require(root, "nodes", "document"), "nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    spec.nodes.push_back(parse_node(nodes[i], "nodes[" + std::to_string(i) + "]"));
  }
  std::stable_sort(spec.nodes.begin(), spec.nodes.end(),
                   [](const NodeSpec& a, const NodeSpec& b) { return a.node_id < b.node_id; });

  validate_structure(spec);
  const int attainable = count_attainable_flags(spec);
  if (auto it = root.find("attainable_flags"); it != root.end()) {
    spec.attainable_flags = as_int(*it, "attainable_flags");
  } else {
    spec.attainable_flags = attainable;
  }
  validate(spec);
  return spec;
}

EnvironmentSpec load_env_spec_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open environment document " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_env_spec(buffer.str());
}

std::string save_env_spec(const EnvironmentSpec& spec) {
  const Capacities& c = spec.capacities;
  json root;
  root["version"] = kEnvSpecVersion;
  root["capacities"] = {{"n", c.nodes},   {"n_l", c.local_vulns}, {"n_r", c.remote_vulns},
                        {"n_p", c.ports}, {"n_c", c.credentials}, {"n_pr", c.properties}};
  root["start_node"] = spec.start_node;
  root["attainable_flags"] = spec.attainable_flags;
  json nodes = json::array();
  for (const auto& node : spec.nodes) {
    json j;
    j["node_id"] = node.node_id;
    if (!node.name.empty()) j["name"] = node.name;
    j["properties"] = node.properties;
    j["ports"] = node.listening_ports;
    json accepted = json::array();
    for (const auto& [port, cred] : node.accepted_credentials) accepted.push_back({port, cred});
    j["accepted_credentials"] = std::move(accepted);
    json locals = json::array();
    for (const auto& v : node.local_vulns) locals.push_back(dump_vuln(v));
    j["local_vulns"] = std::move(locals);
    json remotes = json::array();
    for (const auto& v : node.remote_vulns) remotes.push_back(dump_vuln(v));
    j["remote_vulns"] = std::move(remotes);
    j["is_flag"] = node.is_flag;
    nodes.push_back(std::move(j));
  }
  root["nodes"] = std::move(nodes);
  return root.dump(2) + "\n";
}

}  // namespace rmpt
