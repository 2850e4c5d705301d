#include "rmpt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace rmpt {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint codec assumes a little-endian host");

constexpr char kMagic[8] = {'R', 'M', 'P', 'T', 'Q', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    out_.append(raw, sizeof(T));
  }
  void put_bytes(const void* data, std::size_t size) {
    out_.append(static_cast<const char*>(data), size);
  }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void put_network(const QNetwork& net) {
    for (const auto& layer : net.layers()) {
      put_bytes(layer.weight.data(), sizeof(double) * static_cast<std::size_t>(layer.weight.size()));
      put_bytes(layer.bias.data(), sizeof(double) * static_cast<std::size_t>(layer.bias.size()));
    }
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  template <typename T>
  T get() {
    T value;
    get_bytes(&value, sizeof(T));
    return value;
  }
  void get_bytes(void* dst, std::size_t size) {
    if (pos_ + size > in_.size()) throw CheckpointError("checkpoint is truncated");
    std::memcpy(dst, in_.data() + pos_, size);
    pos_ += size;
  }
  std::string get_string() {
    const auto size = get<std::uint32_t>();
    if (pos_ + size > in_.size()) throw CheckpointError("checkpoint is truncated");
    std::string s(in_.substr(pos_, size));
    pos_ += size;
    return s;
  }
  void get_network(QNetwork& net) {
    for (auto& layer : net.layers()) {
      get_bytes(layer.weight.data(), sizeof(double) * static_cast<std::size_t>(layer.weight.size()));
      get_bytes(layer.bias.data(), sizeof(double) * static_cast<std::size_t>(layer.bias.size()));
    }
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t config_hash(std::string_view agent, const Capacities& caps, const NetShape& shape,
                          int rm_state_count) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::int64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= static_cast<std::uint8_t>(v >> (8 * i));
      h *= 0x100000001b3ull;
    }
  };
  for (char c : agent) mix(c);
  for (int v : {caps.nodes, caps.local_vulns, caps.remote_vulns, caps.ports, caps.credentials,
                caps.properties, shape.input_dim, shape.action_count, shape.hidden_size,
                shape.hidden_layers, rm_state_count}) {
    mix(v);
  }
  return h;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.put_bytes(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(ckpt.config_hash);
  w.put_string(ckpt.agent);
  const Capacities& c = ckpt.capacities;
  for (int v : {c.nodes, c.local_vulns, c.remote_vulns, c.ports, c.credentials, c.properties}) {
    w.put<std::int32_t>(v);
  }
  const NetShape& s = ckpt.nets.shape();
  for (int v : {s.input_dim, s.action_count, s.hidden_size, s.hidden_layers}) {
    w.put<std::int32_t>(v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.nets.state_map().size()));
  for (int idx : ckpt.nets.state_map()) w.put<std::int32_t>(idx);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.nets.online_networks().size()));
  for (const auto& net : ckpt.nets.online_networks()) w.put_network(net);
  for (const auto& net : ckpt.nets.target_networks()) w.put_network(net);
  return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  char magic[sizeof(kMagic)];
  r.get_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not an rmpt checkpoint");
  }
  if (const auto version = r.get<std::uint32_t>(); version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.config_hash = r.get<std::uint64_t>();
  ckpt.agent = r.get_string();
  Capacities& c = ckpt.capacities;
  for (int* v : {&c.nodes, &c.local_vulns, &c.remote_vulns, &c.ports, &c.credentials,
                 &c.properties}) {
    *v = r.get<std::int32_t>();
  }
  NetShape shape;
  for (int* v : {&shape.input_dim, &shape.action_count, &shape.hidden_size, &shape.hidden_layers}) {
    *v = r.get<std::int32_t>();
  }
  std::vector<int> map(r.get<std::uint32_t>());
  for (int& idx : map) idx = r.get<std::int32_t>();
  const auto net_count = r.get<std::uint32_t>();
  std::vector<QNetwork> online;
  std::vector<QNetwork> target;
  try {
    for (std::uint32_t i = 0; i < net_count; ++i) {
      online.push_back(QNetwork::zeros(shape));
      r.get_network(online.back());
    }
    for (std::uint32_t i = 0; i < net_count; ++i) {
      target.push_back(QNetwork::zeros(shape));
      r.get_network(target.back());
    }
    ckpt.nets = QEnsemble(shape, std::move(map), std::move(online));
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("corrupt checkpoint: ") + e.what());
  }
  ckpt.nets.target_networks() = std::move(target);
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint payload");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return deserialize_checkpoint(buffer.str());
}

}  // namespace rmpt
