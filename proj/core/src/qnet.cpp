#include "rmpt/qnet.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rmpt {
namespace {

std::vector<int> layer_widths(const NetShape& shape) {
  if (shape.input_dim <= 0 || shape.action_count <= 0 || shape.hidden_size <= 0 ||
      shape.hidden_layers < 0) {
    throw std::invalid_argument("network dimensions must be positive");
  }
  std::vector<int> widths{shape.input_dim};
  for (int i = 0; i < shape.hidden_layers; ++i) widths.push_back(shape.hidden_size);
  widths.push_back(shape.action_count);
  return widths;
}

Eigen::MatrixXd gather_inputs(const QNetwork& net, std::span<const TrainSample> batch) {
  const int in = net.shape().input_dim;
  Eigen::MatrixXd inputs(in, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (static_cast<int>(batch[k].input.size()) != in) {
      throw std::invalid_argument("training sample has the wrong input dimension");
    }
    if (batch[k].action >= static_cast<std::size_t>(net.shape().action_count)) {
      throw std::invalid_argument("training sample action outside the output layer");
    }
    if (!std::isfinite(batch[k].target)) {
      throw std::invalid_argument("training target is not finite");
    }
    inputs.col(static_cast<Eigen::Index>(k)) =
        Eigen::Map<const Eigen::VectorXd>(batch[k].input.data(), in);
  }
  return inputs;
}

}  // namespace

// ---------------------------------------------------------------------------
// QNetwork
// ---------------------------------------------------------------------------

QNetwork QNetwork::zeros(const NetShape& shape) {
  QNetwork net;
  net.shape_ = shape;
  const auto widths = layer_widths(shape);
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    net.layers_.push_back({Eigen::MatrixXd::Zero(widths[i + 1], widths[i]),
                           Eigen::VectorXd::Zero(widths[i + 1])});
  }
  return net;
}

QNetwork QNetwork::initialized(const NetShape& shape, std::uint64_t seed) {
  QNetwork net = zeros(shape);
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers_) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-scale, scale);
    // Fill column-major so the draw order matches the storage order.
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = dist(rng);
    }
  }
  return net;
}

Eigen::VectorXd QNetwork::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != shape_.input_dim) {
    throw std::invalid_argument("network input has " + std::to_string(x.size()) +
                                " entries, expected " + std::to_string(shape_.input_dim));
  }
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), shape_.input_dim);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::VectorXd z = layers_[i].weight * a + layers_[i].bias;
    a = (i + 1 < layers_.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Eigen::MatrixXd QNetwork::forward_batch(const Eigen::MatrixXd& inputs) const {
  if (inputs.rows() != shape_.input_dim) {
    throw std::invalid_argument("batched network input has the wrong dimension");
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    Eigen::MatrixXd z = layers_[i].weight * a;
    z.colwise() += layers_[i].bias;
    a = (i + 1 < layers_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

bool QNetwork::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

std::size_t QNetwork::parameter_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers_) {
    total += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return total;
}

// ---------------------------------------------------------------------------
// Loss and gradients
// ---------------------------------------------------------------------------

double batch_loss(const QNetwork& net, std::span<const TrainSample> batch) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  const Eigen::MatrixXd q = net.forward_batch(gather_inputs(net, batch));
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double err =
        q(static_cast<Eigen::Index>(batch[k].action), static_cast<Eigen::Index>(k)) -
        batch[k].target;
    loss += err * err;
  }
  return loss / static_cast<double>(batch.size());
}

const std::vector<DenseLayer>& batch_gradients(const QNetwork& net,
                                               std::span<const TrainSample> batch,
                                               GradientWorkspace& ws, double* loss) {
  if (batch.empty()) throw std::invalid_argument("empty training batch");
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();
  const auto count = static_cast<Eigen::Index>(batch.size());

  // Forward pass keeping every activation; relu'(z) = [relu(z) > 0], so the
  // pre-activations need not be stored.
  auto& acts = ws.activations;
  acts.resize(depth + 1);
  acts[0] = gather_inputs(net, batch);
  for (std::size_t i = 0; i < depth; ++i) {
    acts[i + 1].noalias() = layers[i].weight * acts[i];
    acts[i + 1].colwise() += layers[i].bias;
    if (i + 1 < depth) acts[i + 1] = acts[i + 1].cwiseMax(0.0);
  }

  auto& grads = ws.gradients;
  grads.resize(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    grads[i].weight.setZero(layers[i].weight.rows(), layers[i].weight.cols());
    grads[i].bias.setZero(layers[i].bias.size());
  }

  // Output layer: dL/dq is nonzero only at the chosen action of each sample.
  const Eigen::MatrixXd& q = acts.back();
  const Eigen::MatrixXd& last_hidden = acts[depth - 1];
  const DenseLayer& out = layers.back();
  Eigen::MatrixXd& delta = ws.delta;
  delta.resize(out.weight.cols(), count);
  double total = 0.0;
  const double scale = 2.0 / static_cast<double>(count);
  for (Eigen::Index k = 0; k < count; ++k) {
    const auto a = static_cast<Eigen::Index>(batch[static_cast<std::size_t>(k)].action);
    const double err = q(a, k) - batch[static_cast<std::size_t>(k)].target;
    total += err * err;
    const double g = scale * err;
    grads.back().weight.row(a) += g * last_hidden.col(k).transpose();
    grads.back().bias(a) += g;
    delta.col(k) = g * out.weight.row(a).transpose();
  }
  if (loss != nullptr) *loss = total / static_cast<double>(count);

  for (std::size_t i = depth - 1; i-- > 0;) {
    // delta holds dL/da_{i+1}; mask it through the ReLU.
    delta = (acts[i + 1].array() > 0.0).select(delta, 0.0);
    grads[i].weight.noalias() = delta * acts[i].transpose();
    grads[i].bias = delta.rowwise().sum();
    if (i > 0) delta = layers[i].weight.transpose() * delta;
  }
  return grads;
}

std::vector<DenseLayer> batch_gradients(const QNetwork& net, std::span<const TrainSample> batch,
                                        double* loss) {
  GradientWorkspace ws;
  batch_gradients(net, batch, ws, loss);
  return std::move(ws.gradients);
}

void SgdOptimizer::apply(QNetwork& net, const std::vector<DenseLayer>& gradients) {
  auto& layers = net.layers();
  if (gradients.size() != layers.size()) {
    throw std::invalid_argument("gradient does not match network depth");
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].weight.noalias() -= learning_rate_ * gradients[i].weight;
    layers[i].bias.noalias() -= learning_rate_ * gradients[i].bias;
  }
}

void AdamOptimizer::apply(QNetwork& net, const std::vector<DenseLayer>& gradients) {
  auto& layers = net.layers();
  if (gradients.size() != layers.size()) {
    throw std::invalid_argument("gradient does not match network depth");
  }
  if (first_.empty()) {
    for (const auto& layer : layers) {
      DenseLayer zero{Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                      Eigen::VectorXd::Zero(layer.bias.size())};
      first_.push_back(zero);
      second_.push_back(std::move(zero));
    }
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  const double step = learning_rate_ * std::sqrt(c2) / c1;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    param.array() -= step * m.array() / (v.array().sqrt() + eps_ * std::sqrt(c2));
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    update(layers[i].weight, first_[i].weight, second_[i].weight, gradients[i].weight);
    update(layers[i].bias, first_[i].bias, second_[i].bias, gradients[i].bias);
  }
}

double train_batch(QNetwork& net, std::span<const TrainSample> batch, Optimizer& optimizer,
                   GradientWorkspace& workspace) {
  double loss = 0.0;
  optimizer.apply(net, batch_gradients(net, batch, workspace, &loss));
  return loss;
}

double train_batch(QNetwork& net, std::span<const TrainSample> batch, Optimizer& optimizer) {
  GradientWorkspace workspace;
  return train_batch(net, batch, optimizer, workspace);
}

// ---------------------------------------------------------------------------
// ReplayBuffer
// ---------------------------------------------------------------------------

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay buffer capacity must be positive");
  data_.reserve(capacity_);
}

void ReplayBuffer::push(Experience e) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(e));
    return;
  }
  data_[head_] = std::move(e);
  head_ = (head_ + 1) % capacity_;
}

const Experience& ReplayBuffer::operator[](std::size_t i) const {
  if (i >= data_.size()) throw std::out_of_range("replay buffer index out of range");
  return data_[(head_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t n, std::mt19937_64& rng) const {
  if (n > data_.size()) {
    throw std::length_error("cannot sample " + std::to_string(n) + " experiences from " +
                            std::to_string(data_.size()));
  }
  std::vector<std::size_t> pool(data_.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

std::vector<Experience> ReplayBuffer::sample(std::size_t n, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::vector<Experience> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(n, rng)) out.push_back((*this)[i]);
  return out;
}

// ---------------------------------------------------------------------------
// QEnsemble
// ---------------------------------------------------------------------------

QEnsemble::QEnsemble(NetShape shape, std::vector<int> net_for_state, std::vector<QNetwork> online)
    : shape_(shape), net_for_state_(std::move(net_for_state)), online_(std::move(online)) {
  for (int idx : net_for_state_) {
    if (idx >= static_cast<int>(online_.size())) {
      throw std::invalid_argument("state map refers to a missing network");
    }
  }
  for (const auto& net : online_) {
    if (!(net.shape() == shape_)) throw std::invalid_argument("ensemble network shape mismatch");
  }
  target_ = online_;
}

QEnsemble QEnsemble::per_state(const RewardMachine& machine, const NetShape& shape,
                               std::uint64_t seed) {
  std::vector<int> map;
  std::vector<QNetwork> nets;
  std::seed_seq seq{seed};
  std::vector<std::uint32_t> seeds(static_cast<std::size_t>(machine.state_count()) * 2);
  seq.generate(seeds.begin(), seeds.end());
  for (RmState u = 0; u < machine.state_count(); ++u) {
    if (machine.is_terminal(u)) {
      map.push_back(-1);
      continue;
    }
    const auto s = static_cast<std::size_t>(u) * 2;
    const std::uint64_t net_seed = (std::uint64_t{seeds[s]} << 32) | seeds[s + 1];
    map.push_back(static_cast<int>(nets.size()));
    nets.push_back(QNetwork::initialized(shape, net_seed));
  }
  return QEnsemble(shape, std::move(map), std::move(nets));
}

QEnsemble QEnsemble::shared(const RewardMachine& machine, const NetShape& shape,
                            std::uint64_t seed) {
  std::vector<int> map;
  for (RmState u = 0; u < machine.state_count(); ++u) map.push_back(machine.is_terminal(u) ? -1 : 0);
  std::seed_seq seq{seed};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  std::vector<QNetwork> nets{
      QNetwork::initialized(shape, (std::uint64_t{words[0]} << 32) | words[1])};
  return QEnsemble(shape, std::move(map), std::move(nets));
}

int QEnsemble::net_index(RmState u) const {
  if (u < 0 || u >= static_cast<RmState>(net_for_state_.size())) {
    throw std::out_of_range("reward machine state " + std::to_string(u) + " not in ensemble");
  }
  return net_for_state_[static_cast<std::size_t>(u)];
}

QNetwork& QEnsemble::online(RmState u) {
  const int idx = net_index(u);
  if (idx < 0) throw std::logic_error("terminal reward machine states have no network");
  return online_[static_cast<std::size_t>(idx)];
}

const QNetwork& QEnsemble::online(RmState u) const {
  const int idx = net_index(u);
  if (idx < 0) throw std::logic_error("terminal reward machine states have no network");
  return online_[static_cast<std::size_t>(idx)];
}

const QNetwork& QEnsemble::target(RmState u) const {
  const int idx = net_index(u);
  if (idx < 0) throw std::logic_error("terminal reward machine states have no network");
  return target_[static_cast<std::size_t>(idx)];
}

void QEnsemble::sync_targets() { target_ = online_; }

}  // namespace rmpt
