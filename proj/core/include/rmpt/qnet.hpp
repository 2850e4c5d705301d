#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rmpt/reward_machine.hpp"
#include "rmpt/spaces.hpp"

namespace rmpt {

struct NetShape {
  int input_dim = 1;
  int action_count = 1;
  int hidden_size = 150;
  int hidden_layers = 2;

  bool operator==(const NetShape&) const = default;
};

/// weight is (out x in); a layer computes weight * x + bias.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  bool operator==(const DenseLayer& o) const {
    return weight.rows() == o.weight.rows() && weight.cols() == o.weight.cols() &&
           bias.size() == o.bias.size() && weight == o.weight && bias == o.bias;
  }
};

/// Fully connected Q-network: input -> [hidden, ReLU] x hidden_layers -> one
/// linear output per action.
class QNetwork {
 public:
  QNetwork() = default;

  /// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static QNetwork initialized(const NetShape& shape, std::uint64_t seed);
  static QNetwork zeros(const NetShape& shape);

  const NetShape& shape() const { return shape_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Throws std::invalid_argument if x.size() != input_dim.
  Eigen::VectorXd forward(std::span<const double> x) const;
  /// Column-per-sample batch; returns (action_count x batch).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

  bool all_finite() const;
  std::size_t parameter_count() const;

  bool operator==(const QNetwork&) const = default;

 private:
  NetShape shape_;
  std::vector<DenseLayer> layers_;
};

/// One regression sample: push Q(input)[action] toward target.
struct TrainSample {
  std::span<const double> input;
  ActionIndex action = 0;
  double target = 0.0;
};

/// mean_k (Q(x_k)[a_k] - y_k)^2
double batch_loss(const QNetwork& net, std::span<const TrainSample> batch);

/// Scratch matrices reused across gradient evaluations.
struct GradientWorkspace {
  std::vector<Eigen::MatrixXd> activations;
  Eigen::MatrixXd delta;
  std::vector<DenseLayer> gradients;
};

/// Gradient of batch_loss with respect to every layer; only the chosen
/// action's output receives error. The result lives in `workspace`.
const std::vector<DenseLayer>& batch_gradients(const QNetwork& net,
                                               std::span<const TrainSample> batch,
                                               GradientWorkspace& workspace,
                                               double* loss = nullptr);
std::vector<DenseLayer> batch_gradients(const QNetwork& net, std::span<const TrainSample> batch,
                                        double* loss = nullptr);

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void apply(QNetwork& net, const std::vector<DenseLayer>& gradients) = 0;
};

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(double learning_rate) : learning_rate_(learning_rate) {}
  void apply(QNetwork& net, const std::vector<DenseLayer>& gradients) override;
  double learning_rate() const { return learning_rate_; }

 private:
  double learning_rate_;
};

/// Adam with bias correction. Keeps moment estimates, so use one instance
/// per network.
class AdamOptimizer final : public Optimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double eps = 1e-8)
      : learning_rate_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void apply(QNetwork& net, const std::vector<DenseLayer>& gradients) override;

 private:
  double learning_rate_;
  double beta1_;
  double beta2_;
  double eps_;
  long steps_ = 0;
  std::vector<DenseLayer> first_;
  std::vector<DenseLayer> second_;
};

/// One optimizer step on the mean squared error of `batch`. Returns the loss
/// before the step. Throws std::invalid_argument on an empty batch or a
/// non-finite target.
double train_batch(QNetwork& net, std::span<const TrainSample> batch, Optimizer& optimizer);
double train_batch(QNetwork& net, std::span<const TrainSample> batch, Optimizer& optimizer,
                   GradientWorkspace& workspace);

// ---------------------------------------------------------------------------
// Experience replay
// ---------------------------------------------------------------------------

struct Experience {
  std::vector<double> obs;
  ActionIndex action = 0;
  std::vector<double> next_obs;
  RmState u = 0;
  RmState u_next = 0;
  double reward = 0.0;

  bool operator==(const Experience&) const = default;
};

/// Bounded FIFO; once full, every push evicts the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 10'000);

  void push(Experience e);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// 0 is the oldest retained entry.
  const Experience& operator[](std::size_t i) const;

  /// n distinct positions drawn uniformly. Throws std::length_error if n > size().
  std::vector<std::size_t> sample_indices(std::size_t n, std::mt19937_64& rng) const;
  std::vector<Experience> sample(std::size_t n, std::uint64_t seed) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // physical slot of the oldest entry once full
  std::vector<Experience> data_;
};

// ---------------------------------------------------------------------------
// Per-RM-state networks
// ---------------------------------------------------------------------------

/// Online and target networks indexed by reward-machine state. Terminal states
/// map to no network; their value is zero by definition. A shared ensemble
/// maps every non-terminal state to the same network (plain DQN).
class QEnsemble {
 public:
  QEnsemble() = default;
  QEnsemble(NetShape shape, std::vector<int> net_for_state, std::vector<QNetwork> online);

  static QEnsemble per_state(const RewardMachine& machine, const NetShape& shape,
                             std::uint64_t seed);
  static QEnsemble shared(const RewardMachine& machine, const NetShape& shape, std::uint64_t seed);

  const NetShape& shape() const { return shape_; }
  /// -1 for terminal states.
  int net_index(RmState u) const;
  bool has_network(RmState u) const { return net_index(u) >= 0; }
  const std::vector<int>& state_map() const { return net_for_state_; }

  QNetwork& online(RmState u);
  const QNetwork& online(RmState u) const;
  const QNetwork& target(RmState u) const;

  std::vector<QNetwork>& online_networks() { return online_; }
  const std::vector<QNetwork>& online_networks() const { return online_; }
  std::vector<QNetwork>& target_networks() { return target_; }
  const std::vector<QNetwork>& target_networks() const { return target_; }

  /// theta^-_u <- theta_u for every network (deep copy).
  void sync_targets();

  bool operator==(const QEnsemble&) const = default;

 private:
  NetShape shape_;
  std::vector<int> net_for_state_;
  std::vector<QNetwork> online_;
  std::vector<QNetwork> target_;
};

}  // namespace rmpt
