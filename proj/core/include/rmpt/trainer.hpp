#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rmpt/events.hpp"
#include "rmpt/netsim.hpp"
#include "rmpt/qnet.hpp"
#include "rmpt/reward_machine.hpp"
#include "rmpt/spaces.hpp"

namespace rmpt {

/// The four learning agents. DQRM agents keep one Q-network per non-terminal
/// RM state and select actions with the current state's network; DQN agents
/// keep a single network and use the RM only as a reward source.
enum class AgentKind { DqrmRm1, DqnRm1, DqrmRm2, DqnRm2 };

std::string_view to_string(AgentKind kind);
/// Accepts "DQRM_RM1", "dqrm-rm1" and similar spellings.
std::optional<AgentKind> parse_agent_kind(std::string_view text);
bool uses_rm_policies(AgentKind kind);
/// "rm1" or "rm2".
std::string_view default_rm_id(AgentKind kind);

enum class OptimizerKind { Sgd, Adam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer_kind(std::string_view text);

/// Training hyperparameters; defaults are the published values.
struct TrainConfig {
  int max_steps = 1500;     // N_it
  int episodes = 100;       // N_ep
  int eval_episodes = 50;   // N_evl
  double gamma = 0.9;
  double learning_rate = 0.001;
  int sync_interval = 10;   // C
  int batch_size = 100;
  int hidden_layers = 2;
  int hidden_size = 150;
  double epsilon = 0.3;
  std::size_t buffer_capacity = 10'000;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct StepRecord {
  int step = 0;  // 1-based within the episode
  ActionIndex action = 0;
  EventSet events;
  RmState rm_state = 0;  // after the transition
  double reward = 0.0;
  double cumulative_reward = 0.0;
};

struct EpisodeMetrics {
  int steps_taken = 0;
  bool goal_reached = false;
  double total_reward = 0.0;
  std::vector<StepRecord> steps;
  std::vector<RmState> rm_trajectory;  // starts with the initial state

  std::vector<double> rewards() const;
};

struct TrainResult {
  QEnsemble nets;
  std::vector<EpisodeMetrics> episodes;
};

NetShape net_shape_for(const EnvironmentSpec& spec, const TrainConfig& config);

/// Lowest index among the maxima.
ActionIndex greedy_action(const Eigen::VectorXd& values);

/// With probability epsilon a uniform action, otherwise the greedy action of
/// the network attached to `u`. Both draws come from `rng`.
ActionIndex select_action(const QEnsemble& nets, RmState u, std::span<const double> obs,
                          double epsilon, std::mt19937_64& rng);

/// r + gamma * max_a' Q^-_{u'}(o', a'), or r when u' is terminal.
double td_target(const QEnsemble& nets, const RewardMachine& machine, const Experience& e,
                 double gamma);

/// td_target for the replay entries at `indices`, with one batched forward
/// pass per distinct target network. This is what training uses.
std::vector<double> td_targets(const QEnsemble& nets, const RewardMachine& machine,
                               const ReplayBuffer& buffer, std::span<const std::size_t> indices,
                               double gamma);

/// Runs the DQRM loop with the given ensemble layout. dqrm_train and
/// dqn_train are thin wrappers choosing per-state or shared networks.
TrainResult train(AgentKind kind, const EnvironmentSpec& spec, const RewardMachine& machine,
                  const TrainConfig& config);
TrainResult dqrm_train(const EnvironmentSpec& spec, const RewardMachine& machine,
                       const TrainConfig& config);
TrainResult dqn_train(const EnvironmentSpec& spec, const RewardMachine& machine,
                      const TrainConfig& config);

/// Policy hook for evaluation: (rm state, raw observation, encoded observation) -> action.
using ActionSelector =
    std::function<ActionIndex(RmState, const Observation&, std::span<const double>)>;

/// Greedy (epsilon = 0) rollouts; no learning, no replay. Runs
/// config.eval_episodes episodes of at most config.max_steps actions.
std::vector<EpisodeMetrics> evaluate(const QEnsemble& nets, const EnvironmentSpec& spec,
                                     const RewardMachine& machine, const TrainConfig& config);
std::vector<EpisodeMetrics> evaluate_policy(const ActionSelector& policy,
                                            const EnvironmentSpec& spec,
                                            const RewardMachine& machine,
                                            const TrainConfig& config);

/// sum_{t>=1} gamma^(t-1) r_t
double compute_return(std::span<const double> rewards, double gamma);

}  // namespace rmpt
