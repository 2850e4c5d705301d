#include "rmpt/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <stdexcept>

namespace rmpt {
namespace {

struct SeedStreams {
  std::uint64_t networks;
  std::uint64_t exploration;
  std::uint64_t replay;
};

SeedStreams derive_seeds(std::uint64_t master) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32)};
  std::uint32_t w[6];
  seq.generate(w, w + 6);
  auto join = [](std::uint32_t hi, std::uint32_t lo) { return (std::uint64_t{hi} << 32) | lo; };
  return {join(w[0], w[1]), join(w[2], w[3]), join(w[4], w[5])};
}

/// Per-step hook used by training; evaluation passes none.
using TransitionHook = std::function<void(Experience&&, int step)>;

EpisodeMetrics run_episode(const EnvironmentSpec& spec, const RewardMachine& machine,
                           int max_steps, const ActionSelector& choose,
                           const TransitionHook& on_transition) {
  const Capacities& caps = spec.capacities;
  auto [state, obs] = reset(spec);
  std::vector<double> enc = encode_observation(obs, caps);
  RmState u = machine.initial();

  EpisodeMetrics m;
  m.rm_trajectory.push_back(u);
  for (int t = 1; t <= max_steps; ++t) {
    const ActionIndex a = choose(u, obs, enc);
    const Action action = index_to_action(a, caps);
    const StepOutcome outcome = apply_action_in_place(state, spec, action);
    Observation next_obs = scan(state, spec);
    std::vector<double> next_enc = encode_observation(next_obs, caps);

    const EventSet events = detect_events({obs, action, next_obs, outcome});
    const auto transition = machine.step(u, events);
    const double r = transition.reward(obs, action, next_obs);
    const RmState u_next = transition.next;

    m.total_reward += r;
    m.steps_taken = t;
    m.steps.push_back({t, a, events, u_next, r, m.total_reward});
    m.rm_trajectory.push_back(u_next);

    if (on_transition) on_transition(Experience{enc, a, next_enc, u, u_next, r}, t);

    obs = std::move(next_obs);
    enc = std::move(next_enc);
    u = u_next;
    if (outcome.goal_achieved || machine.is_terminal(u)) {
      m.goal_reached = outcome.goal_achieved;
      break;
    }
  }
  return m;
}

}  // namespace

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::DqrmRm1:
      return "DQRM_RM1";
    case AgentKind::DqnRm1:
      return "DQN_RM1";
    case AgentKind::DqrmRm2:
      return "DQRM_RM2";
    case AgentKind::DqnRm2:
      return "DQN_RM2";
  }
  return "?";
}

std::optional<AgentKind> parse_agent_kind(std::string_view text) {
  std::string norm;
  for (char c : text) {
    if (c == '-') c = '_';
    norm.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  for (AgentKind k : {AgentKind::DqrmRm1, AgentKind::DqnRm1, AgentKind::DqrmRm2,
                      AgentKind::DqnRm2}) {
    if (norm == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::Adam ? "adam" : "sgd";
}

std::optional<OptimizerKind> parse_optimizer_kind(std::string_view text) {
  if (text == "sgd") return OptimizerKind::Sgd;
  if (text == "adam") return OptimizerKind::Adam;
  return std::nullopt;
}

bool uses_rm_policies(AgentKind kind) {
  return kind == AgentKind::DqrmRm1 || kind == AgentKind::DqrmRm2;
}

std::string_view default_rm_id(AgentKind kind) {
  return (kind == AgentKind::DqrmRm1 || kind == AgentKind::DqnRm1) ? "rm1" : "rm2";
}

void TrainConfig::validate() const {
  auto fail = [](const char* field, const std::string& why) {
    throw std::invalid_argument(std::string("config field '") + field + "' " + why);
  };
  if (max_steps <= 0) fail("max_steps", "must be positive");
  if (episodes <= 0) fail("episodes", "must be positive");
  if (eval_episodes <= 0) fail("eval_episodes", "must be positive");
  if (!(gamma >= 0.0 && gamma < 1.0)) fail("gamma", "must lie in [0, 1)");
  if (!(learning_rate > 0.0)) fail("learning_rate", "must be positive");
  if (sync_interval <= 0) fail("sync_interval", "must be positive");
  if (batch_size <= 0) fail("batch_size", "must be positive");
  if (hidden_layers <= 0) fail("hidden_layers", "must be positive");
  if (hidden_size <= 0) fail("hidden_size", "must be positive");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) fail("epsilon", "must lie in [0, 1]");
  if (buffer_capacity < static_cast<std::size_t>(batch_size)) {
    fail("buffer_capacity", "must hold at least one batch");
  }
}

std::vector<double> EpisodeMetrics::rewards() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.reward);
  return out;
}

NetShape net_shape_for(const EnvironmentSpec& spec, const TrainConfig& config) {
  return NetShape{static_cast<int>(observation_size(spec.capacities)),
                  static_cast<int>(action_space_size(spec.capacities)), config.hidden_size,
                  config.hidden_layers};
}

ActionIndex greedy_action(const Eigen::VectorXd& values) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i) {
    if (values(i) > values(best)) best = i;
  }
  return static_cast<ActionIndex>(best);
}

ActionIndex select_action(const QEnsemble& nets, RmState u, std::span<const double> obs,
                          double epsilon, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<ActionIndex> pick(
        0, static_cast<ActionIndex>(nets.shape().action_count) - 1);
    return pick(rng);
  }
  return greedy_action(nets.online(u).forward(obs));
}

double td_target(const QEnsemble& nets, const RewardMachine& machine, const Experience& e,
                 double gamma) {
  if (machine.is_terminal(e.u_next)) return e.reward;
  return e.reward + gamma * nets.target(e.u_next).forward(e.next_obs).maxCoeff();
}

std::vector<double> td_targets(const QEnsemble& nets, const RewardMachine& machine,
                                    const ReplayBuffer& buffer,
                                    std::span<const std::size_t> indices, double gamma) {
  std::vector<double> targets(indices.size());
  std::map<int, std::vector<std::size_t>> by_target;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Experience& e = buffer[indices[k]];
    targets[k] = e.reward;
    if (!machine.is_terminal(e.u_next)) by_target[nets.net_index(e.u_next)].push_back(k);
  }
  const auto& target_nets = nets.target_networks();
  for (const auto& [net, members] : by_target) {
    Eigen::MatrixXd inputs(nets.shape().input_dim, static_cast<Eigen::Index>(members.size()));
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto& next = buffer[indices[members[j]]].next_obs;
      inputs.col(static_cast<Eigen::Index>(j)) =
          Eigen::Map<const Eigen::VectorXd>(next.data(), static_cast<Eigen::Index>(next.size()));
    }
    const Eigen::MatrixXd q = target_nets[static_cast<std::size_t>(net)].forward_batch(inputs);
    for (std::size_t j = 0; j < members.size(); ++j) {
      targets[members[j]] += gamma * q.col(static_cast<Eigen::Index>(j)).maxCoeff();
    }
  }
  return targets;
}

TrainResult train(AgentKind kind, const EnvironmentSpec& spec, const RewardMachine& machine,
                  const TrainConfig& config) {
  config.validate();
  const SeedStreams seeds = derive_seeds(config.seed);
  const NetShape shape = net_shape_for(spec, config);

  TrainResult result;
  result.nets = uses_rm_policies(kind) ? QEnsemble::per_state(machine, shape, seeds.networks)
                                       : QEnsemble::shared(machine, shape, seeds.networks);
  QEnsemble& nets = result.nets;
  ReplayBuffer buffer(config.buffer_capacity);
  std::vector<std::unique_ptr<Optimizer>> optimizers;
  for (std::size_t i = 0; i < nets.online_networks().size(); ++i) {
    if (config.optimizer == OptimizerKind::Adam) {
      optimizers.push_back(std::make_unique<AdamOptimizer>(config.learning_rate));
    } else {
      optimizers.push_back(std::make_unique<SgdOptimizer>(config.learning_rate));
    }
  }
  GradientWorkspace workspace;
  std::mt19937_64 explore_rng(seeds.exploration);
  std::mt19937_64 replay_rng(seeds.replay);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  const ActionSelector behaviour = [&](RmState u, const Observation&,
                                       std::span<const double> enc) {
    return select_action(nets, u, enc, config.epsilon, explore_rng);
  };

  std::vector<TrainSample> samples;
  samples.reserve(batch);
  const TransitionHook learn = [&](Experience&& e, int step) {
    buffer.push(std::move(e));
    if (buffer.size() >= batch) {
      const auto indices = buffer.sample_indices(batch, replay_rng);
      const auto targets = td_targets(nets, machine, buffer, indices, config.gamma);
      // Each network is trained on the sub-batch recorded under its RM state.
      std::map<int, std::vector<std::size_t>> groups;
      for (std::size_t k = 0; k < indices.size(); ++k) {
        groups[nets.net_index(buffer[indices[k]].u)].push_back(k);
      }
      for (const auto& [net, members] : groups) {
        samples.clear();
        for (std::size_t k : members) {
          const Experience& x = buffer[indices[k]];
          samples.push_back({x.obs, x.action, targets[k]});
        }
        const auto slot = static_cast<std::size_t>(net);
        train_batch(nets.online_networks()[slot], samples, *optimizers[slot], workspace);
      }
    }
    if (step % config.sync_interval == 0) nets.sync_targets();
  };

  result.episodes.reserve(static_cast<std::size_t>(config.episodes));
  for (int ep = 0; ep < config.episodes; ++ep) {
    result.episodes.push_back(run_episode(spec, machine, config.max_steps, behaviour, learn));
  }
  return result;
}

TrainResult dqrm_train(const EnvironmentSpec& spec, const RewardMachine& machine,
                       const TrainConfig& config) {
  return train(AgentKind::DqrmRm1, spec, machine, config);
}

TrainResult dqn_train(const EnvironmentSpec& spec, const RewardMachine& machine,
                      const TrainConfig& config) {
  return train(AgentKind::DqnRm1, spec, machine, config);
}

std::vector<EpisodeMetrics> evaluate(const QEnsemble& nets, const EnvironmentSpec& spec,
                                     const RewardMachine& machine, const TrainConfig& config) {
  return evaluate_policy(
      [&nets](RmState u, const Observation&, std::span<const double> enc) {
        return greedy_action(nets.online(u).forward(enc));
      },
      spec, machine, config);
}

std::vector<EpisodeMetrics> evaluate_policy(const ActionSelector& policy,
                                            const EnvironmentSpec& spec,
                                            const RewardMachine& machine,
                                            const TrainConfig& config) {
  config.validate();
  std::vector<EpisodeMetrics> out;
  out.reserve(static_cast<std::size_t>(config.eval_episodes));
  for (int ep = 0; ep < config.eval_episodes; ++ep) {
    out.push_back(run_episode(spec, machine, config.max_steps, policy, nullptr));
  }
  return out;
}

double compute_return(std::span<const double> rewards, double gamma) {
  // Backward recursion G = r + gamma * G' rounds less than summing powers.
  double total = 0.0;
  for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) total = *it + gamma * total;
  return total;
}

}  // namespace rmpt
