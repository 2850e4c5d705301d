#include <gtest/gtest.h>

#include <algorithm>
#include <iostream>
#include <random>

#include "chain_oracle.hpp"
#include "rmpt/netsim.hpp"
#include "support.hpp"

namespace rmpt {
namespace {

using testing::chain_capture_path;
using testing::chain_port;

int count_flags(const EnvironmentSpec& spec) {
  return static_cast<int>(std::count_if(spec.nodes.begin(), spec.nodes.end(),
                                        [](const NodeSpec& n) { return n.is_flag; }));
}

TEST(ChainEnv, Shape) {
  const auto big = build_chain_env(8);
  EXPECT_EQ(big.nodes.size(), 18u);
  EXPECT_EQ(count_flags(big), 1);
  EXPECT_TRUE(big.nodes.back().is_flag);

  const auto small = build_chain_env(1);
  EXPECT_EQ(small.nodes.size(), 4u);
  EXPECT_EQ(small.attainable_flags, 1);
  EXPECT_EQ(count_attainable_flags(small), 1);
  EXPECT_EQ(action_space_size(small.capacities), 44u);
  EXPECT_EQ(observation_size(small.capacities), 26u);
  EXPECT_EQ(action_space_size(build_chain_env(2).capacities), 102u);

  EXPECT_THROW(build_chain_env(0), std::invalid_argument);
}

TEST(ChainEnv, AlternatingProperties) {
  const auto spec = build_chain_env(2);
  // properties are [linux, windows, sensitive]
  for (int k = 1; k <= 4; ++k) {
    const bool is_linux = k % 2 == 1;
    EXPECT_EQ(spec.nodes[k].properties[0], is_linux ? 1 : 0) << k;
    EXPECT_EQ(spec.nodes[k].properties[1], is_linux ? 0 : 1) << k;
    EXPECT_TRUE(spec.nodes[k].listening_ports.contains(chain_port(k)));
  }
  EXPECT_EQ(spec.nodes.back().properties[2], 1);
}

TEST(ChainEnv, ShortestCaptureByExhaustiveSearch) {
  for (int pairs : {1, 2}) {
    const auto spec = build_chain_env(pairs);
    const auto result = testing::shortest_capture(spec, 3 * (2 * pairs + 1));
    EXPECT_EQ(result.shortest, 3 * (2 * pairs + 1)) << "N=" << pairs;
    EXPECT_GE(result.optimal_paths, 1u);
    std::cout << "N=" << pairs << ": " << result.optimal_paths << " shortest sequences, "
              << result.states_visited << " states\n";
  }
}

TEST(ChainEnv, ScriptedPathCapturesTheFlag) {
  for (int pairs : {1, 2, 8}) {
    const auto spec = build_chain_env(pairs);
    auto [state, obs] = reset(spec);
    const auto path = chain_capture_path(pairs);
    for (std::size_t t = 0; t < path.size(); ++t) {
      const auto outcome = apply_action_in_place(state, spec, path[t]);
      ASSERT_TRUE(outcome.success) << to_string(path[t]);
      EXPECT_EQ(outcome.goal_achieved, t + 1 == path.size());
    }
  }
}

TEST(ToyCtf, FlagCounts) {
  const auto spec = build_toyctf_env();
  EXPECT_GE(spec.nodes.size(), 9u);
  EXPECT_EQ(count_flags(spec), 4);
  EXPECT_EQ(spec.attainable_flags, 2);
  EXPECT_EQ(count_attainable_flags(spec), 2);
}

TEST(ToyCtf, UnattainableFlagsOfferNoFoothold) {
  const auto spec = build_toyctf_env();
  int unattainable = 0;
  for (const auto& node : spec.nodes) {
    if (!node.is_flag || !node.accepted_credentials.empty()) continue;
    ++unattainable;
    for (const auto& v : node.local_vulns) {
      EXPECT_FALSE(std::holds_alternative<PrivilegeEscalation>(v.outcome)) << node.name;
    }
    for (const auto& v : node.remote_vulns) {
      EXPECT_TRUE(std::holds_alternative<NodeDiscovery>(v.outcome)) << node.name;
    }
  }
  EXPECT_EQ(unattainable, 2);
}

TEST(Reset, StartsFromTheStartNodeOnly) {
  for (const auto& spec : {build_chain_env(1), build_toyctf_env()}) {
    const auto [state, obs] = reset(spec, 1234);
    EXPECT_EQ(state.node_status[spec.start_node], NodeStatus::Admin);
    EXPECT_EQ(state.flags_captured, 0);
    EXPECT_EQ(obs.discovered_count, 1);
    EXPECT_EQ(obs.lateral_move, 0);
    EXPECT_EQ(std::count(obs.privilege.begin(), obs.privilege.end(), 1), 1);
    EXPECT_TRUE(std::all_of(obs.credentials.begin(), obs.credentials.end(),
                            [](std::uint8_t v) { return v == 0; }));
    EXPECT_EQ(reset(spec, 99).first, state);
  }
}

TEST(Apply, LeakThenConnect) {
  const auto spec = build_chain_env(1);
  auto [state, obs] = reset(spec);
  const auto& caps = spec.capacities;

  auto leak = apply_action_in_place(state, spec, LocalExploit{0, 1});
  EXPECT_TRUE(leak.success);
  EXPECT_EQ(state.node_status[1], NodeStatus::Discovered);
  EXPECT_EQ(state.credential(caps, {1, chain_port(1), 0}), CredentialStatus::Unused);

  auto connect = apply_action_in_place(state, spec, Connection{0, 1, chain_port(1), 0});
  EXPECT_TRUE(connect.success);
  EXPECT_EQ(state.node_status[1], NodeStatus::Connected);
  EXPECT_TRUE(state.last_action_was_lateral_move);
  EXPECT_EQ(state.credential(caps, {1, chain_port(1), 0}), CredentialStatus::Used);

  const Observation seen = scan(state, spec);
  EXPECT_EQ(seen.lateral_move, 1);
  EXPECT_EQ(seen.privilege[1], 0);  // Connected is not owned
  EXPECT_EQ(seen.credential(1, chain_port(1), 0), credential_value::kUsed);
  EXPECT_EQ(seen.discovered_count, 2);
}

TEST(Apply, InvalidActionsAreNoOps) {
  const auto spec = build_chain_env(1);
  auto [state, obs] = reset(spec);
  const EnvState before = state;

  for (const Action& a : std::vector<Action>{LocalExploit{2, 0}, LocalExploit{0, 0},
                                             Connection{0, 1, chain_port(1), 0},
                                             RemoteExploit{0, 1, 0}}) {
    const auto [once, o1] = apply_action(state, spec, a);
    const auto [twice, o2] = apply_action(once, spec, a);
    EXPECT_FALSE(o1.success) << to_string(a);
    EXPECT_EQ(once, before) << to_string(a);
    EXPECT_EQ(twice, once) << to_string(a);
  }

  // Wrong port for a discovered node.
  apply_action_in_place(state, spec, LocalExploit{0, 1});
  const EnvState leaked = state;
  const auto wrong = apply_action_in_place(state, spec, Connection{0, 1, 1 - chain_port(1), 0});
  EXPECT_FALSE(wrong.success);
  EXPECT_EQ(state, leaked);
}

TEST(Apply, NonRepeatableVulnFiresOnce) {
  const auto spec = build_chain_env(1);
  auto [state, obs] = reset(spec);
  EXPECT_TRUE(apply_action_in_place(state, spec, LocalExploit{0, 1}).success);
  const EnvState after = state;
  EXPECT_FALSE(apply_action_in_place(state, spec, LocalExploit{0, 1}).success);
  EXPECT_EQ(state, after);
}

TEST(Apply, EscalatingTheFlagAchievesTheGoal) {
  const auto spec = build_chain_env(1);
  auto [state, obs] = reset(spec);
  const auto path = chain_capture_path(1);
  for (std::size_t t = 0; t + 1 < path.size(); ++t) apply_action_in_place(state, spec, path[t]);
  ASSERT_EQ(state.node_status[3], NodeStatus::Connected);
  EXPECT_FALSE(goal_achieved(state, spec));

  const auto outcome = apply_action_in_place(state, spec, path.back());
  EXPECT_TRUE(outcome.success);
  EXPECT_TRUE(outcome.privesc_attempted);
  EXPECT_TRUE(outcome.flag_captured);
  EXPECT_TRUE(outcome.goal_achieved);
  EXPECT_EQ(state.flags_captured, 1);
  EXPECT_EQ(state.node_status[3], NodeStatus::Admin);

  // Escalating an Admin node is neither an attempt nor a capture.
  const auto again = apply_action_in_place(state, spec, path.back());
  EXPECT_FALSE(again.privesc_attempted);
  EXPECT_FALSE(again.flag_captured);
}

/// Random walks over both bundled networks checking the monotone and
/// conservation properties at every step.
TEST(Apply, RandomWalkInvariants) {
  std::mt19937_64 rng(5);
  for (const auto& spec : {build_chain_env(2), build_toyctf_env()}) {
    const auto& caps = spec.capacities;
    std::uniform_int_distribution<ActionIndex> pick(0, action_space_size(caps) - 1);
    for (int episode = 0; episode < 20; ++episode) {
      auto [state, obs] = reset(spec);
      for (int t = 0; t < 400; ++t) {
        const Action a = index_to_action(pick(rng), caps);
        const EnvState before = state;
        const auto outcome = apply_action_in_place(state, spec, a);
        const Observation next = scan(state, spec);

        EXPECT_EQ(apply_action(before, spec, a).first, state);  // determinism
        EXPECT_TRUE(next.conforms_to(caps));
        EXPECT_GE(next.discovered_count, obs.discovered_count);
        for (std::size_t i = 0; i < obs.privilege.size(); ++i) {
          EXPECT_GE(next.privilege[i], obs.privilege[i]);
          EXPECT_GE(state.node_status[i], before.node_status[i]);
        }
        for (std::size_t i = 0; i < obs.credentials.size(); ++i) {
          if (obs.credentials[i] != 0) EXPECT_NE(next.credentials[i], 0);
          if (next.credentials[i] == credential_value::kUsed) {
            EXPECT_NE(obs.credentials[i], 0);  // only a known credential can be used
          }
        }
        int owned_flags = 0;
        for (const auto& node : spec.nodes) {
          owned_flags += node.is_flag && state.node_status[node.node_id] == NodeStatus::Admin;
        }
        EXPECT_EQ(state.flags_captured, owned_flags);
        EXPECT_LE(state.flags_captured, spec.attainable_flags);
        EXPECT_EQ(outcome.goal_achieved, state.flags_captured == spec.attainable_flags);
        if (!outcome.success) {
          EnvState expected = before;
          expected.last_action_was_lateral_move = false;
          EXPECT_EQ(state, expected);
        }
        obs = next;
        if (outcome.goal_achieved) break;
      }
    }
  }
}

TEST(Apply, ToyCtfIsSolvable) {
  // Saturating every action repeatedly must capture both attainable flags.
  const auto spec = build_toyctf_env();
  auto [state, obs] = reset(spec);
  const std::size_t n = action_space_size(spec.capacities);
  bool done = false;
  for (int sweep = 0; sweep < 20 && !done; ++sweep) {
    for (ActionIndex k = 0; k < n && !done; ++k) {
      done = apply_action_in_place(state, spec, index_to_action(k, spec.capacities)).goal_achieved;
    }
  }
  EXPECT_TRUE(done);
  EXPECT_EQ(state.flags_captured, 2);
}

}  // namespace
}  // namespace rmpt
