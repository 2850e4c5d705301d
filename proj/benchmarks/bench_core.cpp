// Hot-path microbenchmarks at the default network size on the chain
// environment.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rmpt/events.hpp"
#include "rmpt/netsim.hpp"
#include "rmpt/qnet.hpp"
#include "rmpt/reward_machine.hpp"
#include "rmpt/trainer.hpp"

namespace {

using namespace rmpt;

NetShape chain_shape(int pairs) {
  const auto spec = build_chain_env(pairs);
  return net_shape_for(spec, TrainConfig{});
}

std::vector<std::vector<double>> random_inputs(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(0.3);
  std::vector<std::vector<double>> xs(static_cast<std::size_t>(n));
  for (auto& x : xs) {
    x.resize(static_cast<std::size_t>(dim));
    for (auto& v : x) v = bit(rng) ? 1.0 : 0.0;
  }
  return xs;
}

void BM_Forward(benchmark::State& state) {
  const auto shape = chain_shape(static_cast<int>(state.range(0)));
  const auto net = QNetwork::initialized(shape, 1);
  const auto x = random_inputs(1, shape.input_dim, 2).front();
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(2);

void BM_TrainBatch(benchmark::State& state) {
  const auto shape = chain_shape(2);
  auto net = QNetwork::initialized(shape, 1);
  const auto xs = random_inputs(static_cast<int>(state.range(0)), shape.input_dim, 3);
  std::vector<TrainSample> batch;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    batch.push_back({xs[i], static_cast<ActionIndex>(i % shape.action_count), 0.5});
  }
  AdamOptimizer opt(1e-3);
  GradientWorkspace ws;
  for (auto _ : state) benchmark::DoNotOptimize(train_batch(net, batch, opt, ws));
}
BENCHMARK(BM_TrainBatch)->Arg(32)->Arg(100);

void BM_ApplyAction(benchmark::State& state) {
  const auto spec = build_chain_env(2);
  const auto n = action_space_size(spec.capacities);
  std::vector<Action> actions;
  for (ActionIndex k = 0; k < n; ++k) actions.push_back(index_to_action(k, spec.capacities));
  auto [env, obs] = reset(spec);
  std::size_t k = 0;
  for (auto _ : state) {
    auto [next, out] = apply_action(env, spec, actions[k]);
    benchmark::DoNotOptimize(out);
    k = (k + 1) % actions.size();
  }
}
BENCHMARK(BM_ApplyAction);

void BM_DetectEvents(benchmark::State& state) {
  const auto spec = build_chain_env(2);
  auto [env, before] = reset(spec);
  const Action leak = LocalExploit{0, 1};
  const StepOutcome out = apply_action_in_place(env, spec, leak);
  const Observation after = scan(env, spec);
  const InteractionRecord record{before, leak, after, out};
  for (auto _ : state) benchmark::DoNotOptimize(detect_events(record));
}
BENCHMARK(BM_DetectEvents);

// A whole short training run, dominated by per-step learning updates.
void BM_TrainEpisodes(benchmark::State& state) {
  const auto spec = build_chain_env(1);
  const auto rm = build_rm2();
  TrainConfig c;
  c.episodes = 2;
  c.max_steps = 100;
  for (auto _ : state) {
    auto result = train(state.range(0) ? AgentKind::DqrmRm2 : AgentKind::DqnRm2, spec, rm, c);
    benchmark::DoNotOptimize(result.episodes.size());
  }
  state.SetItemsProcessed(state.iterations() * c.episodes * c.max_steps);
}
BENCHMARK(BM_TrainEpisodes)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
