// Acceptance suite: one PASS/FAIL line per criterion. Budgets and tolerances
// are fixed below; `--only 1,5` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chain_oracle.hpp"
#include "rmpt/checkpoint.hpp"
#include "rmpt/cli/commands.hpp"
#include "rmpt/events.hpp"
#include "rmpt/reward_machine.hpp"
#include "rmpt/trainer.hpp"
#include "support.hpp"

namespace {

using namespace rmpt;
namespace fs = std::filesystem;

constexpr double kRmBudget = 1.0;
constexpr double kLabelBudget = 5.0;
constexpr double kGradBudget = 10.0;
constexpr double kEnvBudget = 30.0;
constexpr double kTrendBudget = 30.0 * 60.0;
constexpr double kGradTolerance = 1e-4;
constexpr int kLabelRecords = 1000;
constexpr int kGradNets = 20;

struct Verdict {
  bool pass = true;
  std::string detail;
};

/// Collects failures without stopping at the first one.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      ++failures_;
      if (first_.empty()) first_ = what;
    }
  }
  Verdict verdict(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, std::to_string(failures_) + " check(s) failed, first: " + first_};
  }

 private:
  int failures_ = 0;
  std::string first_;
};

// ---------------------------------------------------------------------------
// 1. Reward machine conformance
// ---------------------------------------------------------------------------

struct Edge {
  const char* from;
  const char* events;
  const char* to;
  double reward;
};

Verdict rm_conformance() {
  Checker check;
  const Observation o = Observation::blank(Capacities{});
  const Action a = LocalExploit{0, 0};
  auto run_edges = [&](const RewardMachine& m, const std::vector<Edge>& edges) {
    for (const Edge& e : edges) {
      const auto r = m.step(m.state_id(e.from), EventSet::parse(e.events));
      const std::string label = std::string(e.from) + "{" + e.events + "}";
      check.expect(m.state_name(r.next) == e.to, label + " -> " + m.state_name(r.next));
      check.expect(r.reward(o, a, o) == e.reward, label + " reward");
    }
  };

  const auto rm1 = build_rm1();
  const auto rm2 = build_rm2();
  // Explicit edges (one event set each), then self-loop cases.
  run_edges(rm1, {{"u0", "b", "u1", 0},     {"u1", "", "u0", 0},      {"u1", "c", "u2", 0},
                  {"u2", "dfh", "u3", 10},  {"u2", "dgh", "u1", 1},   {"u2", "dh", "u0", 1},
                  {"u0", "", "u0", 0},      {"u1", "g", "u1", 0},     {"u2", "h", "u2", 0},
                  {"u2", "d", "u2", 0},     {"u0", "cdgh", "u0", 0}});
  run_edges(rm2, {{"u0", "a", "u1", 0},     {"u0", "ab", "u2", 0},    {"u1", "b", "u2", 0},
                  {"u2", "", "u1", 0},      {"u2", "c", "u3", 0},     {"u3", "dfh", "u4", 10},
                  {"u3", "dgh", "u2", 1},   {"u3", "dh", "u0", 1},    {"u0", "b", "u0", 0},
                  {"u1", "", "u1", 0},      {"u2", "g", "u2", 0},     {"u3", "h", "u3", 0}});
  check.expect(rm1.transitions().size() == 6, "rm1 edge count");
  check.expect(rm2.transitions().size() == 8, "rm2 edge count");
  check.expect(rm1.is_terminal(rm1.state_id("u3")) && rm2.is_terminal(rm2.state_id("u4")),
               "terminals");

  // Determinism over every subset of all eight events, guard by guard.
  int subsets_checked = 0;
  for (const RewardMachine* m : {&rm1, &rm2}) {
    for (RmState u = 0; u < m->state_count(); ++u) {
      if (m->is_terminal(u)) continue;
      for (unsigned bits = 0; bits < 256; ++bits) {
        const EventSet e = EventSet::from_bits(static_cast<std::uint8_t>(bits));
        int firing = 0;
        RmState expected = u;
        for (const auto& t : m->transitions()) {
          if (t.from == u && t.guard.satisfied(e & m->event_set())) {
            ++firing;
            expected = t.to;
          }
        }
        check.expect(firing <= 1, "nondeterministic at " + m->state_name(u));
        check.expect(m->step(u, e).next == expected, "step disagrees with guards");
        ++subsets_checked;
      }
    }
  }
  return check.verdict("14 explicit edges and self-loops exact; " +
                       std::to_string(subsets_checked) + " (state, event subset) pairs deterministic");
}

// ---------------------------------------------------------------------------
// 2. Labeling function against a separate re-derivation
// ---------------------------------------------------------------------------

std::string oracle_events(const Observation& prev, const Observation& next,
                          const StepOutcome& out) {
  std::string s;
  if (next.discovered_count > prev.discovered_count) s += 'a';
  bool new_cred = false, unused = false, elevated = false;
  for (std::size_t i = 0; i < next.credentials.size(); ++i) {
    new_cred = new_cred || (prev.credentials[i] == 0 && next.credentials[i] == 2);
    unused = unused || next.credentials[i] == 2;
  }
  for (std::size_t i = 0; i < next.privilege.size(); ++i) {
    elevated = elevated || (prev.privilege[i] == 0 && next.privilege[i] == 1);
  }
  if (new_cred) s += 'b';
  if (next.lateral_move == 1) s += 'c';
  if (elevated) s += 'd';
  if (out.flag_captured) s += 'e';
  if (out.goal_achieved) s += 'f';
  if (unused) s += 'g';
  if (out.privesc_attempted) s += 'h';
  return s;
}

Verdict labeling_oracle() {
  Checker check;
  std::mt19937_64 rng(20240601);
  int compared = 0;
  auto compare = [&](const Observation& prev, const Action& act, const Observation& next,
                     const StepOutcome& out) {
    const std::string got = detect_events({prev, act, next, out}).to_string();
    const std::string want = oracle_events(prev, next, out);
    check.expect(got == want, "record " + std::to_string(compared) + ": " + got + " vs " + want);
    ++compared;
  };

  // Half the records come from simulator trajectories.
  const std::vector<EnvironmentSpec> specs = {build_chain_env(2), build_toyctf_env()};
  while (compared < kLabelRecords / 2) {
    const auto& spec = specs[static_cast<std::size_t>(compared) % 2];
    std::uniform_int_distribution<ActionIndex> pick(0, action_space_size(spec.capacities) - 1);
    auto [state, obs] = reset(spec);
    for (int t = 0; t < 50 && compared < kLabelRecords / 2; ++t) {
      const Action act = index_to_action(pick(rng), spec.capacities);
      const StepOutcome out = apply_action_in_place(state, spec, act);
      const Observation next = scan(state, spec);
      compare(obs, act, next, out);
      obs = next;
    }
  }
  // The rest are synthetic: random observations with sparse mutations and
  // random outcome bits, so every predicate is exercised both ways.
  const Capacities caps{5, 2, 2, 2, 2, 3};
  std::bernoulli_distribution flip(0.08), coin(0.5);
  std::uniform_int_distribution<int> tri(0, 2), count(0, caps.nodes);
  while (compared < kLabelRecords) {
    const Observation prev = testing::random_observation(caps, rng);
    Observation next = prev;
    if (flip(rng) || coin(rng)) next.discovered_count = count(rng);
    for (auto& v : next.privilege) {
      if (flip(rng)) v = static_cast<std::uint8_t>(1 - v);
    }
    for (auto& v : next.credentials) {
      if (flip(rng)) v = static_cast<std::uint8_t>(tri(rng));
    }
    next.lateral_move = static_cast<std::uint8_t>(coin(rng));
    const StepOutcome out{coin(rng), coin(rng), coin(rng), coin(rng)};
    compare(prev, LocalExploit{0, 0}, next, out);
  }
  return check.verdict(std::to_string(compared) + " records agree with the re-derived predicates");
}

// ---------------------------------------------------------------------------
// 3. Gradient check
// ---------------------------------------------------------------------------

Verdict gradient_check() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> dim(1, 8), depth(1, 3), count(1, 6);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < kGradNets; ++trial) {
    const NetShape shape{dim(rng), dim(rng), dim(rng), depth(rng)};
    QNetwork net = QNetwork::initialized(shape, static_cast<std::uint64_t>(trial) + 1000);
    for (auto& layer : net.layers()) {
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias(i) = 0.3 * normal(rng);
    }
    const int n = count(rng);
    std::vector<std::vector<double>> xs(static_cast<std::size_t>(n));
    std::vector<TrainSample> batch;
    std::uniform_int_distribution<int> act(0, shape.action_count - 1);
    for (auto& x : xs) {
      x.resize(static_cast<std::size_t>(shape.input_dim));
      for (auto& v : x) v = normal(rng);
    }
    for (const auto& x : xs) batch.push_back({x, static_cast<ActionIndex>(act(rng)), normal(rng)});

    const auto grads = batch_gradients(net, batch);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      auto visit = [&](double* params, const double* analytic, Eigen::Index size) {
        for (Eigen::Index i = 0; i < size; ++i) {
          const double keep = params[i];
          params[i] = keep + h;
          const double up = batch_loss(net, batch);
          params[i] = keep - h;
          const double down = batch_loss(net, batch);
          params[i] = keep;
          const double numeric = (up - down) / (2 * h);
          const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
          worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
        }
      };
      auto& layer = net.layers()[l];
      visit(layer.weight.data(), grads[l].weight.data(), layer.weight.size());
      visit(layer.bias.data(), grads[l].bias.data(), layer.bias.size());
    }
  }
  std::ostringstream s;
  s << kGradNets << " nets, worst relative error " << worst;
  return {worst < kGradTolerance, s.str()};
}

// ---------------------------------------------------------------------------
// 4. Target arithmetic
// ---------------------------------------------------------------------------

Verdict target_arithmetic() {
  Checker check;
  const auto rm = build_rm1();
  const NetShape shape{3, 4, 4, 1};
  QEnsemble nets = QEnsemble::per_state(rm, shape, 0);
  for (auto& net : nets.target_networks()) {
    for (auto& layer : net.layers()) {
      layer.weight.setZero();
      layer.bias.setZero();
    }
  }
  // Target net of u1 tops out at 2.0.
  nets.target_networks()[static_cast<std::size_t>(nets.net_index(1))].layers().back().bias
      << 0.5, 2.0, -3.0, 1.0;

  const Experience bootstrap{{0, 0, 0}, 2, {1, 2, 3}, 2, 1, 1.0};
  const Experience terminal{{0, 0, 0}, 2, {1, 2, 3}, 2, rm.state_id("u3"), 10.0};
  check.expect(td_target(nets, rm, bootstrap, 0.9) == 1.0 + 0.9 * 2.0, "single bootstrap");
  check.expect(td_target(nets, rm, terminal, 0.9) == 10.0, "single terminal");

  ReplayBuffer buffer(4);
  buffer.push(bootstrap);
  buffer.push(terminal);
  const std::vector<std::size_t> idx = {0, 1};
  const auto batch = td_targets(nets, rm, buffer, idx, 0.9);
  check.expect(batch[0] == 1.0 + 0.9 * 2.0, "batched bootstrap");
  check.expect(batch[1] == 10.0, "batched terminal");
  std::ostringstream s;
  s << "target " << batch[0] << " (r=1, gamma=0.9, max Q=2.0); terminal target " << batch[1];
  return check.verdict(s.str());
}

// ---------------------------------------------------------------------------
// 5. Environment oracle
// ---------------------------------------------------------------------------

/// Hand-derived chain model: per hop the attacker must leak the next node's
/// credential (needs Admin on the current node), connect (needs the
/// credential), and escalate (needs a connection). Search over hop progress
/// only, so the optimum follows from counting rather than from the simulator.
int abstract_chain_optimum(int pairs) {
  const int hops = 2 * pairs + 1;
  // stage per hop: 0 nothing, 1 credential known, 2 connected, 3 admin
  std::vector<int> frontier = {0};
  std::set<int> seen = {0};
  for (int depth = 0; !frontier.empty(); ++depth) {
    std::vector<int> next;
    for (int progress : frontier) {
      if (progress == 3 * hops) return depth;
      const int succ = progress + 1;
      if (seen.insert(succ).second) next.push_back(succ);
    }
    frontier = std::move(next);
  }
  return -1;
}

Verdict environment_oracle() {
  Checker check;
  const auto spec = build_chain_env(1);
  const auto& caps = spec.capacities;
  const auto search = testing::shortest_capture(spec, 12);
  check.expect(search.shortest == 9, "exhaustive search found " + std::to_string(search.shortest));
  check.expect(abstract_chain_optimum(1) == 9, "abstract model disagrees");

  // Replay the scripted path; at every prefix, every other action must be a
  // no-op or reach the same successor (a connection launched from another
  // owned node).
  const auto path = testing::chain_capture_path(1);
  auto [state, obs] = reset(spec);
  int no_ops = 0, equivalent = 0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    const ActionIndex chosen = action_to_index(path[t], caps);
    auto [on_path, outcome] = apply_action(state, spec, path[t]);
    check.expect(outcome.success, "path step " + std::to_string(t) + " rejected");
    check.expect(outcome.goal_achieved == (t + 1 == path.size()), "goal timing");
    on_path.last_action_was_lateral_move = false;
    for (ActionIndex k = 0; k < action_space_size(caps); ++k) {
      if (k == chosen) continue;
      auto [succ, out] = apply_action(state, spec, index_to_action(k, caps));
      succ.last_action_was_lateral_move = false;
      EnvState frozen = state;
      frozen.last_action_was_lateral_move = false;
      if (succ == frozen) {
        ++no_ops;
      } else if (succ == on_path) {
        ++equivalent;
      } else {
        check.expect(false, "off-path action " + to_string(index_to_action(k, caps)) +
                                " changes the state at step " + std::to_string(t));
      }
    }
    apply_action_in_place(state, spec, path[t]);
  }
  std::ostringstream s;
  s << "optimum 9 (search over " << search.states_visited << " states, " << search.optimal_paths
    << " optimal sequences); " << no_ops << " off-path no-ops, " << equivalent
    << " equivalent alternate-source connections";
  return check.verdict(s.str());
}

// ---------------------------------------------------------------------------
// 6. Learning smoke test
// ---------------------------------------------------------------------------

Verdict learning_smoke() {
  const auto spec = build_chain_env(1);
  const auto rm = build_rm2();
  int good_seeds = 0;
  std::ostringstream s;
  s << "goals in last 10 per seed:";
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainConfig c;
    c.episodes = 50;
    c.max_steps = 300;
    c.seed = seed;
    const auto result = train(AgentKind::DqrmRm2, spec, rm, c);
    int goals = 0;
    for (std::size_t i = result.episodes.size() - 10; i < result.episodes.size(); ++i) {
      goals += result.episodes[i].goal_reached;
    }
    s << ' ' << goals;
    good_seeds += goals >= 8;
  }
  s << " (" << good_seeds << "/5 seeds at >= 8)";
  return {good_seeds >= 3, s.str()};
}

// ---------------------------------------------------------------------------
// 7. Scaled trend reproduction
// ---------------------------------------------------------------------------

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

Verdict trend_reproduction() {
  const auto spec = build_chain_env(2);
  struct Row {
    AgentKind kind;
    std::vector<double> train_medians, eval_medians;
  };
  std::vector<Row> rows = {{AgentKind::DqrmRm1, {}, {}},
                           {AgentKind::DqnRm1, {}, {}},
                           {AgentKind::DqrmRm2, {}, {}},
                           {AgentKind::DqnRm2, {}, {}}};
  for (auto& row : rows) {
    const auto rm = default_rm_id(row.kind) == "rm1" ? build_rm1() : build_rm2();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      TrainConfig c;  // defaults apart from the shorter action budget
      c.max_steps = 300;
      c.seed = seed;
      const auto result = train(row.kind, spec, rm, c);
      row.train_medians.push_back(cli::median_steps(result.episodes));
      row.eval_medians.push_back(cli::median_steps(evaluate(result.nets, spec, rm, c)));
    }
  }
  const double train_dqrm1 = median_of(rows[0].train_medians);
  const double train_dqrm2 = median_of(rows[2].train_medians);
  const double eval_dqrm1 = median_of(rows[0].eval_medians);
  const double eval_dqn1 = median_of(rows[1].eval_medians);
  const double eval_dqrm2 = median_of(rows[2].eval_medians);
  const double eval_dqn2 = median_of(rows[3].eval_medians);

  std::ostringstream s;
  s << "eval seed-median DQRM_RM1 " << eval_dqrm1 << " vs DQN_RM1 " << eval_dqn1
    << ", DQRM_RM2 " << eval_dqrm2 << " vs DQN_RM2 " << eval_dqn2 << "; train seed-median DQRM_RM2 "
    << train_dqrm2 << " vs DQRM_RM1 " << train_dqrm1;
  for (const auto& row : rows) {
    s << "\n      " << to_string(row.kind) << " train medians:";
    for (double v : row.train_medians) s << ' ' << v;
    s << " | eval medians:";
    for (double v : row.eval_medians) s << ' ' << v;
  }
  const bool ok = eval_dqrm1 <= eval_dqn1 && eval_dqrm2 <= eval_dqn2 && train_dqrm2 <= train_dqrm1;
  return {ok, s.str()};
}

// ---------------------------------------------------------------------------
// 8. Command determinism
// ---------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict command_determinism() {
  Checker check;
  const fs::path root = testing::fresh_temp_dir("acceptance-determinism");
  auto invoke = [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return cli::run(args, out, err);
  };
  auto train_args = [&](const std::string& out) {
    return std::vector<std::string>{"train",   "--agent",     "DQRM_RM1",  "--env",
                                    "chain-1", "--seed",      "7",         "--episodes",
                                    "15",      "--max-steps", "150",       "--seeds",
                                    "2",       "--evaluate",  "--eval-episodes", "3",
                                    "--out",   (root / out).string()};
  };
  check.expect(invoke(train_args("a")) == 0, "first train run");
  check.expect(invoke(train_args("b")) == 0, "second train run");
  int files = 0;
  for (const char* seed_dir : {"seed-0", "seed-1"}) {
    for (const char* f : {"train_episodes.csv", "train_steps.csv", "eval_episodes.csv",
                          "eval_steps.csv", "summary.json", "checkpoint.bin"}) {
      const auto a = slurp(root / "a" / seed_dir / f);
      check.expect(!a.empty(), std::string("missing ") + seed_dir + "/" + f);
      check.expect(a == slurp(root / "b" / seed_dir / f), std::string(seed_dir) + "/" + f);
      ++files;
    }
  }
  check.expect(slurp(root / "a" / "summary.json") == slurp(root / "b" / "summary.json"),
               "merged summary");

  auto eval_args = [&](const std::string& out) {
    return std::vector<std::string>{"eval",   "--agent",   "DQRM_RM1", "--env", "chain-1",
                                    "--seed", "7",         "--eval-episodes", "3",
                                    "--max-steps", "150",  "--checkpoint",
                                    (root / "a" / "seed-0" / "checkpoint.bin").string(),
                                    "--out",  (root / out).string()};
  };
  check.expect(invoke(eval_args("ea")) == 0 && invoke(eval_args("eb")) == 0, "eval runs");
  for (const char* f : {"eval_episodes.csv", "eval_steps.csv", "eval_summary.json"}) {
    check.expect(slurp(root / "ea" / f) == slurp(root / "eb" / f), std::string("eval ") + f);
    ++files;
  }
  return check.verdict(std::to_string(files + 1) + " artifacts byte-identical across reruns");
}

// ---------------------------------------------------------------------------
// 9. Discounted return
// ---------------------------------------------------------------------------

Verdict return_examples() {
  Checker check;
  const double a = compute_return(std::vector<double>{0, 1, 10}, 0.9);
  check.expect(a == 9.0, "[0, 1, 10] at 0.9");
  check.expect(compute_return(std::vector<double>{0, 0, 0, 0, 0}, 0.9) == 0.0, "all zero");
  check.expect(compute_return(std::vector<double>{4, 1, 10}, 0.0) == 4.0, "gamma 0");
  std::ostringstream s;
  s.precision(17);
  s << "G([0,1,10], 0.9) = " << a << "; zeros -> 0; gamma 0 -> first reward";
  return check.verdict(s.str());
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // <= 0 means unbounded
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "Criterion numbers to run")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {1, "reward machine conformance", kRmBudget, rm_conformance},
      {2, "labeling function oracle", kLabelBudget, labeling_oracle},
      {3, "gradient check", kGradBudget, gradient_check},
      {4, "target arithmetic", 0, target_arithmetic},
      {5, "environment oracle", kEnvBudget, environment_oracle},
      {6, "learning smoke test", 0, learning_smoke},
      {7, "scaled trend reproduction", kTrendBudget, trend_reproduction},
      {8, "command determinism", 0, command_determinism},
      {9, "discounted return", 0, return_examples},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      v.pass = false;
      v.detail += " [over budget of " + std::to_string(c.budget_seconds) + " s]";
    }
    failed += !v.pass;
    std::ostringstream t;
    t.precision(3);
    t << std::fixed << secs;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << " (" << t.str()
              << " s): " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
