#include "rmpt/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "rmpt/checkpoint.hpp"
#include "rmpt/env_io.hpp"

namespace rmpt::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double median(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> step_counts(std::span<const EpisodeMetrics> episodes) {
  std::vector<double> out;
  out.reserve(episodes.size());
  for (const auto& e : episodes) out.push_back(e.steps_taken);
  return out;
}

double goal_rate(std::span<const EpisodeMetrics> episodes) {
  if (episodes.empty()) return 0.0;
  const auto goals = std::count_if(episodes.begin(), episodes.end(),
                                   [](const EpisodeMetrics& e) { return e.goal_reached; });
  return static_cast<double>(goals) / static_cast<double>(episodes.size());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing run artifact '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("corrupt run artifact '" + path.string() + "': " + e.what());
  }
}

// NaN has no JSON spelling; it becomes null and reads back as NaN.
double json_number(const json& doc, const char* key) {
  const auto it = doc.find(key);
  return (it == doc.end() || !it->is_number()) ? kNaN : it->get<double>();
}

json eval_stats(std::span<const EpisodeMetrics> episodes) {
  const auto steps = step_counts(episodes);
  return json{{"episodes", episodes.size()},
              {"eval_mean_steps", mean(steps)},
              {"eval_median_steps", median(steps)},
              {"eval_goal_rate", goal_rate(episodes)}};
}

struct Resolved {
  EnvironmentSpec spec;
  RewardMachine machine;
  TrainConfig config;
};

Resolved resolve(const RunManifest& manifest) {
  check_agent_rm(manifest);
  return Resolved{resolve_env(manifest.env_id), resolve_rm(manifest.effective_rm_id()),
                  manifest.config()};
}

std::uint64_t manifest_hash(const RunManifest& m, const Resolved& r) {
  return config_hash(to_string(m.agent), r.spec.capacities, net_shape_for(r.spec, r.config),
                     r.machine.state_count());
}

json train_one(const RunManifest& manifest, const Resolved& r, bool evaluate_after) {
  fs::create_directories(manifest.output_dir);
  TrainResult result = train(manifest.agent, r.spec, r.machine, r.config);

  write_episodes_csv(manifest.output_dir / "train_episodes.csv", result.episodes, r.config.gamma);
  write_steps_csv(manifest.output_dir / "train_steps.csv", result.episodes);

  Checkpoint ckpt{std::string(to_string(manifest.agent)), r.spec.capacities,
                  manifest_hash(manifest, r), std::move(result.nets)};
  save_checkpoint(manifest.output_dir / "checkpoint.bin", ckpt);

  json manifest_doc = manifest.to_json();
  manifest_doc["resolved_config"] = config_to_json(r.config);
  write_text(manifest.output_dir / "manifest.json", manifest_doc.dump(2) + "\n");

  const auto steps = step_counts(result.episodes);
  json summary{{"metrics_schema", kMetricsSchema},
               {"agent", std::string(to_string(manifest.agent))},
               {"env", manifest.env_id},
               {"rm", manifest.effective_rm_id()},
               {"seed", manifest.seed},
               {"episodes", result.episodes.size()},
               {"train_mean_steps", mean(steps)},
               {"train_median_steps", median(steps)},
               {"train_goal_rate", goal_rate(result.episodes)},
               {"final_cumulative_reward", result.episodes.back().total_reward}};
  if (evaluate_after) {
    const auto evals = evaluate(ckpt.nets, r.spec, r.machine, r.config);
    write_episodes_csv(manifest.output_dir / "eval_episodes.csv", evals, r.config.gamma);
    write_steps_csv(manifest.output_dir / "eval_steps.csv", evals);
    summary["eval"] = eval_stats(evals);
  }
  write_text(manifest.output_dir / "summary.json", summary.dump(2) + "\n");
  return summary;
}

json merge_summaries(const RunManifest& manifest, const std::vector<json>& runs) {
  std::vector<double> means, medians, eval_means, eval_medians;
  std::vector<std::uint64_t> seeds;
  for (const auto& run : runs) {
    seeds.push_back(run["seed"].get<std::uint64_t>());
    means.push_back(json_number(run, "train_mean_steps"));
    medians.push_back(json_number(run, "train_median_steps"));
    if (run.contains("eval")) {
      eval_means.push_back(json_number(run["eval"], "eval_mean_steps"));
      eval_medians.push_back(json_number(run["eval"], "eval_median_steps"));
    }
  }
  json merged{{"metrics_schema", kMetricsSchema},
              {"agent", std::string(to_string(manifest.agent))},
              {"env", manifest.env_id},
              {"rm", manifest.effective_rm_id()},
              {"seeds", seeds},
              {"train_mean_steps", mean(means)},
              {"train_median_steps", median(medians)},
              {"runs", runs}};
  if (!eval_means.empty()) {
    merged["eval"] = json{{"eval_mean_steps", mean(eval_means)},
                          {"eval_median_steps", median(eval_medians)}};
  }
  return merged;
}

/// Per-seed summaries of a run directory, whether single or fanned out.
std::vector<json> load_run_summaries(const fs::path& dir) {
  json top = read_json(dir / "summary.json");
  if (top.contains("runs")) return top["runs"].get<std::vector<json>>();
  if (!top.contains("eval") && fs::exists(dir / "eval_summary.json")) {
    top["eval"] = read_json(dir / "eval_summary.json");
  }
  return {top};
}

}  // namespace

double mean_steps(std::span<const EpisodeMetrics> episodes) {
  return mean(step_counts(episodes));
}

double median_steps(std::span<const EpisodeMetrics> episodes) {
  return median(step_counts(episodes));
}

void write_episodes_csv(const fs::path& path, std::span<const EpisodeMetrics> episodes,
                        double gamma) {
  std::ostringstream out;
  out << "episode,steps,goal_reached,total_reward,discounted_return,final_rm_state\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& e = episodes[i];
    const auto rewards = e.rewards();
    out << i << ',' << e.steps_taken << ',' << (e.goal_reached ? 1 : 0) << ','
        << format_double(e.total_reward) << ',' << format_double(compute_return(rewards, gamma))
        << ',' << e.rm_trajectory.back() << '\n';
  }
  write_text(path, out.str());
}

void write_steps_csv(const fs::path& path, std::span<const EpisodeMetrics> episodes) {
  std::ostringstream out;
  out << "episode,step,cumulative_reward,rm_state,action_index,event_symbols\n";
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    for (const auto& s : episodes[i].steps) {
      out << i << ',' << s.step << ',' << format_double(s.cumulative_reward) << ','
          << s.rm_state << ',' << s.action << ',' << s.events.to_string() << '\n';
    }
  }
  write_text(path, out.str());
}

void cmd_train(const RunManifest& manifest, const TrainOptions& options) {
  if (options.seeds < 1) throw UsageError("--seeds must be at least 1");
  const Resolved resolved = resolve(manifest);

  if (options.seeds == 1) {
    train_one(manifest, resolved, options.evaluate);
    return;
  }

  std::vector<RunManifest> runs;
  for (int i = 0; i < options.seeds; ++i) {
    RunManifest m = manifest;
    m.seed = manifest.seed + static_cast<std::uint64_t>(i);
    m.output_dir = manifest.output_dir / ("seed-" + std::to_string(i));
    m.config();  // validates before any thread starts
    runs.push_back(std::move(m));
  }

  std::vector<json> summaries(runs.size());
  std::vector<std::exception_ptr> errors(runs.size());
  std::size_t next = 0;
  std::mutex lock;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> guard(lock);
        if (next == runs.size()) return;
        i = next++;
      }
      try {
        Resolved r = resolved;
        r.config.seed = runs[i].seed;
        summaries[i] = train_one(runs[i], r, options.evaluate);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const auto jobs = std::min<std::size_t>(options.jobs > 0 ? options.jobs : hw, runs.size());
  std::vector<std::thread> pool;
  for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  write_text(manifest.output_dir / "summary.json",
             merge_summaries(manifest, summaries).dump(2) + "\n");
}

void cmd_eval(const RunManifest& manifest, const fs::path& checkpoint_path,
              const fs::path& out_dir) {
  const Resolved r = resolve(manifest);
  Checkpoint ckpt;
  try {
    ckpt = load_checkpoint(checkpoint_path);
  } catch (const CheckpointError& e) {
    throw UsageError(std::string("checkpoint: ") + e.what());
  }
  if (ckpt.config_hash != manifest_hash(manifest, r) || ckpt.capacities != r.spec.capacities) {
    throw UsageError("checkpoint '" + checkpoint_path.string() +
                     "' was trained under a different configuration (config hash mismatch)");
  }
  const auto evals = evaluate(ckpt.nets, r.spec, r.machine, r.config);
  fs::create_directories(out_dir);
  write_episodes_csv(out_dir / "eval_episodes.csv", evals, r.config.gamma);
  write_steps_csv(out_dir / "eval_steps.csv", evals);
  json summary = eval_stats(evals);
  summary["metrics_schema"] = kMetricsSchema;
  summary["agent"] = std::string(to_string(manifest.agent));
  summary["env"] = manifest.env_id;
  write_text(out_dir / "eval_summary.json", summary.dump(2) + "\n");
}

std::vector<CompareRow> cmd_compare(std::span<const fs::path> runs) {
  if (runs.size() < 2) throw UsageError("compare needs at least two runs");
  std::vector<CompareRow> rows;
  for (const auto& dir : runs) {
    const auto summaries = load_run_summaries(dir);
    std::vector<double> means, medians, eval_means, eval_medians;
    for (const auto& s : summaries) {
      means.push_back(json_number(s, "train_mean_steps"));
      medians.push_back(json_number(s, "train_median_steps"));
      if (s.contains("eval")) {
        eval_means.push_back(json_number(s["eval"], "eval_mean_steps"));
        eval_medians.push_back(json_number(s["eval"], "eval_median_steps"));
      }
    }
    CompareRow row;
    row.label = dir.filename().empty() ? dir.parent_path().filename().string()
                                       : dir.filename().string();
    row.agent = summaries.front().value("agent", "?");
    row.runs = static_cast<int>(summaries.size());
    row.train_mean = mean(means);
    row.train_median = median(medians);
    row.eval_mean = mean(eval_means);
    row.eval_median = median(eval_medians);
    rows.push_back(std::move(row));
  }
  return rows;
}

void print_compare(std::ostream& out, std::span<const CompareRow> rows, bool csv) {
  auto cell = [](double v) { return std::isnan(v) ? std::string("-") : format_double(v); };
  if (csv) {
    out << "run,agent,seeds,train_mean,train_median,eval_mean,eval_median\n";
    for (const auto& r : rows) {
      out << r.label << ',' << r.agent << ',' << r.runs << ',' << cell(r.train_mean) << ','
          << cell(r.train_median) << ',' << cell(r.eval_mean) << ',' << cell(r.eval_median)
          << '\n';
    }
    return;
  }
  out << std::left << std::setw(20) << "run" << std::setw(10) << "agent" << std::right
      << std::setw(6) << "seeds" << std::setw(12) << "train_mean" << std::setw(13)
      << "train_median" << std::setw(11) << "eval_mean" << std::setw(12) << "eval_median"
      << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    auto num = [&](double v, int w) {
      if (std::isnan(v)) {
        out << std::setw(w) << "-";
      } else {
        out << std::setw(w) << v;
      }
    };
    out << std::left << std::setw(20) << r.label << std::setw(10) << r.agent << std::right
        << std::setw(6) << r.runs;
    num(r.train_mean, 12);
    num(r.train_median, 13);
    num(r.eval_mean, 11);
    num(r.eval_median, 12);
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void print_reference_table(std::ostream& out) {
  // Mean steps reported for the two-pair chain; not reproduced here.
  out << "reference (chain, mean steps)\n"
      << "agent       train     eval\n"
      << "DQRM_RM1   186.13    23.48\n"
      << "DQRM_RM2   104.48    21.32\n"
      << "DQN_RM1    374.71    29.76\n"
      << "DQN_RM2    218.39   767.46\n";
}

namespace {

struct ManifestFlags {
  std::string manifest_path;
  std::string agent, env, rm, out;
  std::optional<std::uint64_t> seed;
  bool allow_rm_mismatch = false;
  std::optional<int> episodes, max_steps, eval_episodes;
  std::string optimizer;
  std::vector<std::string> sets;

  void attach(CLI::App& app) {
    app.add_option("--manifest", manifest_path, "JSON run manifest");
    app.add_option("--agent", agent, "DQRM_RM1, DQN_RM1, DQRM_RM2 or DQN_RM2");
    app.add_option("--env", env, "chain-N, toyctf, or an environment document");
    app.add_option("--rm", rm, "rm1, rm2, or a reward machine document");
    app.add_flag("--allow-rm-mismatch", allow_rm_mismatch,
                 "Permit a reward machine other than the agent's own");
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--out", out, "Output directory");
    app.add_option("--episodes", episodes, "Training episodes");
    app.add_option("--max-steps", max_steps, "Action budget per episode");
    app.add_option("--eval-episodes", eval_episodes, "Evaluation episodes");
    app.add_option("--optimizer", optimizer, "adam or sgd");
    app.add_option("--set", sets, "Config override key=value (value in JSON)");
  }

  RunManifest build() const {
    RunManifest m = manifest_path.empty() ? RunManifest{} : RunManifest::load(manifest_path);
    if (!agent.empty()) {
      const auto kind = parse_agent_kind(agent);
      if (!kind) throw UsageError("field 'agent': unknown agent kind '" + agent + "'");
      m.agent = *kind;
    }
    if (!env.empty()) m.env_id = env;
    if (!rm.empty()) m.rm_id = rm;
    if (allow_rm_mismatch) m.allow_rm_mismatch = true;
    if (seed) m.seed = *seed;
    if (!out.empty()) m.output_dir = out;
    if (episodes) m.overrides["episodes"] = *episodes;
    if (max_steps) m.overrides["max_steps"] = *max_steps;
    if (eval_episodes) m.overrides["eval_episodes"] = *eval_episodes;
    if (!optimizer.empty()) m.overrides["optimizer"] = optimizer;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      json value;
      try {
        value = json::parse(s.substr(eq + 1));
      } catch (const json::parse_error&) {
        value = s.substr(eq + 1);
      }
      m.overrides[s.substr(0, eq)] = value;
    }
    return RunManifest::from_json(m.to_json());
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reward-machine guided penetration testing agents"};
  app.require_subcommand(1);

  ManifestFlags train_flags;
  TrainOptions train_options;
  auto* train_cmd = app.add_subcommand("train", "Train an agent and write run artifacts");
  train_flags.attach(*train_cmd);
  train_cmd->add_option("--seeds", train_options.seeds, "Independent runs with seeds seed+i");
  train_cmd->add_option("--jobs", train_options.jobs, "Parallel runs (0 = all cores)");
  train_cmd->add_flag("--evaluate", train_options.evaluate, "Run greedy evaluation afterwards");

  ManifestFlags eval_flags;
  std::string checkpoint_path;
  std::string eval_out;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint greedily");
  eval_flags.attach(*eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  eval_cmd->add_option("--eval-out", eval_out, "Evaluation output directory (default: --out)");

  std::vector<std::string> compare_dirs;
  bool compare_csv = false;
  bool compare_reference = false;
  auto* compare_cmd = app.add_subcommand("compare", "Tabulate completed runs");
  compare_cmd->add_option("runs", compare_dirs, "Run directories")->required();
  compare_cmd->add_flag("--csv", compare_csv, "Comma separated output");
  compare_cmd->add_flag("--reference", compare_reference, "Also print the reference table");

  std::string env_kind;
  int chain_pairs = 1;
  std::string env_output;
  auto* gen_cmd = app.add_subcommand("gen-env", "Emit a bundled environment document");
  gen_cmd->add_option("kind", env_kind, "chain or toyctf")
      ->required()
      ->check(CLI::IsMember({"chain", "toyctf"}));
  gen_cmd->add_option("--n", chain_pairs, "Chain size")->check(CLI::PositiveNumber);
  gen_cmd->add_option("-o,--output", env_output, "Write to a file instead of stdout");

  std::string rm_arg;
  auto* validate_cmd = app.add_subcommand("validate-rm", "Load and check a reward machine");
  validate_cmd->add_option("machine", rm_arg, "rm1, rm2 or a document path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    if (*train_cmd) {
      cmd_train(train_flags.build(), train_options);
    } else if (*eval_cmd) {
      const RunManifest m = eval_flags.build();
      cmd_eval(m, checkpoint_path, eval_out.empty() ? m.output_dir : fs::path(eval_out));
    } else if (*compare_cmd) {
      std::vector<fs::path> dirs(compare_dirs.begin(), compare_dirs.end());
      print_compare(out, cmd_compare(dirs), compare_csv);
      if (compare_reference) print_reference_table(out);
    } else if (*gen_cmd) {
      const EnvironmentSpec spec =
          env_kind == "toyctf" ? build_toyctf_env() : build_chain_env(chain_pairs);
      const std::string doc = save_env_spec(spec);
      if (env_output.empty()) {
        out << doc;
      } else {
        write_text(env_output, doc);
      }
    } else if (*validate_cmd) {
      const RewardMachine m = (rm_arg == "rm1" || rm_arg == "rm2")
                                  ? resolve_rm(rm_arg)
                                  : load_rm_document(read_file(rm_arg));
      out << "ok: " << m.state_count() << " states, " << m.transitions().size()
          << " transitions, events {" << m.event_set().to_string() << "}, initial "
          << m.state_name(m.initial()) << '\n';
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const RewardMachineError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeFailure;
  }
  return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"rmpt"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace rmpt::cli
