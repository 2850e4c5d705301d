#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rmpt/cli/manifest.hpp"
#include "rmpt/trainer.hpp"

namespace rmpt::cli {

enum ExitCode : int { kOk = 0, kRuntimeFailure = 1, kUsageError = 2 };

inline constexpr int kMetricsSchema = 1;

struct TrainOptions {
  int seeds = 1;        // fan-out count; runs land in seed-<i>/ when > 1
  int jobs = 0;         // worker threads; 0 = hardware concurrency
  bool evaluate = false;
};

/// Trains one run (or `options.seeds` runs with seeds seed, seed+1, ...) and
/// writes checkpoint.bin, train_episodes.csv, train_steps.csv, summary.json
/// and manifest.json into the output directory.
void cmd_train(const RunManifest& manifest, const TrainOptions& options);

/// Greedy evaluation of a checkpoint. Writes eval_episodes.csv,
/// eval_steps.csv and eval_summary.json into `out_dir`. Throws UsageError
/// before writing anything if the checkpoint does not fit the manifest.
void cmd_eval(const RunManifest& manifest, const std::filesystem::path& checkpoint,
              const std::filesystem::path& out_dir);

struct CompareRow {
  std::string label;
  std::string agent;
  int runs = 0;
  double train_mean = 0.0;
  double train_median = 0.0;
  double eval_mean = 0.0;    // NaN when no run was evaluated
  double eval_median = 0.0;
};

/// Reads the summaries below each run directory. Means are averaged over
/// seeds; medians are the median of the per-seed medians.
std::vector<CompareRow> cmd_compare(std::span<const std::filesystem::path> runs);
void print_compare(std::ostream& out, std::span<const CompareRow> rows, bool csv);
void print_reference_table(std::ostream& out);

/// Writers shared by train and eval.
void write_episodes_csv(const std::filesystem::path& path,
                        std::span<const EpisodeMetrics> episodes, double gamma);
void write_steps_csv(const std::filesystem::path& path, std::span<const EpisodeMetrics> episodes);

/// Mean and median of steps_taken.
double mean_steps(std::span<const EpisodeMetrics> episodes);
double median_steps(std::span<const EpisodeMetrics> episodes);

/// Full command line entry point; returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace rmpt::cli
