#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "kmp/planner.hpp"
#include "kmp/scenario.hpp"

namespace kmp {

struct TimelinePoint {
  double t = 0.0;  // seconds since the trial started
  double cost = 0.0;
};

/// Per-iteration state of the planner, kept for the monotonicity checks.
struct IterationSummary {
  double delta = 0.0;
  std::size_t motions = 0;
};

struct TrialResult {
  std::string scenario;
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  std::vector<TimelinePoint> timeline;
  std::vector<IterationSummary> iterations;
  /// Last reported solution.
  std::optional<Trajectory> final_traj;
  /// Set when the worker crashed or failed to start; the trial counts as failed.
  std::string error;

  std::optional<double> t_first() const;
  std::optional<double> j_first() const;
  std::optional<double> j_final() const;
};

struct BenchSummary {
  std::string scenario;
  int trials = 0;
  double success_rate = 0.0;
  /// Medians over successful trials; empty when none succeeded.
  std::optional<double> t_first;
  std::optional<double> j_first;
  std::optional<double> j_final;
};

struct BenchOptions {
  int trials = 10;
  double timeout = 300.0;
  std::uint64_t seed = 0;
  int workers = 1;
  /// Libraries are looked up as `<library_dir>/<system>_<variant>.kmplib`.
  std::filesystem::path library_dir;
  PlannerConfig planner;
};

/// Seed of one trial; depends only on its arguments.
std::uint64_t trial_seed(std::uint64_t master, const std::string& scenario, int trial);

/// Median of a non-empty sample; the mean of the middle pair for even sizes.
double median(std::vector<double> values);

/// Runs every (scenario, trial) pair in its own worker process, at most
/// `workers` at a time. Crashed workers are recorded as failed trials. Results
/// are ordered by scenario, then trial.
std::vector<TrialResult> run_benchmark(const std::vector<std::filesystem::path>& scenarios,
                                       const BenchOptions& options);

std::vector<BenchSummary> summarize(const std::vector<TrialResult>& results);

/// One row per trial; absent values are empty fields.
void write_results_csv(const std::vector<TrialResult>& results, const std::filesystem::path& path);
/// Solution timelines of every trial.
void write_timelines_json(const std::vector<TrialResult>& results,
                          const std::filesystem::path& path);
std::vector<TrialResult> read_timelines_json(const std::filesystem::path& path);

}  // namespace kmp
