#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kmp/primitives.hpp"
#include "kmp/scenario.hpp"
#include "kmp/trajopt.hpp"

namespace kmp {

struct PlannerConfig {
  int b_d = 20;
  double alpha = 0.5;
  /// Library primitives added in iteration n (1-based) is schedule[n-1]; past
  /// the end of the list the last entry repeats. Empty: base_chunk * 2^(n-1).
  std::vector<int> schedule;
  int base_chunk = 100;
  /// Upper bound on freshly generated primitives per iteration once the
  /// library is exhausted.
  int fresh_chunk = 50;
  int piece_length = 5;
  double timeout = 300.0;  // seconds
  std::vector<double> time_factors{0.8, 1.0, 1.2};
  int delta_samples = 100;
  std::uint64_t seed = 0;
  /// Stop after this many iterations; 0 runs until the timeout.
  int max_iterations = 0;
  OptOptions opt;
  GenerationOptions generation;
};

/// Throws ConfigError naming the first invalid field.
void validate_config(const PlannerConfig& config);

/// Number of primitives requested in iteration n >= 1.
int chunk_size(const PlannerConfig& config, int n);

struct Solution {
  Trajectory traj;
  int horizon = 0;
  double cost = 0.0;      // horizon * dt
  double found_at = 0.0;  // seconds since the run started
  int iteration = 0;
  FeasibilityReport residuals;
};

enum class SearchOutcome { Found, Infeasible, TimedOut };
/// TimedOut: converged, but only after the run's deadline; the result is dropped.
enum class RepairOutcome { Skipped, Converged, Failed, TimedOut };

const char* to_string(SearchOutcome o);
const char* to_string(RepairOutcome o);

/// One planner iteration. Holds no wall-clock data, so equal inputs give
/// equal records; timings live in IterationTiming.
struct IterationRecord {
  int iteration = 0;
  std::size_t library_added = 0;
  std::size_t generated = 0;
  std::size_t motions = 0;  // |M| used by the search
  double delta = 0.0;
  double cost_bound_before = 0.0;  // c_max passed to the search
  SearchOutcome search = SearchOutcome::Infeasible;
  std::size_t expansions = 0;
  std::size_t nodes = 0;
  int guess_horizon = 0;
  RepairOutcome repair = RepairOutcome::Skipped;
  std::vector<int> horizons_tried;
  int horizon = 0;  // converged horizon, 0 if none
  std::size_t extracted = 0;
  double cost_bound = 0.0;  // c_max after the iteration
};

struct IterationTiming {
  double search = 0.0;
  double repair = 0.0;
  double generation = 0.0;
  double end = 0.0;  // seconds since the run started
};

struct RunTrace {
  std::string scenario;
  std::string system;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> iterations;
  std::vector<IterationTiming> timings;
};

/// Deterministic JSON of the iteration records. Infinite bounds are written
/// as null.
std::string trace_json(const RunTrace& trace);
/// Per-iteration wall times, kept apart from the trace.
std::string timings_json(const RunTrace& trace);

struct PlanResult {
  std::optional<Solution> best;
  std::vector<Solution> solutions;  // in the order reported
  RunTrace trace;
};

using SolutionCallback = std::function<void(const Solution&)>;

/// Online primitive extraction from an optimizer iterate: every maximal run of
/// steps satisfying the dynamics and bound tolerances is re-simulated from its
/// first state and split into pieces.
std::vector<MotionPrimitive> extract_online(const SystemModel& system, const Trajectory& iterate,
                                            int piece_length,
                                            const FeasibilityTolerances& tol = {});

/// Anytime planner: alternates discontinuity-bounded search over a growing
/// primitive set with trajectory optimization, reporting each solution cheaper
/// than all earlier ones through `on_solution`. Stops early once no horizon
/// between the straight-line lower bound and the best cost remains. Running
/// out of time without a solution is not an error. Throws ConfigError on an invalid config or a
/// library for another system.
PlanResult kmp_db_astar(const Scenario& scenario, const PrimitiveLibrary& library,
                        const PlannerConfig& config, const SolutionCallback& on_solution = {});

}  // namespace kmp
