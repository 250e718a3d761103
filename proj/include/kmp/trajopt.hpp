#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "kmp/dynamics.hpp"
#include "kmp/geometry.hpp"
#include "kmp/motion.hpp"

namespace kmp {

struct FeasibilityTolerances {
  double dynamics = 1e-4;  // inf-norm of x[k+1] - step(x[k], u[k])
  double bounds = 1e-6;    // control/state bound violation
  double gap = 1e-4;       // start/goal mismatch, inf-norm
};

/// Residuals of every constraint of the fixed-horizon planning problem.
struct FeasibilityReport {
  double dynamics_inf_norm = 0.0;
  double bound_violation = 0.0;
  std::size_t collision_violation = 0;  // states outside the workspace or overlapping obstacles
  double start_gap = 0.0;
  double goal_gap = 0.0;
  bool ok = false;
};

/// `env` may be null for free-space problems.
FeasibilityReport feasibility_report(const SystemModel& system, const Environment* env,
                                     const RobotShape& shape, const Trajectory& traj,
                                     const State& start, const State& goal,
                                     const FeasibilityTolerances& tol = {});

struct OptOptions {
  double smoothness_weight = 1.0;  // per squared control range
  double collision_margin = 1e-3;
  double bound_margin = 1e-4;  // keeps the hitch and workspace bounds strict
  double initial_penalty = 10.0;
  double penalty_growth = 10.0;
  int max_outer = 8;
  int max_inner = 60;
  double inner_tolerance = 1e-6;
  /// Give up once an outer round fails to shrink the violation below
  /// `stall_ratio` times the previous one while it is still above `stall_floor`.
  double stall_ratio = 0.9;
  double stall_floor = 1e-3;
  FeasibilityTolerances tolerances;
};

struct OptProblem {
  const SystemModel* system = nullptr;
  const Environment* env = nullptr;  // null: free space
  const RobotShape* shape = nullptr;
  int horizon = 0;
  State start;
  State goal;
  /// Initial guess with `horizon` steps; may be discontinuous.
  Trajectory guess;
};

struct OptResult {
  Trajectory traj;
  bool converged = false;
  FeasibilityReport residuals;
  int horizon = 0;
  int iterations = 0;  // inner iterations over all outer rounds
  double wall_time = 0.0;
  /// Max constraint violation after each outer round.
  std::vector<double> violation_history;
};

/// Augmented-Lagrangian optimization over the state sequence for a fixed
/// horizon. Start and goal are held fixed; controls are recovered from
/// consecutive states (plus the steering variable for the trailer).
/// Non-convergence is reported through `converged`, never thrown.
OptResult optimize_fixed_horizon(const OptProblem& problem, const OptOptions& options = {});

/// Linear interpolation in time of a guess onto `horizon` steps. Angles are
/// unwrapped before interpolation.
Trajectory resample(const SystemModel& system, const Trajectory& guess, int horizon);

struct TimeSearchResult {
  std::optional<OptResult> best;  // converged result with the smallest horizon
  std::vector<int> tried;
  /// Last iterate of the final attempt, kept for primitive extraction.
  Trajectory last_iterate;
};

/// Tries horizons round(f * T_d) for each factor in ascending order and stops
/// at the first one that converges. Horizons whose duration is not below
/// `cost_bound` are skipped.
TimeSearchResult optimize_with_time_search(
    const OptProblem& problem, int guess_horizon,
    const std::vector<double>& factors = {0.8, 1.0, 1.2},
    double cost_bound = std::numeric_limits<double>::infinity(), const OptOptions& options = {});

struct BvpOptions {
  int min_horizon = 5;
  int max_horizon = 128;
  OptOptions opt;
};

/// Free-space two-point boundary value problem with approximately minimal
/// horizon: exponential search for a converging horizon, then binary search
/// between the last failure and the first success.
std::optional<OptResult> solve_bvp(const SystemModel& system, const State& start, const State& goal,
                                   const BvpOptions& options = {});

/// Straight-line interpolation from `start` to `goal` (shortest rotation).
Trajectory interpolate(const SystemModel& system, const State& start, const State& goal,
                       int horizon);

}  // namespace kmp
