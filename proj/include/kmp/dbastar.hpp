#pragma once

#include <chrono>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "kmp/dynamics.hpp"
#include "kmp/geometry.hpp"
#include "kmp/metric.hpp"
#include "kmp/motion.hpp"

namespace kmp {

/// The primitive set used by a search: primitives with their collision
/// footprints and a rotational index over their start states. Grows by
/// appending; ids are insertion positions.
class MotionSet {
 public:
  MotionSet(SystemModel system, RobotShape shape, StateMetric metric);

  void add(MotionPrimitive m);
  void add(std::span<const MotionPrimitive> motions);

  std::size_t size() const { return motions_.size(); }
  const MotionPrimitive& operator[](std::size_t i) const { return motions_[i]; }
  const MotionFootprint& footprint(std::size_t i) const { return footprints_[i]; }
  const std::vector<MotionPrimitive>& motions() const { return motions_; }

  /// Ids of primitives whose start state is within `radius` of `x`, ignoring
  /// translation, ascending.
  std::vector<std::size_t> applicable(const State& x, double radius) const;

  const SystemModel& system() const { return system_; }
  const RobotShape& shape() const { return shape_; }
  const StateMetric& metric() const { return metric_; }

 private:
  SystemModel system_;
  RobotShape shape_;
  StateMetric metric_;
  std::vector<MotionPrimitive> motions_;
  std::vector<MotionFootprint> footprints_;
  NearestNeighborIndex index_;
};

/// Straight-line travel time at the system's top speed.
double heuristic(const SystemModel& system, const State& x, const State& goal);

struct DbOptions {
  double delta = 0.0;
  double alpha = 0.5;
  /// Nodes with g + h >= max_cost are neither expanded nor inserted.
  double max_cost = std::numeric_limits<double>::infinity();
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

/// Concatenated primitives with bounded discontinuities.
struct DbSolution {
  Trajectory traj;
  double cost = 0.0;
  /// Primitive ids, one per edge from the start.
  std::vector<std::size_t> motions;
  /// Metric gap at each junction between consecutive primitives, then the gap
  /// at the final state.
  std::vector<double> junction_gaps;
};

struct DbStats {
  std::size_t expansions = 0;
  std::size_t nodes = 0;
  std::size_t rewires = 0;
  bool timed_out = false;
};

struct DbResult {
  std::optional<DbSolution> solution;  // empty: infeasible
  DbStats stats;
};

/// Discontinuity-bounded A*. Primitives are applied from a node when their
/// start is within alpha * delta of its state; a successor within
/// (1 - alpha) * delta of an existing node is merged into it. Returns the first
/// popped node within delta of the goal. An invalid start or goal is
/// infeasible.
DbResult db_astar(const State& start, const State& goal, const Environment& env,
                  const MotionSet& motions, const DbOptions& options);

enum class DbCondition { Dynamics, Control, State, Start, Goal };

struct DbViolation {
  DbCondition condition;
  std::size_t index = 0;
  double value = 0.0;
};

struct DbBoundReport {
  bool ok = false;
  double max_dynamics_gap = 0.0;
  double start_gap = 0.0;
  double goal_gap = 0.0;
  std::vector<DbViolation> violations;
};

/// Checks that a trajectory is delta-discontinuity-bounded: every step gap,
/// start gap and goal gap within delta, controls in bounds and states valid.
/// A relative slack of 1e-9 absorbs rounding in the gap computation.
DbBoundReport check_db_bounded(const SystemModel& system, const StateMetric& metric,
                               const Environment& env, const RobotShape& shape,
                               const Trajectory& traj, double delta, const State& start,
                               const State& goal);

}  // namespace kmp
