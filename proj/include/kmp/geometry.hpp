#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "kmp/dynamics.hpp"
#include "kmp/motion.hpp"

namespace kmp {

struct Aabb {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = Eigen::Vector2d::Constant(-std::numeric_limits<double>::infinity());

  void extend(const Eigen::Vector2d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  void extend(const Aabb& other) {
    lo = lo.cwiseMin(other.lo);
    hi = hi.cwiseMax(other.hi);
  }
  Aabb shifted(const Eigen::Vector2d& offset) const { return {lo + offset, hi + offset}; }
  Aabb inflated(double r) const {
    return {lo - Eigen::Vector2d::Constant(r), hi + Eigen::Vector2d::Constant(r)};
  }
  bool overlaps(const Aabb& o) const {
    return lo.x() <= o.hi.x() && o.lo.x() <= hi.x() && lo.y() <= o.hi.y() && o.lo.y() <= hi.y();
  }
};

/// Axis-aligned obstacle box.
struct Box {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d half = Eigen::Vector2d::Zero();

  Aabb bounds() const { return {center - half, center + half}; }
};

struct Environment {
  Eigen::Vector2d min = Eigen::Vector2d::Zero();
  Eigen::Vector2d max = Eigen::Vector2d::Zero();
  std::vector<Box> obstacles;

  bool contains(const Eigen::Vector2d& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
};

/// Throws ConfigError unless min < max and every half-extent is positive.
void validate_environment(const Environment& env);

/// Rectangle dimensions (length along the heading, width) of every rigid body.
/// Body 0 is centered on the state position; a second body is the trailer,
/// centered `hitch_length` behind the car along theta1.
struct RobotShape {
  std::vector<Eigen::Vector2d> sizes;
};

RobotShape default_shape(const SystemModel& system);

struct OrientedRect {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double angle = 0.0;
  Eigen::Vector2d half = Eigen::Vector2d::Zero();

  Aabb bounds() const;
};

std::vector<OrientedRect> body_poses(const SystemModel& system, const RobotShape& shape,
                                     const State& x);

/// Largest gap between the projections of the two shapes over the four
/// separating axes. Positive iff the shapes are disjoint; when they overlap
/// the value is minus the penetration depth.
double separation(const OrientedRect& rect, const Box& box);

inline bool overlaps(const OrientedRect& rect, const Box& box) {
  return separation(rect, box) <= 0.0;
}

bool state_valid(const Environment& env, const RobotShape& shape, const SystemModel& system,
                 const State& x);

/// Collision data precomputed once per primitive: the box spanned by the
/// workspace positions and the box swept by every body.
struct MotionFootprint {
  Aabb positions;
  Aabb swept;
  bool states_in_bounds = true;
};

MotionFootprint motion_footprint(const SystemModel& system, const RobotShape& shape,
                                 const MotionPrimitive& motion);

/// True iff every state of `motion` shifted by `offset` is valid. The
/// translated footprint is tested first; per-state checks only run against
/// obstacles the swept box touches.
bool motion_valid(const Environment& env, const RobotShape& shape, const SystemModel& system,
                  const MotionPrimitive& motion, const MotionFootprint& footprint,
                  const Eigen::Vector2d& offset);

bool motion_valid(const Environment& env, const RobotShape& shape, const SystemModel& system,
                  const MotionPrimitive& motion, const Eigen::Vector2d& offset);

/// Per-state check of every state, no broadphase.
bool motion_valid_exhaustive(const Environment& env, const RobotShape& shape,
                             const SystemModel& system, const MotionPrimitive& motion,
                             const Eigen::Vector2d& offset);

/// Reads the `environment` section of a scenario file.
Environment load_environment(const std::filesystem::path& path);

}  // namespace kmp
