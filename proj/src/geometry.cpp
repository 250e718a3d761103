#include "kmp/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "yaml_util.hpp"

namespace kmp {
namespace {

// Swept boxes are grown by this much so the broadphase stays conservative
// under rounding of the translated per-state poses.
constexpr double kSweepSlack = 1e-9;

Eigen::Vector2d rect_extent(double angle, const Eigen::Vector2d& half) {
  const double c = std::abs(std::cos(angle));
  const double s = std::abs(std::sin(angle));
  return {half.x() * c + half.y() * s, half.x() * s + half.y() * c};
}

bool bodies_clear(const std::vector<OrientedRect>& bodies, const Box& box) {
  const Aabb box_bounds = box.bounds();
  for (const OrientedRect& body : bodies) {
    if (!body.bounds().overlaps(box_bounds)) continue;
    if (overlaps(body, box)) return false;
  }
  return true;
}

}  // namespace

void validate_environment(const Environment& env) {
  if (!(env.min.x() < env.max.x() && env.min.y() < env.max.y())) {
    throw ConfigError("environment bounds require min < max componentwise");
  }
  for (std::size_t i = 0; i < env.obstacles.size(); ++i) {
    const Box& b = env.obstacles[i];
    if (!(b.half.x() > 0.0 && b.half.y() > 0.0)) {
      throw ConfigError("obstacle " + std::to_string(i) + " must have a positive size");
    }
  }
}

RobotShape default_shape(const SystemModel& system) {
  RobotShape shape;
  switch (system.kind) {
    case SystemKind::Unicycle1:
    case SystemKind::Unicycle2:
      shape.sizes = {{0.5, 0.25}};
      break;
    case SystemKind::CarTrailer:
      shape.sizes = {{0.25, 0.25}, {0.3, 0.25}};
      break;
  }
  return shape;
}

Aabb OrientedRect::bounds() const {
  const Eigen::Vector2d e = rect_extent(angle, half);
  return {center - e, center + e};
}

std::vector<OrientedRect> body_poses(const SystemModel& system, const RobotShape& shape,
                                     const State& x) {
  std::vector<OrientedRect> bodies;
  bodies.reserve(shape.sizes.size());
  for (std::size_t i = 0; i < shape.sizes.size(); ++i) {
    OrientedRect r;
    r.half = 0.5 * shape.sizes[i];
    if (i == 0) {
      r.center = x.head<2>();
      r.angle = x(2);
    } else {
      const double th1 = x(3);
      r.center = x.head<2>() - system.hitch_length * Eigen::Vector2d(std::cos(th1), std::sin(th1));
      r.angle = th1;
    }
    bodies.push_back(r);
  }
  return bodies;
}

double separation(const OrientedRect& rect, const Box& box) {
  const double c = std::cos(rect.angle);
  const double s = std::sin(rect.angle);
  const double ac = std::abs(c);
  const double as = std::abs(s);
  const Eigen::Vector2d d = box.center - rect.center;
  const double a = rect.half.x();
  const double b = rect.half.y();

  const double gx = std::abs(d.x()) - (a * ac + b * as + box.half.x());
  const double gy = std::abs(d.y()) - (a * as + b * ac + box.half.y());
  const double g1 = std::abs(d.x() * c + d.y() * s) - (a + box.half.x() * ac + box.half.y() * as);
  const double g2 = std::abs(-d.x() * s + d.y() * c) - (b + box.half.x() * as + box.half.y() * ac);
  return std::max(std::max(gx, gy), std::max(g1, g2));
}

bool state_valid(const Environment& env, const RobotShape& shape, const SystemModel& system,
                 const State& x) {
  if (x.size() != system.state_dim) return false;
  if (!env.contains(x.head<2>())) return false;
  if (!state_in_bounds(system, x)) return false;
  const auto bodies = body_poses(system, shape, x);
  for (const Box& box : env.obstacles) {
    if (!bodies_clear(bodies, box)) return false;
  }
  return true;
}

MotionFootprint motion_footprint(const SystemModel& system, const RobotShape& shape,
                                 const MotionPrimitive& motion) {
  MotionFootprint fp;
  for (const State& x : motion.states) {
    fp.positions.extend(Eigen::Vector2d(x.head<2>()));
    for (const OrientedRect& body : body_poses(system, shape, x)) fp.swept.extend(body.bounds());
    fp.states_in_bounds = fp.states_in_bounds && state_in_bounds(system, x);
  }
  fp.swept = fp.swept.inflated(kSweepSlack);
  return fp;
}

bool motion_valid(const Environment& env, const RobotShape& shape, const SystemModel& system,
                  const MotionPrimitive& motion, const MotionFootprint& footprint,
                  const Eigen::Vector2d& offset) {
  if (!footprint.states_in_bounds) return false;
  // The position box lies inside the workspace iff every position does.
  const Aabb positions = footprint.positions.shifted(offset);
  if (!(env.contains(positions.lo) && env.contains(positions.hi))) return false;

  const Aabb swept = footprint.swept.shifted(offset);
  std::vector<const Box*> candidates;
  for (const Box& box : env.obstacles) {
    if (swept.overlaps(box.bounds())) candidates.push_back(&box);
  }
  if (candidates.empty()) return true;

  for (const State& x : motion.states) {
    const auto bodies = body_poses(system, shape, translate(system, x, offset));
    for (const Box* box : candidates) {
      if (!bodies_clear(bodies, *box)) return false;
    }
  }
  return true;
}

bool motion_valid(const Environment& env, const RobotShape& shape, const SystemModel& system,
                  const MotionPrimitive& motion, const Eigen::Vector2d& offset) {
  return motion_valid(env, shape, system, motion, motion_footprint(system, shape, motion), offset);
}

bool motion_valid_exhaustive(const Environment& env, const RobotShape& shape,
                             const SystemModel& system, const MotionPrimitive& motion,
                             const Eigen::Vector2d& offset) {
  return std::all_of(motion.states.begin(), motion.states.end(), [&](const State& x) {
    return state_valid(env, shape, system, translate(system, x, offset));
  });
}

namespace yaml {

Environment parse_environment(const std::string& file, const YAML::Node& node) {
  Environment env;
  const Eigen::VectorXd lo =
      to_vector(file, require(file, node, "min", "environment."), "environment.min", 2);
  const Eigen::VectorXd hi =
      to_vector(file, require(file, node, "max", "environment."), "environment.max", 2);
  env.min = lo;
  env.max = hi;
  if (!(env.min.x() < env.max.x() && env.min.y() < env.max.y())) {
    throw FormatError(where(file, node) + ": environment requires min < max componentwise");
  }
  if (const YAML::Node obstacles = node["obstacles"]) {
    if (!obstacles.IsSequence()) {
      throw FormatError(where(file, obstacles) + ": 'environment.obstacles' must be a list");
    }
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const YAML::Node o = obstacles[i];
      const std::string path = "environment.obstacles[" + std::to_string(i) + "].";
      if (o["type"] && o["type"].as<std::string>() != "box") {
        throw FormatError(where(file, o) + ": only box obstacles are supported");
      }
      Box box;
      box.center = to_vector(file, require(file, o, "center", path), path + "center", 2);
      box.half = 0.5 * to_vector(file, require(file, o, "size", path), path + "size", 2);
      if (!(box.half.x() > 0.0 && box.half.y() > 0.0)) {
        throw FormatError(where(file, o) + ": obstacle size must be positive");
      }
      env.obstacles.push_back(box);
    }
  }
  return env;
}

}  // namespace yaml

Environment load_environment(const std::filesystem::path& path) {
  const std::string file = path.string();
  const YAML::Node root = yaml::load_file(file);
  return yaml::parse_environment(file, yaml::require(file, root, "environment", ""));
}

}  // namespace kmp
