#pragma once

// Helpers shared by the unit and acceptance tests. The oracles here are
// written against the definitions, not against the library internals.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "kmp/dbastar.hpp"
#include "kmp/dynamics.hpp"
#include "kmp/geometry.hpp"
#include "kmp/metric.hpp"
#include "kmp/motion.hpp"

namespace kmp::test {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Random state with the position in [lo, hi]^2 and every other component
/// inside its bounds. Trailer hitch angles stay strictly inside the limit.
inline State random_state(const SystemModel& system, std::mt19937_64& rng, double lo = -5.0,
                          double hi = 5.0) {
  State x(system.state_dim);
  for (int i = 0; i < system.state_dim; ++i) {
    switch (system.component(i)) {
      case Component::Translation:
        x(i) = uniform(rng, lo, hi);
        break;
      case Component::Angle:
        x(i) = uniform(rng, -std::numbers::pi, std::numbers::pi);
        break;
      case Component::Velocity:
        x(i) = uniform(rng, system.x_lo(i), system.x_hi(i));
        break;
    }
  }
  if (system.kind == SystemKind::CarTrailer) {
    x(3) = x(2) + uniform(rng, -0.9, 0.9) * system.max_hitch_angle;
  }
  return x;
}

inline Control random_control(const SystemModel& system, std::mt19937_64& rng) {
  Control u(system.control_dim);
  for (int i = 0; i < system.control_dim; ++i) u(i) = uniform(rng, system.u_lo(i), system.u_hi(i));
  return u;
}

/// Central differences, one column per input component.
inline Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

/// Largest entrywise |a - b| / max(1, |b|).
inline double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    return std::numeric_limits<double>::infinity();
  }
  double worst = 0.0;
  for (Eigen::Index r = 0; r < analytic.rows(); ++r) {
    for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
      const double den = std::max(1.0, std::abs(numeric(r, c)));
      worst = std::max(worst, std::abs(analytic(r, c) - numeric(r, c)) / den);
    }
  }
  return worst;
}

/// Weighted distance written out from its definition, for unicycle1 states.
inline double unicycle_distance(const StateMetric& m, const State& a, const State& b) {
  double da = std::fmod(std::abs(a(2) - b(2)), 2.0 * std::numbers::pi);
  da = std::min(da, 2.0 * std::numbers::pi - da);
  return m.translation_weight * std::hypot(a(0) - b(0), a(1) - b(1)) + m.angle_weight * da;
}

inline MotionPrimitive constant_motion(const SystemModel& system, const State& start,
                                       const Control& u, int steps) {
  MotionPrimitive m;
  m.actions.assign(static_cast<std::size_t>(steps), u);
  m.states = rollout(system, start, m.actions);
  m.cost = steps * system.dt;
  return m;
}

/// A planning instance whose primitives start on a heading lattice of 0.25
/// rad. Turning primitives rotate by exactly one lattice step, so chains only
/// connect through exact heading matches and nothing merges for small delta.
struct LatticeInstance {
  SystemModel system = make_system("unicycle1", "v0");
  RobotShape shape = default_shape(make_system("unicycle1", "v0"));
  StateMetric metric;
  Environment env;
  std::vector<MotionPrimitive> motions;
  State start;
  State goal;
  double delta = 0.04;
  double alpha = 0.5;
};

inline std::optional<LatticeInstance> make_lattice_instance(std::mt19937_64& rng,
                                                            int n_motions = 20) {
  LatticeInstance inst;
  const SystemModel& sys = inst.system;
  inst.env.min = Eigen::Vector2d(0.0, 0.0);
  inst.env.max = Eigen::Vector2d(3.0, 3.0);
  const int n_boxes = std::uniform_int_distribution<int>(0, 2)(rng);
  for (int i = 0; i < n_boxes; ++i) {
    Box b;
    b.center = Eigen::Vector2d(uniform(rng, 0.5, 2.5), uniform(rng, 0.5, 2.5));
    b.half = Eigen::Vector2d(uniform(rng, 0.05, 0.3), uniform(rng, 0.05, 0.3));
    inst.env.obstacles.push_back(b);
  }

  std::uniform_int_distribution<int> heading(-2, 2);
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int> length(2, 5);
  for (int i = 0; i < n_motions; ++i) {
    State s = State::Zero(3);
    s(2) = 0.25 * heading(rng);
    const double v = rng() % 2 ? 0.5 : 0.25;
    const int k = kind(rng);
    Control u(2);
    if (k == 0) {
      u << v, 0.0;
      inst.motions.push_back(constant_motion(sys, s, u, length(rng)));
    } else {
      u << v, k == 1 ? 0.5 : -0.5;
      inst.motions.push_back(constant_motion(sys, s, u, 5));
    }
  }

  // The goal is the end of a random valid chain, so the instance is solvable.
  for (int attempt = 0; attempt < 50; ++attempt) {
    State x(3);
    x << uniform(rng, 0.3, 2.7), uniform(rng, 0.3, 2.7),
        inst.motions[rng() % inst.motions.size()].start()(2);
    if (!state_valid(inst.env, inst.shape, sys, x)) continue;
    inst.start = x;
    const int depth = std::uniform_int_distribution<int>(2, 6)(rng);
    int done = 0;
    for (; done < depth; ++done) {
      std::vector<const MotionPrimitive*> options;
      for (const MotionPrimitive& m : inst.motions) {
        if (std::abs(wrap_angle(m.start()(2) - x(2))) < 1e-9 &&
            motion_valid_exhaustive(inst.env, inst.shape, sys, m, position(x))) {
          options.push_back(&m);
        }
      }
      if (options.empty()) break;
      const MotionPrimitive& m = *options[rng() % options.size()];
      x = translate(sys, m.end(), position(x));
    }
    if (done < 2) continue;
    inst.goal = x;
    return inst;
  }
  return std::nullopt;
}

/// Uniform-cost search over the tree of primitive applications, with no
/// merging: the cost of the cheapest delta-bounded chain reaching the goal
/// region, or infinity when none costs less than `max_cost`.
inline double dijkstra_oracle(const LatticeInstance& inst, double max_cost = 60.0) {
  struct Item {
    double g;
    std::size_t order;
    State x;
  };
  auto later = [](const Item& a, const Item& b) {
    return a.g != b.g ? a.g > b.g : a.order > b.order;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(later)> open(later);
  std::vector<State> closed;
  std::size_t order = 0;
  open.push({0.0, order++, inst.start});
  const double expand = inst.alpha * inst.delta;
  while (!open.empty()) {
    Item it = open.top();
    open.pop();
    if (it.g >= max_cost) break;
    bool seen = false;
    for (const State& c : closed) {
      if ((c - it.x).cwiseAbs().maxCoeff() < 1e-9) {
        seen = true;
        break;
      }
    }
    if (seen) continue;
    if (unicycle_distance(inst.metric, it.x, inst.goal) <= inst.delta) return it.g;
    closed.push_back(it.x);
    State origin = it.x;
    origin(0) = origin(1) = 0.0;
    for (const MotionPrimitive& m : inst.motions) {
      if (unicycle_distance(inst.metric, origin, m.start()) > expand) continue;
      if (!motion_valid_exhaustive(inst.env, inst.shape, inst.system, m, position(it.x))) continue;
      open.push({it.g + m.cost, order++, translate(inst.system, m.end(), position(it.x))});
    }
  }
  return std::numeric_limits<double>::infinity();
}

inline MotionSet make_motion_set(const LatticeInstance& inst) {
  MotionSet set(inst.system, inst.shape, inst.metric);
  set.add(inst.motions);
  return set;
}

}  // namespace kmp::test
