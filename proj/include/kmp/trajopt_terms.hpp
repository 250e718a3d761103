#pragma once

// Differentiable constraint terms used by the trajectory optimizer. Exposed so
// their analytic derivatives can be checked against finite differences.

#include <Eigen/Dense>

#include "kmp/dynamics.hpp"
#include "kmp/geometry.hpp"

namespace kmp::terms {

/// Number of per-step decision variables beyond the states (trailer: steering).
int extra_dim(const SystemModel& system);

/// Number of equality residuals per transition.
int equality_dim(const SystemModel& system);

/// One Euler transition x0 -> x1 with optional extra variables `e`. Angles
/// are taken unwrapped (no wrapping inside), so every term is smooth.
// Fixed capacity keeps the per-step terms off the heap.
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 5, 1>;
using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 5, 5>;

struct Transition {
  SmallVector h;  // dynamics residuals, zero iff x1 = step(x0, u)
  SmallVector u;  // controls implied by (x0, x1, e)
  SmallMatrix dh_dx0, dh_dx1, dh_de;
  SmallMatrix du_dx0, du_dx1, du_de;
};

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

Transition transition(const SystemModel& system, const VectorRef& x0, const VectorRef& x1,
                      const VectorRef& e);

/// Body pose as a function of the state, with derivatives of the center and
/// angle with respect to the state.
struct BodyPose {
  OrientedRect rect;
  Eigen::Matrix<double, 2, Eigen::Dynamic, 0, 2, 5> dcenter_dx;
  Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, 5> dangle_dx;
};

BodyPose body_pose(const SystemModel& system, const RobotShape& shape, std::size_t body,
                   const VectorRef& x);

/// Separation (see kmp::separation) and its gradient with respect to the
/// rectangle center (2) and angle (1).
struct SeparationGradient {
  double value = 0.0;
  Eigen::Vector2d dcenter = Eigen::Vector2d::Zero();
  double dangle = 0.0;
};

SeparationGradient separation_gradient(const OrientedRect& rect, const Box& box);

/// Separation of one body from one box as a function of the full state.
struct StateSeparation {
  double value = 0.0;
  Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, 5> dx;
};

StateSeparation state_separation(const SystemModel& system, const RobotShape& shape,
                                 std::size_t body, const Box& box, const VectorRef& x);

}  // namespace kmp::terms
