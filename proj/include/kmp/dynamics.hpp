#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "kmp/errors.hpp"

namespace kmp {

/// Inline storage up to the largest state; no heap traffic in the search.
inline constexpr int kMaxStateDim = 6;
using State = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxStateDim, 1>;
using Control = State;

enum class SystemKind { Unicycle1, Unicycle2, CarTrailer };

/// How a state component is treated by metrics and bounds.
enum class Component { Translation, Angle, Velocity };

/// A translation-invariant system discretized with an explicit Euler step.
///
/// The first `workspace_dim` state components are the workspace position and
/// never enter the continuous dynamics. Angular components are kept wrapped to
/// (-pi, pi]. `x_lo`/`x_hi` bound the velocity-like components only; angles
/// and translation carry infinite bounds here (translation is limited by the
/// environment).
struct SystemModel {
  std::string name;
  std::string variant;
  SystemKind kind = SystemKind::Unicycle1;
  int state_dim = 3;
  int control_dim = 2;
  int workspace_dim = 2;
  std::vector<int> angular_dims;
  Eigen::VectorXd u_lo;
  Eigen::VectorXd u_hi;
  Eigen::VectorXd x_lo;
  Eigen::VectorXd x_hi;
  double dt = 0.1;

  // Car with trailer constants.
  double wheelbase = 0.25;
  double hitch_length = 0.5;
  double max_hitch_angle = 0.0;

  /// "name_variant", used for library file names and headers.
  std::string id() const { return name + "_" + variant; }

  Component component(int i) const {
    if (i < workspace_dim) return Component::Translation;
    for (int a : angular_dims) {
      if (a == i) return Component::Angle;
    }
    return Component::Velocity;
  }

  /// Upper bound on the translational speed reachable by the system.
  double max_speed() const;
};

SystemModel make_system(std::string_view name, std::string_view variant = "v0");

/// Wraps an angle to (-pi, pi].
double wrap_angle(double a);

/// Wraps the angular components of `x` in place.
void normalize(const SystemModel& system, State& x);

/// x + f(x^r, u) * dt with angular components renormalized.
State step(const SystemModel& system, const State& x, const Control& u);

/// Continuous dynamics f(x^r, u).
Eigen::VectorXd dynamics(const SystemModel& system, const State& x, const Control& u);

struct StepJacobians {
  Eigen::MatrixXd A;  // d step / d x
  Eigen::MatrixXd B;  // d step / d u
};

StepJacobians step_jacobians(const SystemModel& system, const State& x, const Control& u);

/// States visited by applying `controls` from `x0`; size |controls| + 1.
std::vector<State> rollout(const SystemModel& system, const State& x0,
                           std::span<const Control> controls);

bool control_in_bounds(const SystemModel& system, const Control& u);
bool controls_in_bounds(const SystemModel& system, std::span<const Control> controls);

/// Bounds on the non-translational components, including the trailer hitch
/// constraint |angle(theta0, theta1)| < max_hitch_angle.
bool state_in_bounds(const SystemModel& system, const State& x);

/// Component-wise difference a - b with angular components wrapped.
Eigen::VectorXd state_difference(const SystemModel& system, const State& a, const State& b);

/// Returns `x` with `offset` added to the workspace components.
State translate(const SystemModel& system, const State& x, const Eigen::Vector2d& offset);

inline Eigen::Vector2d position(const State& x) { return x.head<2>(); }

}  // namespace kmp
