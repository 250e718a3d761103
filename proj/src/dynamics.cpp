#include "kmp/dynamics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace kmp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_dims(const SystemModel& system, const State& x, const Control& u) {
  if (x.size() != system.state_dim || u.size() != system.control_dim) {
    throw std::invalid_argument("dimension mismatch for system " + system.id());
  }
}

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

}  // namespace

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

double SystemModel::max_speed() const {
  switch (kind) {
    case SystemKind::Unicycle1:
    case SystemKind::CarTrailer:
      return std::max(std::abs(u_lo(0)), std::abs(u_hi(0)));
    case SystemKind::Unicycle2:
      return std::max(std::abs(x_lo(3)), std::abs(x_hi(3)));
  }
  return 0.0;
}

SystemModel make_system(std::string_view name, std::string_view variant) {
  SystemModel s;
  s.name = std::string(name);
  s.variant = std::string(variant);
  s.dt = 0.1;

  if (name == "unicycle1") {
    s.kind = SystemKind::Unicycle1;
    s.state_dim = 3;
    s.control_dim = 2;
    s.angular_dims = {2};
    if (variant == "v0") {
      s.u_lo = vec2(-0.5, -0.5);
      s.u_hi = vec2(0.5, 0.5);
    } else if (variant == "v1") {
      s.u_lo = vec2(0.25, -0.5);
      s.u_hi = vec2(0.5, 0.5);
    } else if (variant == "v2") {
      s.u_lo = vec2(0.25, -0.25);
      s.u_hi = vec2(0.5, 0.5);
    } else {
      throw ConfigError("unknown variant '" + std::string(variant) + "' for unicycle1");
    }
  } else if (name == "unicycle2") {
    if (variant != "v0") {
      throw ConfigError("unknown variant '" + std::string(variant) + "' for unicycle2");
    }
    s.kind = SystemKind::Unicycle2;
    s.state_dim = 5;
    s.control_dim = 2;
    s.angular_dims = {2};
    s.u_lo = vec2(-0.25, -0.25);
    s.u_hi = vec2(0.25, 0.25);
  } else if (name == "car_with_trailer") {
    if (variant != "v0") {
      throw ConfigError("unknown variant '" + std::string(variant) + "' for car_with_trailer");
    }
    s.kind = SystemKind::CarTrailer;
    s.state_dim = 4;
    s.control_dim = 2;
    s.angular_dims = {2, 3};
    s.u_lo = vec2(-0.1, -std::numbers::pi / 3.0);
    s.u_hi = vec2(0.5, std::numbers::pi / 3.0);
    s.wheelbase = 0.25;
    s.hitch_length = 0.5;
    s.max_hitch_angle = std::numbers::pi / 4.0;
  } else {
    throw ConfigError("unknown system '" + std::string(name) + "'");
  }

  s.x_lo = Eigen::VectorXd::Constant(s.state_dim, -kInf);
  s.x_hi = Eigen::VectorXd::Constant(s.state_dim, kInf);
  if (s.kind == SystemKind::Unicycle2) {
    s.x_lo(3) = -0.5;
    s.x_hi(3) = 0.5;
    s.x_lo(4) = -0.5;
    s.x_hi(4) = 0.5;
  }
  return s;
}

void normalize(const SystemModel& system, State& x) {
  for (int a : system.angular_dims) x(a) = wrap_angle(x(a));
}

Eigen::VectorXd dynamics(const SystemModel& system, const State& x, const Control& u) {
  require_dims(system, x, u);
  Eigen::VectorXd f(system.state_dim);
  switch (system.kind) {
    case SystemKind::Unicycle1: {
      const double th = x(2);
      f << u(0) * std::cos(th), u(0) * std::sin(th), u(1);
      break;
    }
    case SystemKind::Unicycle2: {
      const double th = x(2);
      const double v = x(3);
      f << v * std::cos(th), v * std::sin(th), x(4), u(0), u(1);
      break;
    }
    case SystemKind::CarTrailer: {
      const double th0 = x(2);
      const double th1 = x(3);
      const double v = u(0);
      f << v * std::cos(th0), v * std::sin(th0), v / system.wheelbase * std::tan(u(1)),
          v / system.hitch_length * std::sin(th0 - th1);
      break;
    }
  }
  return f;
}

State step(const SystemModel& system, const State& x, const Control& u) {
  State next = x + dynamics(system, x, u) * system.dt;
  normalize(system, next);
  return next;
}

StepJacobians step_jacobians(const SystemModel& system, const State& x, const Control& u) {
  require_dims(system, x, u);
  const double dt = system.dt;
  const int n = system.state_dim;
  StepJacobians J{Eigen::MatrixXd::Identity(n, n), Eigen::MatrixXd::Zero(n, system.control_dim)};
  switch (system.kind) {
    case SystemKind::Unicycle1: {
      const double c = std::cos(x(2));
      const double s = std::sin(x(2));
      J.A(0, 2) = -u(0) * s * dt;
      J.A(1, 2) = u(0) * c * dt;
      J.B(0, 0) = c * dt;
      J.B(1, 0) = s * dt;
      J.B(2, 1) = dt;
      break;
    }
    case SystemKind::Unicycle2: {
      const double c = std::cos(x(2));
      const double s = std::sin(x(2));
      const double v = x(3);
      J.A(0, 2) = -v * s * dt;
      J.A(0, 3) = c * dt;
      J.A(1, 2) = v * c * dt;
      J.A(1, 3) = s * dt;
      J.A(2, 4) = dt;
      J.B(3, 0) = dt;
      J.B(4, 1) = dt;
      break;
    }
    case SystemKind::CarTrailer: {
      const double c = std::cos(x(2));
      const double s = std::sin(x(2));
      const double v = u(0);
      const double phi = u(1);
      const double L = system.wheelbase;
      const double d1 = system.hitch_length;
      const double hitch = x(2) - x(3);
      J.A(0, 2) = -v * s * dt;
      J.A(1, 2) = v * c * dt;
      J.A(3, 2) = v / d1 * std::cos(hitch) * dt;
      J.A(3, 3) = 1.0 - v / d1 * std::cos(hitch) * dt;
      const double cphi = std::cos(phi);
      J.B(0, 0) = c * dt;
      J.B(1, 0) = s * dt;
      J.B(2, 0) = std::tan(phi) / L * dt;
      J.B(2, 1) = v / (L * cphi * cphi) * dt;
      J.B(3, 0) = std::sin(hitch) / d1 * dt;
      break;
    }
  }
  return J;
}

std::vector<State> rollout(const SystemModel& system, const State& x0,
                           std::span<const Control> controls) {
  std::vector<State> states;
  states.reserve(controls.size() + 1);
  states.push_back(x0);
  for (const Control& u : controls) states.push_back(step(system, states.back(), u));
  return states;
}

bool control_in_bounds(const SystemModel& system, const Control& u) {
  if (u.size() != system.control_dim) return false;
  for (int i = 0; i < u.size(); ++i) {
    if (!(u(i) >= system.u_lo(i) && u(i) <= system.u_hi(i))) return false;
  }
  return true;
}

bool controls_in_bounds(const SystemModel& system, std::span<const Control> controls) {
  for (const Control& u : controls) {
    if (!control_in_bounds(system, u)) return false;
  }
  return true;
}

bool state_in_bounds(const SystemModel& system, const State& x) {
  if (x.size() != system.state_dim) return false;
  for (int i = system.workspace_dim; i < x.size(); ++i) {
    if (!std::isfinite(x(i))) return false;
    if (x(i) < system.x_lo(i) || x(i) > system.x_hi(i)) return false;
  }
  if (system.kind == SystemKind::CarTrailer) {
    if (!(std::abs(wrap_angle(x(2) - x(3))) < system.max_hitch_angle)) return false;
  }
  return true;
}

Eigen::VectorXd state_difference(const SystemModel& system, const State& a, const State& b) {
  Eigen::VectorXd d = a - b;
  for (int i : system.angular_dims) d(i) = wrap_angle(d(i));
  return d;
}

State translate(const SystemModel& system, const State& x, const Eigen::Vector2d& offset) {
  State y = x;
  y.head(system.workspace_dim) += offset.head(system.workspace_dim);
  return y;
}

}  // namespace kmp
