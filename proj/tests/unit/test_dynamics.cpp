#include <catch_amalgamated.hpp>
#include <numbers>

#include "kmp/dynamics.hpp"
#include "kmp/errors.hpp"
#include "support.hpp"

using namespace kmp;
using Catch::Matchers::WithinAbs;

namespace {

State vec(std::initializer_list<double> v) {
  State x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

}  // namespace

TEST_CASE("unicycle1 Euler step", "[dynamics]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  const State next = step(sys, vec({1.0, 2.0, 0.0}), vec({0.5, 0.2}));
  CHECK_THAT(next(0), WithinAbs(1.05, 1e-15));
  CHECK_THAT(next(1), WithinAbs(2.0, 1e-15));
  CHECK_THAT(next(2), WithinAbs(0.02, 1e-15));
}

TEST_CASE("unicycle2 Euler step integrates velocities", "[dynamics]") {
  const SystemModel sys = make_system("unicycle2");
  const double h = std::numbers::pi / 2;
  const State next = step(sys, vec({0.0, 0.0, h, 0.5, 0.1}), vec({0.1, -0.2}));
  CHECK_THAT(next(0), WithinAbs(0.0, 1e-15));
  CHECK_THAT(next(1), WithinAbs(0.05, 1e-15));
  CHECK_THAT(next(2), WithinAbs(h + 0.01, 1e-15));
  CHECK_THAT(next(3), WithinAbs(0.51, 1e-15));
  CHECK_THAT(next(4), WithinAbs(0.08, 1e-15));
}

TEST_CASE("trailer follows the car", "[dynamics]") {
  const SystemModel sys = make_system("car_with_trailer");
  // tan(pi/4) = 1: the car turns at v / L = 2 rad/s, the aligned trailer not yet.
  const State next = step(sys, vec({0.0, 0.0, 0.0, 0.0}), vec({0.5, std::numbers::pi / 4}));
  CHECK_THAT(next(0), WithinAbs(0.05, 1e-15));
  CHECK_THAT(next(2), WithinAbs(0.2, 1e-15));
  CHECK_THAT(next(3), WithinAbs(0.0, 1e-15));

  const State bent = step(sys, vec({0.0, 0.0, 0.5, 0.0}), vec({0.5, 0.0}));
  CHECK_THAT(bent(3), WithinAbs(0.5 / 0.5 * std::sin(0.5) * 0.1, 1e-15));
}

TEST_CASE("angles wrap to (-pi, pi]", "[dynamics]") {
  const double pi = std::numbers::pi;
  CHECK(wrap_angle(pi) == pi);
  CHECK(wrap_angle(-pi) == pi);
  CHECK_THAT(wrap_angle(1.5 * pi), WithinAbs(-0.5 * pi, 1e-15));
  CHECK_THAT(wrap_angle(7.0), WithinAbs(7.0 - 2 * pi, 1e-15));
  CHECK_THAT(wrap_angle(-20.0), WithinAbs(-20.0 + 6 * pi, 1e-14));

  const SystemModel sys = make_system("unicycle1", "v0");
  const State next = step(sys, vec({0.0, 0.0, pi - 0.01}), vec({0.5, 0.5}));
  CHECK_THAT(next(2), WithinAbs(-pi + 0.04, 1e-14));
}

TEST_CASE("variants carry their control bounds", "[dynamics]") {
  const SystemModel v0 = make_system("unicycle1", "v0");
  const SystemModel v2 = make_system("unicycle1", "v2");
  CHECK(v0.u_lo(1) == -0.5);
  CHECK(v2.u_lo(1) == -0.25);
  CHECK(v2.u_hi(1) == 0.5);
  CHECK(control_in_bounds(v0, vec({0.5, -0.4})));
  CHECK_FALSE(control_in_bounds(v2, vec({0.5, -0.4})));
  CHECK_THROWS_AS(make_system("unicycle1", "v9"), ConfigError);
  CHECK_THROWS_AS(make_system("boat"), ConfigError);
}

TEST_CASE("hitch angle bound", "[dynamics]") {
  const SystemModel sys = make_system("car_with_trailer");
  CHECK(state_in_bounds(sys, vec({0.0, 0.0, 0.3, 0.0})));
  CHECK_FALSE(state_in_bounds(sys, vec({0.0, 0.0, 0.9, 0.0})));
  // Measured across the wrap.
  CHECK(state_in_bounds(sys, vec({0.0, 0.0, 3.1, -3.1})));
}

TEST_CASE("rollout length and dimension checks", "[dynamics]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  const std::vector<Control> u(7, vec({0.5, 0.0}));
  const auto xs = rollout(sys, vec({0.0, 0.0, 0.0}), u);
  REQUIRE(xs.size() == 8);
  CHECK_THAT(xs.back()(0), WithinAbs(0.35, 1e-14));
  CHECK_THROWS(step(sys, vec({0.0, 0.0}), vec({0.5, 0.0})));
}

TEST_CASE("step commutes with workspace translation", "[dynamics]") {
  std::mt19937_64 rng(11);
  for (const char* name : {"unicycle1", "unicycle2", "car_with_trailer"}) {
    const SystemModel sys = make_system(name);
    for (int i = 0; i < 200; ++i) {
      const State x = test::random_state(sys, rng);
      const Control u = test::random_control(sys, rng);
      const Eigen::Vector2d o(test::uniform(rng, -10, 10), test::uniform(rng, -10, 10));
      const State a = step(sys, translate(sys, x, o), u);
      const State b = translate(sys, step(sys, x, u), o);
      CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("step Jacobians match finite differences", "[dynamics]") {
  std::mt19937_64 rng(12);
  for (const char* name : {"unicycle1", "unicycle2", "car_with_trailer"}) {
    const SystemModel sys = make_system(name);
    for (int i = 0; i < 100; ++i) {
      const State x = test::random_state(sys, rng);
      const Control u = test::random_control(sys, rng);
      const StepJacobians J = step_jacobians(sys, x, u);
      // Unwrapped step, so differences never straddle the angle cut.
      auto fx = [&](const Eigen::VectorXd& xx) -> Eigen::VectorXd {
        return xx + dynamics(sys, xx, u) * sys.dt;
      };
      auto fu = [&](const Eigen::VectorXd& uu) -> Eigen::VectorXd {
        return x + dynamics(sys, x, uu) * sys.dt;
      };
      CHECK(test::relative_error(J.A, test::numeric_jacobian(fx, x)) <= 1e-5);
      CHECK(test::relative_error(J.B, test::numeric_jacobian(fu, u)) <= 1e-5);
    }
  }
}
