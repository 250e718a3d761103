#pragma once

#include <vector>

#include "kmp/dynamics.hpp"

namespace kmp {

/// A state/control sequence; `states.size() == actions.size() + 1` unless empty.
struct Trajectory {
  std::vector<State> states;
  std::vector<Control> actions;

  std::size_t steps() const { return actions.size(); }
};

/// A short dynamics-consistent trajectory starting at the workspace origin.
/// `cost` is the duration `steps() * dt` in seconds.
struct MotionPrimitive {
  std::vector<State> states;
  std::vector<Control> actions;
  double cost = 0.0;

  std::size_t steps() const { return actions.size(); }
  const State& start() const { return states.front(); }
  const State& end() const { return states.back(); }
};

}  // namespace kmp
