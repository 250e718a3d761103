#pragma once

#include <filesystem>
#include <string>

#include "kmp/dynamics.hpp"
#include "kmp/geometry.hpp"
#include "kmp/metric.hpp"

namespace kmp {

/// One planning problem: system, workspace, robot footprint, start and goal.
struct Scenario {
  std::string name;
  SystemModel system;
  Environment env;
  RobotShape shape;
  State start;
  State goal;
  StateMetric metric;
};

/// Reads a scenario YAML file. Schema violations, including a start or goal
/// that is not a valid state, raise FormatError naming the file, line and field.
Scenario load_scenario(const std::filesystem::path& path);

void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace kmp
