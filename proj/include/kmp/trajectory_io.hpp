#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "kmp/motion.hpp"
#include "kmp/trajopt.hpp"

namespace kmp {

inline constexpr int kTrajectoryVersion = 1;

/// Contents of a trajectory JSON file.
struct TrajectoryFile {
  std::string system;
  std::string variant;
  double dt = 0.1;
  Trajectory traj;
  double cost = 0.0;  // steps * dt
  std::optional<FeasibilityReport> residuals;
  /// Discontinuity bound of a db-A* guess.
  std::optional<double> delta;
};

TrajectoryFile make_trajectory_file(const SystemModel& system, const Trajectory& traj);

void save_trajectory(const TrajectoryFile& file, const std::filesystem::path& path);

/// Raises FormatError on schema violations, naming the offending field.
TrajectoryFile load_trajectory(const std::filesystem::path& path);

}  // namespace kmp
