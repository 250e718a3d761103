#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kmp/dynamics.hpp"
#include "kmp/metric.hpp"
#include "kmp/motion.hpp"
#include "kmp/trajopt.hpp"

namespace kmp {

inline constexpr int kLibraryVersion = 1;
inline constexpr double kPrimitiveTolerance = 1e-9;

/// Primitives for one system in dispersion order.
struct PrimitiveLibrary {
  std::string system;
  std::string variant;
  StateMetric metric;
  int version = kLibraryVersion;
  std::vector<MotionPrimitive> primitives;
};

/// Starts at the workspace origin, dynamics residual within
/// kPrimitiveTolerance, every control and state in bounds, cost = steps * dt.
bool validate_primitive(const SystemModel& system, const MotionPrimitive& m);

/// Max-norm of x[k+1] - step(x[k], u[k]) over the sequence.
double dynamics_residual(const SystemModel& system, std::span<const State> states,
                         std::span<const Control> actions);

/// Uniform position in [-half_extent, half_extent]^2, uniform angles and
/// velocities, resampled until the state is within bounds.
State sample_state(const SystemModel& system, std::mt19937_64& rng, double half_extent = 2.0);

/// Chunks of at most `piece_length` steps, each shifted to start at the
/// origin. A trailing chunk shorter than two steps is dropped, as is any
/// chunk failing validate_primitive.
std::vector<MotionPrimitive> split_motion(const SystemModel& system, std::span<const State> states,
                                          std::span<const Control> actions, int piece_length);

/// Splits every maximal run of valid transitions of a possibly infeasible
/// trajectory into primitives.
std::vector<MotionPrimitive> extract_primitives(const SystemModel& system,
                                                std::span<const State> states,
                                                std::span<const Control> actions, int piece_length);

struct GenerationOptions {
  BvpOptions bvp;
  double half_extent = 2.0;
  /// Attempts before the failure rate is judged.
  int min_attempts = 20;
  double max_failure_rate = 0.95;
};

/// Exactly `count` primitives from random free-space boundary value problems.
/// Deterministic for a given seed.
std::vector<MotionPrimitive> generate_primitives(const SystemModel& system, int count,
                                                 int piece_length, std::uint64_t seed,
                                                 const GenerationOptions& options = {});

/// Greedy dispersion order: start with the primitive of largest start-to-end
/// distance, then repeatedly pick the one maximizing the summed distance of its
/// start and end states to the nearest picked start and end states. Ties keep
/// input order.
std::vector<MotionPrimitive> sort_by_dispersion(const StateMetric& metric,
                                                const SystemModel& system,
                                                std::vector<MotionPrimitive> motions);

/// Mean distance from random states to their `b_d`-th nearest primitive start
/// state, ignoring translation.
double compute_delta(const StateMetric& metric, const SystemModel& system,
                     std::span<const MotionPrimitive> motions, int b_d, int n_samples = 100,
                     std::uint64_t seed = 0);

/// Same with explicit sample states.
double compute_delta(const StateMetric& metric, const SystemModel& system,
                     std::span<const MotionPrimitive> motions, int b_d,
                     std::span<const State> samples);

/// One JSON header line followed by a little-endian float64 payload.
void save_library(const PrimitiveLibrary& lib, const std::filesystem::path& path);

/// Throws FormatError on a malformed, truncated or corrupted file, on a
/// version or checksum mismatch, when any primitive fails validation, and when
/// `expected` is given and names a different system.
PrimitiveLibrary load_library(const std::filesystem::path& path,
                              const SystemModel* expected = nullptr);

}  // namespace kmp
