#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <utility>
#include <vector>

#include "kmp/dynamics.hpp"

namespace kmp {

/// Weighted state distance:
///   w_t * |dp|_2 + w_a * sum |wrap(d angle)| + w_v * |d velocity|_2
struct StateMetric {
  double translation_weight = 1.0;
  double angle_weight = 0.5;
  double velocity_weight = 0.25;
};

void validate_metric(const StateMetric& metric);

double distance(const StateMetric& metric, const SystemModel& system, const State& a,
                const State& b);

enum class IndexMode {
  Full,        ///< all components
  Rotational,  ///< workspace translation zeroed on insert and query
};

struct Neighbor {
  std::size_t id;
  double distance;
};

/// Radius and k-nearest queries under `StateMetric`, with incremental
/// insertion. Entries are identified by insertion order. Internally a
/// logarithmic forest of static k-d trees (plus a small unindexed buffer), so
/// insertion never rebuilds more than an amortized O(log n) share.
class NearestNeighborIndex {
 public:
  NearestNeighborIndex(SystemModel system, StateMetric metric, IndexMode mode);
  ~NearestNeighborIndex();
  NearestNeighborIndex(NearestNeighborIndex&&) noexcept;
  NearestNeighborIndex& operator=(NearestNeighborIndex&&) noexcept;

  std::size_t add(const State& x);
  std::size_t size() const { return points_.size(); }
  const State& point(std::size_t id) const { return points_[id]; }

  /// Every entry with distance <= radius, sorted by id.
  std::vector<std::size_t> query_radius(const State& x, double radius) const;

  /// The `k` nearest entries sorted by (distance, id).
  std::vector<Neighbor> query_knn(const State& x, std::size_t k) const;

  IndexMode mode() const { return mode_; }

 private:
  struct Tree;

  State project(const State& x) const;
  void merge_buffer();

  SystemModel system_;
  StateMetric metric_;
  IndexMode mode_;
  std::array<Component, kMaxStateDim> kinds_{};
  std::vector<State> points_;
  std::vector<std::size_t> buffer_;
  std::vector<std::unique_ptr<Tree>> levels_;
};

NearestNeighborIndex nn_build(const SystemModel& system, const StateMetric& metric, IndexMode mode,
                              const std::vector<State>& points);

}  // namespace kmp
