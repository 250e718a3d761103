#include "kmp/metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>

namespace kmp {
namespace {

constexpr std::size_t kBufferCapacity = 16;
constexpr int kLeafSize = 8;

// Pruning must never drop an entry the exact distance would keep.
bool beyond(double lower_bound, double radius) {
  return lower_bound > radius * (1.0 + 1e-12) + 1e-15;
}

double circular_gap(double q, double lo, double hi) {
  if (q >= lo && q <= hi) return 0.0;
  return std::min(std::abs(wrap_angle(q - lo)), std::abs(wrap_angle(q - hi)));
}

}  // namespace

void validate_metric(const StateMetric& metric) {
  const bool nonnegative = metric.translation_weight >= 0.0 && metric.angle_weight >= 0.0 &&
                           metric.velocity_weight >= 0.0;
  const bool any_positive =
      metric.translation_weight > 0.0 || metric.angle_weight > 0.0 || metric.velocity_weight > 0.0;
  if (!nonnegative || !any_positive) {
    throw ConfigError("metric weights must be nonnegative with at least one positive");
  }
}

namespace {

// Shared by distance() and the index so both give bit-identical values.
template <class KindOf>
double weighted_distance(const KindOf& kind, int dim, const StateMetric& metric, const State& a,
                         const State& b) {
  double trans = 0.0;
  double ang = 0.0;
  double vel = 0.0;
  for (int i = 0; i < dim; ++i) {
    const double d = a(i) - b(i);
    switch (kind(i)) {
      case Component::Translation:
        trans += d * d;
        break;
      case Component::Angle:
        ang += std::abs(wrap_angle(d));
        break;
      case Component::Velocity:
        vel += d * d;
        break;
    }
  }
  return metric.translation_weight * std::sqrt(trans) + metric.angle_weight * ang +
         metric.velocity_weight * std::sqrt(vel);
}

}  // namespace

double distance(const StateMetric& metric, const SystemModel& system, const State& a,
                const State& b) {
  return weighted_distance([&](int i) { return system.component(i); }, system.state_dim, metric, a,
                           b);
}

struct NearestNeighborIndex::Tree {
  struct Node {
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
    State lo;
    State hi;
  };

  std::vector<std::size_t> ids;
  std::vector<Node> nodes;

  int build(const std::vector<State>& points, const SystemModel& system, const StateMetric& metric,
            int begin, int end) {
    Node node;
    node.begin = begin;
    node.end = end;
    node.lo = points[ids[begin]];
    node.hi = points[ids[begin]];
    for (int i = begin + 1; i < end; ++i) {
      node.lo = node.lo.cwiseMin(points[ids[i]]);
      node.hi = node.hi.cwiseMax(points[ids[i]]);
    }
    const int index = static_cast<int>(nodes.size());
    nodes.push_back(node);
    if (end - begin <= kLeafSize) return index;

    int dim = 0;
    double best = -1.0;
    for (int d = 0; d < system.state_dim; ++d) {
      double w = metric.translation_weight;
      if (system.component(d) == Component::Angle) w = metric.angle_weight;
      if (system.component(d) == Component::Velocity) w = metric.velocity_weight;
      const double spread = (node.hi(d) - node.lo(d)) * w;
      if (spread > best) {
        best = spread;
        dim = d;
      }
    }
    if (best <= 0.0) return index;  // all remaining points coincide

    const int mid = begin + (end - begin) / 2;
    std::nth_element(ids.begin() + begin, ids.begin() + mid, ids.begin() + end,
                     [&](std::size_t a, std::size_t b) {
                       const double pa = points[a](dim);
                       const double pb = points[b](dim);
                       return pa < pb || (pa == pb && a < b);
                     });
    const int left = build(points, system, metric, begin, mid);
    const int right = build(points, system, metric, mid, end);
    nodes[index].left = left;
    nodes[index].right = right;
    return index;
  }
};

NearestNeighborIndex::NearestNeighborIndex(SystemModel system, StateMetric metric, IndexMode mode)
    : system_(std::move(system)), metric_(metric), mode_(mode) {
  validate_metric(metric_);
  if (system_.state_dim > kMaxStateDim) throw std::invalid_argument("state dimension too large");
  for (int i = 0; i < system_.state_dim; ++i) kinds_[i] = system_.component(i);
}

NearestNeighborIndex::~NearestNeighborIndex() = default;
NearestNeighborIndex::NearestNeighborIndex(NearestNeighborIndex&&) noexcept = default;
NearestNeighborIndex& NearestNeighborIndex::operator=(NearestNeighborIndex&&) noexcept = default;

State NearestNeighborIndex::project(const State& x) const {
  if (x.size() != system_.state_dim) {
    throw std::invalid_argument("state dimension does not match the index");
  }
  State p = x;
  if (mode_ == IndexMode::Rotational) p.head(system_.workspace_dim).setZero();
  normalize(system_, p);  // box bounds on angles assume wrapped values
  return p;
}

std::size_t NearestNeighborIndex::add(const State& x) {
  const std::size_t id = points_.size();
  points_.push_back(project(x));
  buffer_.push_back(id);
  if (buffer_.size() >= kBufferCapacity) merge_buffer();
  return id;
}

void NearestNeighborIndex::merge_buffer() {
  std::vector<std::size_t> ids = std::move(buffer_);
  buffer_.clear();
  std::size_t level = 0;
  while (level < levels_.size() && levels_[level]) {
    ids.insert(ids.end(), levels_[level]->ids.begin(), levels_[level]->ids.end());
    levels_[level].reset();
    ++level;
  }
  if (level == levels_.size()) levels_.emplace_back();
  auto tree = std::make_unique<Tree>();
  tree->ids = std::move(ids);
  std::sort(tree->ids.begin(), tree->ids.end());
  tree->build(points_, system_, metric_, 0, static_cast<int>(tree->ids.size()));
  levels_[level] = std::move(tree);
}

namespace {

template <class KindOf>
double box_lower_bound(const KindOf& kind, int dim, const StateMetric& metric, const State& q,
                       const State& lo, const State& hi) {
  double trans = 0.0;
  double ang = 0.0;
  double vel = 0.0;
  for (int i = 0; i < dim; ++i) {
    switch (kind(i)) {
      case Component::Translation: {
        const double g = std::max({lo(i) - q(i), q(i) - hi(i), 0.0});
        trans += g * g;
        break;
      }
      case Component::Angle:
        ang += circular_gap(q(i), lo(i), hi(i));
        break;
      case Component::Velocity: {
        const double g = std::max({lo(i) - q(i), q(i) - hi(i), 0.0});
        vel += g * g;
        break;
      }
    }
  }
  return metric.translation_weight * std::sqrt(trans) + metric.angle_weight * ang +
         metric.velocity_weight * std::sqrt(vel);
}

}  // namespace

std::vector<std::size_t> NearestNeighborIndex::query_radius(const State& x, double radius) const {
  if (radius < 0.0) throw std::invalid_argument("query radius must be nonnegative");
  const State q = project(x);
  const auto kind = [this](int i) { return kinds_[i]; };
  const int dim = system_.state_dim;
  std::vector<std::size_t> out;
  for (std::size_t id : buffer_) {
    if (weighted_distance(kind, dim, metric_, q, points_[id]) <= radius) out.push_back(id);
  }
  // Depth is logarithmic, so a fixed stack suffices.
  std::array<int, 128> stack;
  for (const auto& tree : levels_) {
    if (!tree) continue;
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
      const auto& node = tree->nodes[stack[--top]];
      if (beyond(box_lower_bound(kind, dim, metric_, q, node.lo, node.hi), radius)) continue;
      if (node.left < 0) {
        for (int i = node.begin; i < node.end; ++i) {
          const std::size_t id = tree->ids[i];
          if (weighted_distance(kind, dim, metric_, q, points_[id]) <= radius) out.push_back(id);
        }
      } else {
        stack[top++] = node.left;
        stack[top++] = node.right;
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Neighbor> NearestNeighborIndex::query_knn(const State& x, std::size_t k) const {
  const State q = project(x);
  const auto kind = [this](int i) { return kinds_[i]; };
  const int dim = system_.state_dim;
  auto worse = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
  };
  // Max-heap on (distance, id): the top is the current k-th best.
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(worse)> best(worse);
  auto offer = [&](std::size_t id) {
    const Neighbor n{id, weighted_distance(kind, dim, metric_, q, points_[id])};
    if (best.size() < k) {
      best.push(n);
    } else if (worse(n, best.top())) {
      best.pop();
      best.push(n);
    }
  };
  auto bound = [&]() {
    return best.size() < k ? std::numeric_limits<double>::infinity() : best.top().distance;
  };

  if (k == 0) return {};
  for (std::size_t id : buffer_) offer(id);
  std::vector<int> stack;
  for (const auto& tree : levels_) {
    if (!tree) continue;
    stack.assign(1, 0);
    while (!stack.empty()) {
      const auto& node = tree->nodes[stack.back()];
      stack.pop_back();
      if (beyond(box_lower_bound(kind, dim, metric_, q, node.lo, node.hi), bound())) continue;
      if (node.left < 0) {
        for (int i = node.begin; i < node.end; ++i) offer(tree->ids[i]);
      } else {
        // Visit the closer child first.
        const auto& l = tree->nodes[node.left];
        const auto& r = tree->nodes[node.right];
        const double dl = box_lower_bound(kind, dim, metric_, q, l.lo, l.hi);
        const double dr = box_lower_bound(kind, dim, metric_, q, r.lo, r.hi);
        if (dl <= dr) {
          stack.push_back(node.right);
          stack.push_back(node.left);
        } else {
          stack.push_back(node.left);
          stack.push_back(node.right);
        }
      }
    }
  }
  std::vector<Neighbor> out;
  out.reserve(best.size());
  while (!best.empty()) {
    out.push_back(best.top());
    best.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

NearestNeighborIndex nn_build(const SystemModel& system, const StateMetric& metric, IndexMode mode,
                              const std::vector<State>& points) {
  NearestNeighborIndex index(system, metric, mode);
  for (const State& p : points) index.add(p);
  return index;
}

}  // namespace kmp
