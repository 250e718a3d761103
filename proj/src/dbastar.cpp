#include "kmp/dbastar.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <unordered_map>

namespace kmp {

MotionSet::MotionSet(SystemModel system, RobotShape shape, StateMetric metric)
    : system_(std::move(system)),
      shape_(std::move(shape)),
      metric_(metric),
      index_(system_, metric_, IndexMode::Rotational) {}

void MotionSet::add(MotionPrimitive m) {
  footprints_.push_back(motion_footprint(system_, shape_, m));
  index_.add(m.start());
  motions_.push_back(std::move(m));
}

void MotionSet::add(std::span<const MotionPrimitive> motions) {
  for (const MotionPrimitive& m : motions) add(m);
}

std::vector<std::size_t> MotionSet::applicable(const State& x, double radius) const {
  return index_.query_radius(x, radius);
}

double heuristic(const SystemModel& system, const State& x, const State& goal) {
  return (position(x) - position(goal)).norm() / system.max_speed();
}

namespace {

// Fixed-radius neighbor lookup over explored states. Each component is
// bucketed with width radius / weight, which no pair within the radius can
// exceed, so only adjacent buckets need checking. Bucket keys are hashed;
// collisions only add candidates that the exact distance then rejects.
class MergeGrid {
 public:
  MergeGrid(const SystemModel& system, const StateMetric& metric, double radius)
      : system_(system), metric_(metric), radius_(radius) {
    for (int i = 0; i < system.state_dim; ++i) {
      const Component c = system.component(i);
      const double w = c == Component::Translation ? metric.translation_weight
                       : c == Component::Angle     ? metric.angle_weight
                                                   : metric.velocity_weight;
      Axis axis;
      axis.index = i;
      axis.angle = c == Component::Angle;
      axis.width = w > 0.0 ? radius / w : std::numeric_limits<double>::infinity();
      if (axis.angle) {
        const double cells = std::floor(2.0 * std::numbers::pi / axis.width);
        axis.cells = cells >= 3.0 ? static_cast<long>(cells) : 0;
        if (axis.cells > 0) axis.width = 2.0 * std::numbers::pi / static_cast<double>(axis.cells);
      }
      if (std::isfinite(axis.width) && (!axis.angle || axis.cells > 0)) axes_.push_back(axis);
    }
  }

  void add(const State& x, std::size_t id) {
    points_.push_back(x);
    cells_[key(coords(x))].push_back(id);
  }

  std::vector<std::size_t> query(const State& x) const {
    const Coords base = coords(x);
    Coords c = base;
    std::vector<std::size_t> out;
    const std::size_t n = axes_.size();
    std::array<int, kMaxStateDim> offset;
    offset.fill(-1);
    while (true) {
      for (std::size_t a = 0; a < n; ++a) {
        c[a] = base[a] + offset[a];
        if (axes_[a].cells > 0) c[a] = (c[a] % axes_[a].cells + axes_[a].cells) % axes_[a].cells;
      }
      if (const auto it = cells_.find(key(c)); it != cells_.end()) {
        for (std::size_t id : it->second) {
          if (distance(metric_, system_, x, points_[id]) <= radius_) out.push_back(id);
        }
      }
      std::size_t a = 0;
      while (a < n && offset[a] == 1) offset[a++] = -1;
      if (a == n) break;
      ++offset[a];
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  struct Axis {
    int index = 0;
    bool angle = false;
    double width = 0.0;
    long cells = 0;  // angles only: buckets around the circle
  };

  using Coords = std::array<long, kMaxStateDim>;

  Coords coords(const State& x) const {
    Coords c{};
    for (std::size_t a = 0; a < axes_.size(); ++a) {
      const Axis& axis = axes_[a];
      if (axis.angle) {
        const double t = wrap_angle(x(axis.index)) + std::numbers::pi;
        c[a] = std::min(static_cast<long>(t / axis.width), axis.cells - 1);
      } else {
        c[a] = static_cast<long>(std::floor(x(axis.index) / axis.width));
      }
    }
    return c;
  }

  std::uint64_t key(const Coords& c) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::size_t a = 0; a < axes_.size(); ++a) {
      h ^= static_cast<std::uint64_t>(c[a]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }

  const SystemModel& system_;
  const StateMetric& metric_;
  double radius_;
  std::vector<Axis> axes_;
  std::vector<State> points_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

struct Node {
  State x;
  double g = 0.0;
  double h = 0.0;
  std::size_t parent = 0;  // self for the root
  std::size_t motion = 0;
  bool closed = false;
};

struct Entry {
  double f;
  double h;
  std::size_t id;
  double g;  // g at push time; entries with a different g are stale
};

// Lower f first, then lower h, then the older node.
struct Later {
  bool operator()(const Entry& a, const Entry& b) const {
    if (a.f != b.f) return a.f > b.f;
    if (a.h != b.h) return a.h > b.h;
    return a.id > b.id;
  }
};

DbSolution reconstruct(const std::vector<Node>& nodes, std::size_t goal_id,
                       const MotionSet& motions) {
  const SystemModel& system = motions.system();
  const StateMetric& metric = motions.metric();
  std::vector<std::size_t> path;
  for (std::size_t id = goal_id; nodes[id].parent != id; id = nodes[id].parent) path.push_back(id);

  DbSolution sol;
  sol.cost = nodes[goal_id].g;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    const Node& child = nodes[*it];
    const Node& parent = nodes[child.parent];
    const MotionPrimitive& m = motions[child.motion];
    const Eigen::Vector2d offset = position(parent.x);
    for (std::size_t k = 0; k < m.steps(); ++k) {
      sol.traj.states.push_back(translate(system, m.states[k], offset));
      sol.traj.actions.push_back(m.actions[k]);
    }
    sol.motions.push_back(child.motion);
    // Gap between where this motion ends and where the next segment starts.
    const State end = translate(system, m.end(), offset);
    if (std::next(it) != path.rend()) {
      const MotionPrimitive& next = motions[nodes[*std::next(it)].motion];
      sol.junction_gaps.push_back(
          distance(metric, system, end, translate(system, next.start(), position(child.x))));
    } else {
      sol.junction_gaps.push_back(distance(metric, system, end, child.x));
    }
  }
  // The stored node state, not the motion end: it is the one within delta of
  // the goal after a merge.
  sol.traj.states.push_back(nodes[goal_id].x);
  return sol;
}

}  // namespace

DbResult db_astar(const State& start, const State& goal, const Environment& env,
                  const MotionSet& motions, const DbOptions& options) {
  if (!(options.delta > 0.0)) throw std::invalid_argument("db_astar requires delta > 0");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw std::invalid_argument("db_astar requires alpha in (0, 1)");
  }
  const SystemModel& system = motions.system();
  const StateMetric& metric = motions.metric();
  const RobotShape& shape = motions.shape();

  DbResult result;
  if (!state_valid(env, shape, system, start) || !state_valid(env, shape, system, goal)) {
    return result;
  }

  const double expand_radius = options.alpha * options.delta;
  const double merge_radius = (1.0 - options.alpha) * options.delta;

  std::vector<Node> nodes;
  MergeGrid explored(system, metric, merge_radius);
  std::priority_queue<Entry, std::vector<Entry>, Later> open;

  Node root;
  root.x = start;
  normalize(system, root.x);
  root.h = heuristic(system, root.x, goal);
  nodes.push_back(root);
  explored.add(root.x, 0);
  open.push({root.g + root.h, root.h, 0, root.g});

  while (!open.empty()) {
    const Entry top = open.top();
    open.pop();
    Node& n = nodes[top.id];
    if (n.closed || top.g != n.g) continue;
    if (n.g + n.h >= options.max_cost) continue;

    if (distance(metric, system, n.x, goal) <= options.delta) {
      result.solution = reconstruct(nodes, top.id, motions);
      break;
    }
    n.closed = true;
    ++result.stats.expansions;
    if (options.deadline && (result.stats.expansions & 63) == 0 &&
        std::chrono::steady_clock::now() >= *options.deadline) {
      result.stats.timed_out = true;
      break;
    }

    const std::size_t nid = top.id;
    const State nx = n.x;
    const double ng = n.g;
    const Eigen::Vector2d offset = position(nx);
    for (std::size_t mid : motions.applicable(nx, expand_radius)) {
      const MotionPrimitive& m = motions[mid];
      if (!motion_valid(env, shape, system, m, motions.footprint(mid), offset)) continue;
      const State x = translate(system, m.end(), offset);
      const double g = ng + m.cost;
      const double h = heuristic(system, x, goal);
      if (g + h >= options.max_cost) continue;

      const auto near = explored.query(x);
      if (near.empty()) {
        Node child;
        child.x = x;
        child.g = g;
        child.h = h;
        child.parent = nid;
        child.motion = mid;
        nodes.push_back(std::move(child));
        const std::size_t cid = nodes.size() - 1;
        explored.add(x, cid);
        open.push({g + h, h, cid, g});
        continue;
      }
      for (std::size_t other : near) {
        Node& o = nodes[other];
        if (o.closed || !(g < o.g)) continue;
        o.g = g;
        o.parent = nid;
        o.motion = mid;
        ++result.stats.rewires;
        open.push({o.g + o.h, o.h, other, o.g});
      }
    }
  }
  result.stats.nodes = nodes.size();
  return result;
}

DbBoundReport check_db_bounded(const SystemModel& system, const StateMetric& metric,
                               const Environment& env, const RobotShape& shape,
                               const Trajectory& traj, double delta, const State& start,
                               const State& goal) {
  if (traj.states.size() != traj.actions.size() + 1) {
    throw std::invalid_argument("check_db_bounded: |X| must equal |U| + 1");
  }
  const double bound = delta * (1.0 + 1e-9) + 1e-12;
  DbBoundReport rep;
  for (std::size_t k = 0; k < traj.actions.size(); ++k) {
    const double gap =
        distance(metric, system, traj.states[k + 1], step(system, traj.states[k], traj.actions[k]));
    rep.max_dynamics_gap = std::max(rep.max_dynamics_gap, gap);
    if (!(gap <= bound)) rep.violations.push_back({DbCondition::Dynamics, k, gap});
    if (!control_in_bounds(system, traj.actions[k])) {
      rep.violations.push_back({DbCondition::Control, k, 0.0});
    }
  }
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    if (!state_valid(env, shape, system, traj.states[k])) {
      rep.violations.push_back({DbCondition::State, k, 0.0});
    }
  }
  rep.start_gap = distance(metric, system, traj.states.front(), start);
  rep.goal_gap = distance(metric, system, traj.states.back(), goal);
  if (!(rep.start_gap <= bound)) rep.violations.push_back({DbCondition::Start, 0, rep.start_gap});
  if (!(rep.goal_gap <= bound)) {
    rep.violations.push_back({DbCondition::Goal, traj.states.size() - 1, rep.goal_gap});
  }
  rep.ok = rep.violations.empty();
  return rep;
}

}  // namespace kmp
