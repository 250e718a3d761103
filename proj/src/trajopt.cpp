#include "kmp/trajopt.hpp"

#include <lapacke.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <set>

#include "kmp/trajopt_terms.hpp"

namespace kmp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// A scalar constraint or cost residual with a short sparse gradient.
struct Row {
  static constexpr int kCapacity = 24;
  double value = 0.0;
  int nnz = 0;
  std::array<int, kCapacity> idx{};
  std::array<double, kCapacity> grad{};

  void add(int i, double g) {
    if (i < 0 || g == 0.0) return;
    idx[nnz] = i;
    grad[nnz] = g;
    ++nnz;
  }
};

struct Terms {
  std::vector<Row> reg;
  std::vector<Row> eq;
  std::vector<Row> ineq;
};

std::vector<State> unwrap_states(const SystemModel& system, const std::vector<State>& states) {
  std::vector<State> out = states;
  for (std::size_t k = 1; k < states.size(); ++k) {
    for (int a : system.angular_dims) {
      out[k](a) = out[k - 1](a) + wrap_angle(states[k](a) - states[k - 1](a));
    }
  }
  if (system.kind == SystemKind::CarTrailer) {
    for (std::size_t k = 0; k < states.size(); ++k) {
      out[k](3) = out[k](2) - wrap_angle(states[k](2) - states[k](3));
    }
  }
  return out;
}

// The representative of `target` whose angles are closest to `reference`.
State nearest_equivalent(const SystemModel& system, const State& target, const State& reference) {
  State out = target;
  for (int a : system.angular_dims) out(a) = reference(a) + wrap_angle(target(a) - reference(a));
  if (system.kind == SystemKind::CarTrailer) out(3) = out(2) - wrap_angle(target(2) - target(3));
  return out;
}

class Formulation {
 public:
  Formulation(const OptProblem& p, const OptOptions& o)
      : sys_(*p.system), env_(p.env), shape_(*p.shape), opt_(o), T_(p.horizon) {
    n_ = sys_.state_dim;
    ne_ = terms::extra_dim(sys_);
    sqrt_w_ = std::sqrt(opt_.smoothness_weight);
  }

  int size() const { return (T_ - 1) * n_ + T_ * ne_; }
  int horizon() const { return T_; }

  int state_var(int k, int i) const { return (k <= 0 || k >= T_) ? -1 : (k - 1) * n_ + i; }
  int extra_var(int k, int j) const { return (T_ - 1) * n_ + k * ne_ + j; }

  terms::VectorRef state(const Eigen::VectorXd& z, int k) const {
    if (k == 0) return start_;
    if (k == T_) return goal_;
    return z.segment((k - 1) * n_, n_);
  }
  terms::VectorRef extra(const Eigen::VectorXd& z, int k) const {
    return z.segment((T_ - 1) * n_ + k * ne_, ne_);
  }

  Eigen::VectorXd initialize(const Trajectory& guess_in, const State& start, const State& goal) {
    const Trajectory guess =
        static_cast<int>(guess_in.steps()) == T_ ? guess_in : resample(sys_, guess_in, T_);
    const std::vector<State> X = unwrap_states(sys_, guess.states);
    start_ = nearest_equivalent(sys_, start, X.front());
    goal_ = nearest_equivalent(sys_, goal, X.back());
    Eigen::VectorXd z = Eigen::VectorXd::Zero(size());
    for (int k = 1; k < T_; ++k) z.segment((k - 1) * n_, n_) = X[k];
    for (int k = 0; k < T_ && ne_ > 0; ++k) {
      // Trailer steering angle.
      const double phi = k < static_cast<int>(guess.actions.size()) ? guess.actions[k](1) : 0.0;
      z(extra_var(k, 0)) = std::clamp(phi, sys_.u_lo(1), sys_.u_hi(1));
    }
    return z;
  }

  Terms evaluate(const Eigen::VectorXd& z) const {
    Terms t;
    t.reg.reserve(reg_rows_);
    t.eq.reserve(eq_rows_);
    t.ineq.reserve(ineq_rows_);
    const int m = sys_.control_dim;
    std::vector<terms::Transition> trans;
    trans.reserve(T_);
    for (int k = 0; k < T_; ++k) {
      trans.push_back(terms::transition(sys_, state(z, k), state(z, k + 1), extra(z, k)));
    }

    auto add_dx = [&](Row& row, int k, const auto& g, double scale) {
      for (int i = 0; i < n_; ++i) row.add(state_var(k, i), scale * g(i));
    };
    auto add_de = [&](Row& row, int k, const auto& g, double scale) {
      for (int j = 0; j < ne_; ++j) row.add(extra_var(k, j), scale * g(j));
    };
    auto control_row = [&](int k, int i, double scale, double offset) {
      Row row;
      row.value = scale * trans[k].u(i) + offset;
      add_dx(row, k, trans[k].du_dx0.row(i), scale);
      add_dx(row, k + 1, trans[k].du_dx1.row(i), scale);
      add_de(row, k, trans[k].du_de.row(i), scale);
      return row;
    };

    for (int k = 0; k < T_; ++k) {
      const auto& tr = trans[k];
      for (int i = 0; i < tr.h.size(); ++i) {
        Row row;
        row.value = tr.h(i);
        add_dx(row, k, tr.dh_dx0.row(i), 1.0);
        add_dx(row, k + 1, tr.dh_dx1.row(i), 1.0);
        add_de(row, k, tr.dh_de.row(i), 1.0);
        t.eq.push_back(row);
      }
      for (int i = 0; i < m; ++i) {
        if (std::isfinite(sys_.u_hi(i))) t.ineq.push_back(control_row(k, i, 1.0, -sys_.u_hi(i)));
        if (std::isfinite(sys_.u_lo(i))) t.ineq.push_back(control_row(k, i, -1.0, sys_.u_lo(i)));
      }
    }

    for (int k = 0; k + 1 < T_; ++k) {
      for (int i = 0; i < m; ++i) {
        const double scale = sqrt_w_ / (sys_.u_hi(i) - sys_.u_lo(i));
        Row row = control_row(k + 1, i, scale, 0.0);
        Row prev = control_row(k, i, -scale, 0.0);
        row.value += prev.value;
        for (int j = 0; j < prev.nnz; ++j) row.add(prev.idx[j], prev.grad[j]);
        t.reg.push_back(row);
      }
    }

    const double maxh = sys_.max_hitch_angle - opt_.bound_margin;
    for (int k = 1; k < T_; ++k) {
      const terms::VectorRef x = state(z, k);
      for (int i = sys_.workspace_dim; i < n_; ++i) {
        if (std::isfinite(sys_.x_hi(i))) {
          Row row;
          row.value = x(i) - sys_.x_hi(i);
          row.add(state_var(k, i), 1.0);
          t.ineq.push_back(row);
        }
        if (std::isfinite(sys_.x_lo(i))) {
          Row row;
          row.value = sys_.x_lo(i) - x(i);
          row.add(state_var(k, i), -1.0);
          t.ineq.push_back(row);
        }
      }
      if (sys_.kind == SystemKind::CarTrailer) {
        for (double sign : {1.0, -1.0}) {
          Row row;
          row.value = sign * (x(2) - x(3)) - maxh;
          row.add(state_var(k, 2), sign);
          row.add(state_var(k, 3), -sign);
          t.ineq.push_back(row);
        }
      }
      if (env_ == nullptr) continue;
      const double margin = opt_.bound_margin;
      for (int i = 0; i < 2; ++i) {
        Row hi;
        hi.value = x(i) - (env_->max(i) - margin);
        hi.add(state_var(k, i), 1.0);
        t.ineq.push_back(hi);
        Row lo;
        lo.value = (env_->min(i) + margin) - x(i);
        lo.add(state_var(k, i), -1.0);
        t.ineq.push_back(lo);
      }
      for (std::size_t b = 0; b < shape_.sizes.size(); ++b) {
        for (const Box& box : env_->obstacles) {
          const auto sep = terms::state_separation(sys_, shape_, b, box, x);
          Row row;
          row.value = opt_.collision_margin - sep.value;
          add_dx(row, k, sep.dx, -1.0);
          t.ineq.push_back(row);
        }
      }
    }
    reg_rows_ = t.reg.size();
    eq_rows_ = t.eq.size();
    ineq_rows_ = t.ineq.size();
    return t;
  }

  Trajectory extract(const Eigen::VectorXd& z) const {
    Trajectory traj;
    std::vector<State> X;
    X.reserve(T_ + 1);
    for (int k = 0; k <= T_; ++k) {
      State x = state(z, k);
      if (k > 0 && k < T_) {
        for (int i = sys_.workspace_dim; i < n_; ++i)
          x(i) = std::clamp(x(i), sys_.x_lo(i), sys_.x_hi(i));
      }
      X.push_back(x);
    }
    for (int k = 0; k < T_; ++k) {
      const auto tr = terms::transition(sys_, X[k], X[k + 1], extra(z, k));
      traj.actions.push_back(tr.u.cwiseMax(sys_.u_lo).cwiseMin(sys_.u_hi));
    }
    for (State& x : X) normalize(sys_, x);
    traj.states = std::move(X);
    return traj;
  }

 private:
  const SystemModel& sys_;
  const Environment* env_;
  const RobotShape& shape_;
  OptOptions opt_;
  int T_;
  int n_ = 0;
  int ne_ = 0;
  double sqrt_w_ = 0.0;
  State start_;
  State goal_;
  mutable std::size_t reg_rows_ = 0;
  mutable std::size_t eq_rows_ = 0;
  mutable std::size_t ineq_rows_ = 0;
};

struct Multipliers {
  Eigen::VectorXd eq;
  Eigen::VectorXd ineq;
};

double merit(const Terms& t, const Multipliers& mult, double rho) {
  double f = 0.0;
  for (const Row& r : t.reg) f += 0.5 * r.value * r.value;
  for (std::size_t i = 0; i < t.eq.size(); ++i) {
    const double a = t.eq[i].value + mult.eq(i) / rho;
    f += 0.5 * rho * a * a;
  }
  for (std::size_t i = 0; i < t.ineq.size(); ++i) {
    const double a = t.ineq[i].value + mult.ineq(i) / rho;
    if (a > 0.0) f += 0.5 * rho * a * a;
  }
  return f;
}

double max_violation(const Terms& t) {
  double v = 0.0;
  for (const Row& r : t.eq) v = std::max(v, std::abs(r.value));
  for (const Row& r : t.ineq) v = std::max(v, r.value);
  return v;
}

// Symmetric matrix in LAPACK upper band storage. Variables are ordered by
// time step, so the Gauss-Newton matrix is banded with a small bandwidth.
class BandMatrix {
 public:
  BandMatrix(int n, int kd) : n_(n), kd_(kd), ab_(static_cast<std::size_t>((kd + 1) * n), 0.0) {}

  void clear() { std::fill(ab_.begin(), ab_.end(), 0.0); }

  // Adds w * grad * grad^T for one residual row.
  void add_outer(const Row& row, double w) {
    for (int a = 0; a < row.nnz; ++a) {
      for (int b = 0; b < row.nnz; ++b) {
        const int i = row.idx[a];
        const int j = row.idx[b];
        if (i <= j)
          ab_[static_cast<std::size_t>(kd_ + i - j + j * (kd_ + 1))] +=
              w * row.grad[a] * row.grad[b];
      }
    }
  }

  // Solves (H + shift * I) x = rhs. False if the shifted matrix is not
  // positive definite.
  bool solve(double shift, const Eigen::VectorXd& rhs, Eigen::VectorXd& x) const {
    work_ = ab_;
    for (int j = 0; j < n_; ++j) work_[static_cast<std::size_t>(kd_ + j * (kd_ + 1))] += shift;
    if (LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'U', n_, kd_, work_.data(), kd_ + 1) != 0) return false;
    x = rhs;
    return LAPACKE_dpbtrs(LAPACK_COL_MAJOR, 'U', n_, kd_, 1, work_.data(), kd_ + 1, x.data(), n_) ==
           0;
  }

 private:
  int n_;
  int kd_;
  std::vector<double> ab_;
  mutable std::vector<double> work_;
};

int bandwidth(const Terms& t) {
  int kd = 0;
  for (const auto* rows : {&t.reg, &t.eq, &t.ineq}) {
    for (const Row& r : *rows) {
      if (r.nnz == 0) continue;
      const auto [lo, hi] = std::minmax_element(r.idx.begin(), r.idx.begin() + r.nnz);
      kd = std::max(kd, *hi - *lo);
    }
  }
  return kd;
}

// Gauss-Newton normal equations of the augmented Lagrangian merit.
void normal_equations(const Terms& t, const Multipliers& mult, double rho, BandMatrix& H,
                      Eigen::VectorXd& g) {
  H.clear();
  g.setZero();
  auto push = [&](const Row& rw, double w, double value) {
    H.add_outer(rw, w);
    for (int j = 0; j < rw.nnz; ++j) g(rw.idx[j]) += w * value * rw.grad[j];
  };
  for (const Row& rw : t.reg) push(rw, 1.0, rw.value);
  for (std::size_t i = 0; i < t.eq.size(); ++i) {
    push(t.eq[i], rho, t.eq[i].value + mult.eq(i) / rho);
  }
  for (std::size_t i = 0; i < t.ineq.size(); ++i) {
    const double a = t.ineq[i].value + mult.ineq(i) / rho;
    if (a > 0.0) push(t.ineq[i], rho, a);
  }
}

}  // namespace

FeasibilityReport feasibility_report(const SystemModel& system, const Environment* env,
                                     const RobotShape& shape, const Trajectory& traj,
                                     const State& start, const State& goal,
                                     const FeasibilityTolerances& tol) {
  if (traj.states.size() != traj.actions.size() + 1) {
    throw std::invalid_argument("feasibility_report: |X| must equal |U| + 1");
  }
  FeasibilityReport rep;
  for (std::size_t k = 0; k < traj.actions.size(); ++k) {
    const auto gap =
        state_difference(system, traj.states[k + 1], step(system, traj.states[k], traj.actions[k]));
    rep.dynamics_inf_norm = std::max(rep.dynamics_inf_norm, gap.lpNorm<Eigen::Infinity>());
    const Control& u = traj.actions[k];
    for (int i = 0; i < system.control_dim; ++i) {
      rep.bound_violation =
          std::max({rep.bound_violation, u(i) - system.u_hi(i), system.u_lo(i) - u(i)});
    }
  }
  for (const State& x : traj.states) {
    for (int i = system.workspace_dim; i < system.state_dim; ++i) {
      rep.bound_violation =
          std::max({rep.bound_violation, x(i) - system.x_hi(i), system.x_lo(i) - x(i)});
    }
    if (system.kind == SystemKind::CarTrailer) {
      const double hitch = std::abs(wrap_angle(x(2) - x(3)));
      if (hitch >= system.max_hitch_angle) {
        rep.bound_violation = std::max(rep.bound_violation,
                                       std::max(hitch - system.max_hitch_angle, tol.bounds * 2.0));
      }
    }
    if (env != nullptr) {
      bool free = env->contains(x.head<2>());
      if (free) {
        const auto bodies = body_poses(system, shape, x);
        for (const Box& box : env->obstacles) {
          for (const auto& body : bodies) free = free && !overlaps(body, box);
        }
      }
      if (!free) ++rep.collision_violation;
    }
  }
  rep.start_gap = state_difference(system, traj.states.front(), start).lpNorm<Eigen::Infinity>();
  rep.goal_gap = state_difference(system, traj.states.back(), goal).lpNorm<Eigen::Infinity>();
  rep.ok = rep.dynamics_inf_norm <= tol.dynamics && rep.bound_violation <= tol.bounds &&
           rep.collision_violation == 0 && rep.start_gap <= tol.gap && rep.goal_gap <= tol.gap;
  return rep;
}

Trajectory resample(const SystemModel& system, const Trajectory& guess, int horizon) {
  if (guess.states.empty()) throw std::invalid_argument("resample: empty guess");
  const std::vector<State> X = unwrap_states(system, guess.states);
  const int old_T = static_cast<int>(guess.steps());
  Trajectory out;
  for (int k = 0; k <= horizon; ++k) {
    State x;
    if (old_T == 0 || horizon == 0) {
      x = X.front();
    } else {
      const double s = static_cast<double>(k) * old_T / horizon;
      const int i = std::min(static_cast<int>(std::floor(s)), old_T - 1);
      const double a = s - i;
      x = (1.0 - a) * X[i] + a * X[i + 1];
    }
    normalize(system, x);
    out.states.push_back(x);
  }
  for (int k = 0; k < horizon; ++k) {
    if (old_T == 0) {
      out.actions.push_back(Control::Zero(system.control_dim));
    } else {
      const double s = (k + 0.5) * old_T / horizon;
      const int i = std::clamp(static_cast<int>(std::floor(s)), 0, old_T - 1);
      out.actions.push_back(guess.actions[i]);
    }
  }
  return out;
}

Trajectory interpolate(const SystemModel& system, const State& start, const State& goal,
                       int horizon) {
  Trajectory seed;
  seed.states = {start, goal};
  seed.actions = {Control::Zero(system.control_dim)};
  return resample(system, seed, horizon);
}

OptResult optimize_fixed_horizon(const OptProblem& problem, const OptOptions& options) {
  const auto t0 = Clock::now();
  if (problem.system == nullptr || problem.shape == nullptr) {
    throw std::invalid_argument("optimize_fixed_horizon: system and shape are required");
  }
  if (problem.horizon < 1) throw std::invalid_argument("optimize_fixed_horizon: horizon >= 1");
  const SystemModel& sys = *problem.system;

  Formulation form(problem, options);
  Eigen::VectorXd z = form.initialize(problem.guess, problem.start, problem.goal);
  const int n = form.size();

  OptResult result;
  result.horizon = problem.horizon;

  Terms terms = form.evaluate(z);
  Multipliers mult{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(terms.eq.size())),
                   Eigen::VectorXd::Zero(static_cast<Eigen::Index>(terms.ineq.size()))};
  double rho = options.initial_penalty;
  double lm = 1e-4;

  auto check = [&]() {
    result.traj = form.extract(z);
    result.residuals = feasibility_report(sys, problem.env, *problem.shape, result.traj,
                                          problem.start, problem.goal, options.tolerances);
    return result.residuals.ok;
  };

  if (n == 0 || check()) {
    if (n == 0) check();
    result.converged = result.residuals.ok;
    result.violation_history.push_back(max_violation(terms));
    result.wall_time = seconds_since(t0);
    return result;
  }

  LAPACKE_set_nancheck(0);
  BandMatrix H(n, bandwidth(terms));
  Eigen::VectorXd g(n);

  for (int outer = 0; outer < options.max_outer; ++outer) {
    for (int inner = 0; inner < options.max_inner; ++inner) {
      const double f = merit(terms, mult, rho);
      normal_equations(terms, mult, rho, H, g);
      if (g.lpNorm<Eigen::Infinity>() < 1e-12) break;

      bool accepted = false;
      Eigen::VectorXd dz;
      double nu = 2.0;
      while (lm < 1e10) {
        if (!H.solve(lm, -g, dz)) {
          lm *= nu;
          nu *= 2.0;
          continue;
        }
        const Eigen::VectorXd trial = z + dz;
        Terms trial_terms = form.evaluate(trial);
        // Model decrease; uses (H + lm I) dz = -g.
        const double predicted = 0.5 * (lm * dz.squaredNorm() - g.dot(dz));
        const double gain = (f - merit(trial_terms, mult, rho)) / std::max(predicted, 1e-300);
        if (gain > 0.0) {
          z = trial;
          terms = std::move(trial_terms);
          lm = std::max(lm * std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * gain - 1.0, 3)), 1e-9);
          accepted = true;
          break;
        }
        lm *= nu;
        nu *= 2.0;
      }
      ++result.iterations;
      if (!accepted || dz.lpNorm<Eigen::Infinity>() < options.inner_tolerance) break;
    }

    const double violation = max_violation(terms);
    result.violation_history.push_back(violation);
    for (std::size_t i = 0; i < terms.eq.size(); ++i) mult.eq(i) += rho * terms.eq[i].value;
    for (std::size_t i = 0; i < terms.ineq.size(); ++i) {
      mult.ineq(i) = std::max(0.0, mult.ineq(i) + rho * terms.ineq[i].value);
    }
    if (check()) {
      result.converged = true;
      break;
    }
    const auto& hist = result.violation_history;
    if (hist.size() >= 2 && violation > options.stall_floor &&
        violation > options.stall_ratio * hist[hist.size() - 2]) {
      break;
    }
    rho *= options.penalty_growth;
    lm = std::max(lm, 1e-4);
  }
  result.wall_time = seconds_since(t0);
  return result;
}

TimeSearchResult optimize_with_time_search(const OptProblem& problem, int guess_horizon,
                                           const std::vector<double>& factors, double cost_bound,
                                           const OptOptions& options) {
  if (guess_horizon < 1) throw std::invalid_argument("time search requires T_d >= 1");
  std::set<int> candidates;
  for (double f : factors) {
    const int T = std::max(1, static_cast<int>(std::lround(f * guess_horizon)));
    if (T * problem.system->dt < cost_bound - 1e-9) candidates.insert(T);
  }
  TimeSearchResult out;
  for (int T : candidates) {
    OptProblem p = problem;
    p.horizon = T;
    p.guess = resample(*problem.system, problem.guess, T);
    OptResult r = optimize_fixed_horizon(p, options);
    out.tried.push_back(T);
    out.last_iterate = r.traj;
    if (r.converged) {
      out.best = std::move(r);
      break;
    }
  }
  return out;
}

std::optional<OptResult> solve_bvp(const SystemModel& system, const State& start, const State& goal,
                                   const BvpOptions& options) {
  const RobotShape shape = default_shape(system);
  // Free space: solve with the start at the origin so the result does not
  // depend on where the problem sits in the plane. The relative goal is
  // snapped to a 2^-30 grid; the optimizer amplifies rounding-level input
  // differences, and the rounding of (goal + o) - (start + o) differs with o.
  const Eigen::Vector2d offset = position(start);
  OptProblem p;
  p.system = &system;
  p.shape = &shape;
  p.start = translate(system, start, -offset);
  p.goal = translate(system, goal, -offset);
  for (int i = 0; i < 2; ++i) p.goal(i) = std::ldexp(std::round(std::ldexp(p.goal(i), 30)), -30);

  auto attempt = [&](int T, const Trajectory& guess) {
    p.horizon = T;
    p.guess = guess;
    return optimize_fixed_horizon(p, options.opt);
  };

  std::vector<int> schedule;
  for (int T = 4; T < options.max_horizon; T *= 2) {
    const int h = std::max(T, options.min_horizon);
    if (schedule.empty() || schedule.back() != h) schedule.push_back(h);
  }
  if (schedule.empty() || schedule.back() < options.max_horizon) {
    schedule.push_back(std::max(options.max_horizon, options.min_horizon));
  }

  int lo = options.min_horizon - 1;  // largest horizon known to fail
  std::optional<OptResult> best;
  for (int T : schedule) {
    OptResult r = attempt(T, interpolate(system, p.start, p.goal, T));
    if (r.converged) {
      best = std::move(r);
      break;
    }
    lo = T;
  }
  if (!best) return std::nullopt;

  int hi = best->horizon;
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    OptResult r = attempt(mid, resample(system, best->traj, mid));
    if (r.converged) {
      hi = mid;
      best = std::move(r);
    } else {
      lo = mid;
    }
  }
  for (State& x : best->traj.states) x = translate(system, x, offset);
  return best;
}

}  // namespace kmp
