#include "kmp/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "kmp/dbastar.hpp"
#include "kmp/errors.hpp"
#include "kmp/hash.hpp"

namespace kmp {
namespace {

using Clock = std::chrono::steady_clock;

// Sub-seed streams of one run.
constexpr std::uint64_t kDeltaStream = 0;
constexpr std::uint64_t kGenerationStream = 1;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

nlohmann::ordered_json bound_json(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

void validate_config(const PlannerConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("planner config: " + what); };
  if (c.b_d < 1) fail("b_d must be positive");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("alpha must be in (0, 1)");
  for (std::size_t i = 0; i < c.schedule.size(); ++i) {
    if (c.schedule[i] <= 0) {
      fail("schedule entry " + std::to_string(i + 1) + " must be positive");
    }
  }
  if (c.base_chunk < 1) fail("base_chunk must be positive");
  if (c.fresh_chunk < 0) fail("fresh_chunk must not be negative");
  if (c.piece_length < 2) fail("piece_length must be at least 2");
  if (!(c.timeout > 0.0)) fail("timeout must be positive");
  if (c.time_factors.empty()) fail("time_factors must not be empty");
  for (double f : c.time_factors) {
    if (!(f > 0.0)) fail("time_factors must be positive");
  }
  if (c.delta_samples < 1) fail("delta_samples must be positive");
  if (c.max_iterations < 0) fail("max_iterations must not be negative");
}

int chunk_size(const PlannerConfig& c, int n) {
  if (n < 1) throw std::invalid_argument("iterations are numbered from 1");
  if (!c.schedule.empty()) {
    return c.schedule[std::min<std::size_t>(n, c.schedule.size()) - 1];
  }
  const double size = std::ldexp(static_cast<double>(c.base_chunk), n - 1);
  return static_cast<int>(std::min(size, static_cast<double>(std::numeric_limits<int>::max())));
}

const char* to_string(SearchOutcome o) {
  switch (o) {
    case SearchOutcome::Found:
      return "found";
    case SearchOutcome::Infeasible:
      return "infeasible";
    case SearchOutcome::TimedOut:
      return "timeout";
  }
  return "?";
}

const char* to_string(RepairOutcome o) {
  switch (o) {
    case RepairOutcome::Skipped:
      return "skipped";
    case RepairOutcome::Converged:
      return "converged";
    case RepairOutcome::Failed:
      return "failed";
    case RepairOutcome::TimedOut:
      return "timeout";
  }
  return "?";
}

std::string trace_json(const RunTrace& trace) {
  nlohmann::ordered_json j;
  j["format"] = "kmp-run-trace";
  j["version"] = 1;
  j["scenario"] = trace.scenario;
  j["system"] = trace.system;
  j["seed"] = trace.seed;
  auto& its = j["iterations"] = nlohmann::ordered_json::array();
  for (const IterationRecord& r : trace.iterations) {
    its.push_back({
        {"iteration", r.iteration},
        {"library_added", r.library_added},
        {"generated", r.generated},
        {"motions", r.motions},
        {"delta", r.delta},
        {"cost_bound_before", bound_json(r.cost_bound_before)},
        {"search", to_string(r.search)},
        {"expansions", r.expansions},
        {"nodes", r.nodes},
        {"guess_horizon", r.guess_horizon},
        {"repair", to_string(r.repair)},
        {"horizons_tried", r.horizons_tried},
        {"horizon", r.horizon},
        {"extracted", r.extracted},
        {"cost_bound", bound_json(r.cost_bound)},
    });
  }
  return j.dump(1) + "\n";
}

std::string timings_json(const RunTrace& trace) {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < trace.timings.size(); ++i) {
    const IterationTiming& t = trace.timings[i];
    j.push_back({{"iteration", i + 1},
                 {"generation", t.generation},
                 {"search", t.search},
                 {"repair", t.repair},
                 {"end", t.end}});
  }
  return j.dump(1) + "\n";
}

std::vector<MotionPrimitive> extract_online(const SystemModel& system, const Trajectory& iterate,
                                            int piece_length, const FeasibilityTolerances& tol) {
  const auto& X = iterate.states;
  const auto& U = iterate.actions;
  if (X.size() != U.size() + 1) return {};
  auto step_ok = [&](std::size_t k) {
    if (!X[k].allFinite() || !X[k + 1].allFinite() || !U[k].allFinite()) return false;
    if (!state_in_bounds(system, X[k]) || !state_in_bounds(system, X[k + 1])) return false;
    if (!control_in_bounds(system, U[k])) return false;
    return state_difference(system, X[k + 1], step(system, X[k], U[k])).lpNorm<Eigen::Infinity>() <=
           tol.dynamics;
  };

  std::vector<MotionPrimitive> out;
  std::size_t k = 0;
  while (k < U.size()) {
    if (!step_ok(k)) {
      ++k;
      continue;
    }
    std::size_t end = k + 1;
    while (end < U.size() && step_ok(end)) ++end;
    const std::span<const Control> controls(U.data() + k, end - k);
    // Re-simulate so the pieces are exact up to rounding.
    const auto states = rollout(system, X[k], controls);
    auto pieces = extract_primitives(system, states, controls, piece_length);
    std::move(pieces.begin(), pieces.end(), std::back_inserter(out));
    k = end;
  }
  return out;
}

PlanResult kmp_db_astar(const Scenario& scenario, const PrimitiveLibrary& library,
                        const PlannerConfig& config, const SolutionCallback& on_solution) {
  validate_config(config);
  const SystemModel& system = scenario.system;
  if (library.system != system.name || library.variant != system.variant) {
    throw ConfigError("primitive library is for " + library.system + "/" + library.variant +
                      ", scenario uses " + system.id());
  }
  const auto t0 = Clock::now();
  const auto deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                                 std::chrono::duration<double>(config.timeout));

  PlanResult result;
  RunTrace& trace = result.trace;
  trace.scenario = scenario.name;
  trace.system = system.id();
  trace.seed = config.seed;

  MotionSet motions(system, scenario.shape, scenario.metric);
  std::size_t library_pos = 0;
  double c_max = std::numeric_limits<double>::infinity();
  double delta = std::numeric_limits<double>::infinity();
  const std::uint64_t delta_seed = derive_seed(config.seed, kDeltaStream);
  const std::uint64_t generation_seed = derive_seed(config.seed, kGenerationStream);

  // No trajectory is shorter than the straight line at top speed, so once no
  // whole number of steps fits between that and c_max the search is over.
  const int min_horizon = static_cast<int>(
      std::ceil(heuristic(system, scenario.start, scenario.goal) / system.dt - 1e-9));
  auto improvable = [&] { return min_horizon * system.dt < c_max - 1e-9; };

  for (int n = 1; config.max_iterations == 0 || n <= config.max_iterations; ++n) {
    if (Clock::now() >= deadline || !improvable()) break;
    IterationRecord rec;
    IterationTiming timing;
    rec.iteration = n;
    rec.cost_bound_before = c_max;

    // Grow the primitive set: sorted library first, then fresh primitives.
    const auto want = static_cast<std::size_t>(chunk_size(config, n));
    if (library_pos < library.primitives.size()) {
      const std::size_t take = std::min(want, library.primitives.size() - library_pos);
      motions.add(std::span(library.primitives).subspan(library_pos, take));
      library_pos += take;
      rec.library_added = take;
    } else if (config.fresh_chunk > 0) {
      const auto tg = Clock::now();
      const int count = static_cast<int>(std::min<std::size_t>(want, config.fresh_chunk));
      try {
        const auto fresh = generate_primitives(system, count, config.piece_length,
                                               derive_seed(generation_seed, n), config.generation);
        motions.add(fresh);
        rec.generated = fresh.size();
      } catch (const GenerationError&) {
        // Keep searching with the primitives at hand.
      }
      timing.generation = seconds_since(tg);
    }
    rec.motions = motions.size();

    if (motions.size() > 0) {
      const int b = std::min<int>(config.b_d, static_cast<int>(motions.size()));
      // Never let the bound grow, including while |M| < b_d.
      delta = std::min(delta, compute_delta(scenario.metric, system, motions.motions(), b,
                                            config.delta_samples, delta_seed));
    }
    rec.delta = std::isfinite(delta) ? delta : 0.0;

    if (motions.size() > 0) {
      const auto ts = Clock::now();
      DbOptions db;
      db.delta = delta;
      db.alpha = config.alpha;
      db.max_cost = c_max;
      db.deadline = deadline;
      const DbResult search = db_astar(scenario.start, scenario.goal, scenario.env, motions, db);
      timing.search = seconds_since(ts);
      rec.expansions = search.stats.expansions;
      rec.nodes = search.stats.nodes;
      rec.search = search.solution          ? SearchOutcome::Found
                   : search.stats.timed_out ? SearchOutcome::TimedOut
                                            : SearchOutcome::Infeasible;

      if (search.solution) {
        const auto tr = Clock::now();
        const Trajectory& guess = search.solution->traj;
        rec.guess_horizon = static_cast<int>(guess.steps());

        std::optional<Trajectory> repaired;
        Trajectory iterate;
        if (guess.steps() == 0) {
          // Start within delta of the goal: try standing still.
          Trajectory still;
          still.states.push_back(scenario.start);
          if (feasibility_report(system, &scenario.env, scenario.shape, still, scenario.start,
                                 scenario.goal, config.opt.tolerances)
                  .ok) {
            repaired = still;
            rec.horizons_tried.push_back(0);
          }
        }
        if (!repaired) {
          OptProblem p;
          p.system = &system;
          p.env = &scenario.env;
          p.shape = &scenario.shape;
          p.start = scenario.start;
          p.goal = scenario.goal;
          int guess_horizon = rec.guess_horizon;
          if (guess_horizon == 0) {
            guess_horizon = config.piece_length;
            p.guess = interpolate(system, scenario.start, scenario.goal, guess_horizon);
          } else {
            p.guess = guess;
          }
          p.horizon = guess_horizon;
          TimeSearchResult ts_result =
              optimize_with_time_search(p, guess_horizon, config.time_factors, c_max, config.opt);
          rec.horizons_tried.insert(rec.horizons_tried.end(), ts_result.tried.begin(),
                                    ts_result.tried.end());
          if (ts_result.best) {
            repaired = ts_result.best->traj;
          } else {
            iterate = std::move(ts_result.last_iterate);
          }
        }
        timing.repair = seconds_since(tr);

        if (repaired && Clock::now() > deadline) {
          rec.repair = RepairOutcome::TimedOut;
        } else if (repaired) {
          Solution s;
          s.traj = *repaired;
          s.horizon = static_cast<int>(s.traj.steps());
          s.cost = s.horizon * system.dt;
          s.found_at = seconds_since(t0);
          s.iteration = n;
          s.residuals = feasibility_report(system, &scenario.env, scenario.shape, s.traj,
                                           scenario.start, scenario.goal, config.opt.tolerances);
          rec.repair = RepairOutcome::Converged;
          rec.horizon = s.horizon;
          c_max = std::min(c_max, s.cost);
          iterate = s.traj;
          if (on_solution) on_solution(s);
          result.best = s;
          result.solutions.push_back(std::move(s));
        } else {
          rec.repair = RepairOutcome::Failed;
        }

        auto extracted =
            extract_online(system, iterate, config.piece_length, config.opt.tolerances);
        rec.extracted = extracted.size();
        motions.add(extracted);
      }
    }

    rec.cost_bound = c_max;
    timing.end = seconds_since(t0);
    trace.iterations.push_back(std::move(rec));
    trace.timings.push_back(timing);
    const IterationRecord& last = trace.iterations.back();
    if (last.search == SearchOutcome::TimedOut || last.repair == RepairOutcome::TimedOut) break;
  }
  return result;
}

}  // namespace kmp
