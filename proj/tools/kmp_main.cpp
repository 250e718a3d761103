// Command-line front end: primitive generation, single-shot search and
// optimization, the anytime planner, trajectory checks and benchmarks.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "kmp/bench.hpp"
#include "kmp/dbastar.hpp"
#include "kmp/errors.hpp"
#include "kmp/planner.hpp"
#include "kmp/primitives.hpp"
#include "kmp/scenario.hpp"
#include "kmp/trajectory_io.hpp"
#include "kmp/trajopt.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kNoSolution = 1;
constexpr int kUsage = 2;

using namespace kmp;

struct GenArgs {
  std::string system = "unicycle1";
  std::string variant = "v0";
  int count = 1000;
  int piece_length = 5;
  std::uint64_t seed = 0;
  std::string out;
};

struct SearchArgs {
  std::string scenario;
  std::string primitives;
  int count = 0;  // 0: whole library
  double delta = 0.0;
  int b_d = 20;
  double alpha = 0.5;
  std::uint64_t seed = 0;
  std::string out;
};

struct OptimizeArgs {
  std::string scenario;
  std::string guess;
  int horizon = 0;  // 0: time search around the guess length
  std::uint64_t seed = 0;
  std::string out;
};

struct PlanArgs {
  std::string scenario;
  std::string primitives;
  double timeout = 300.0;
  std::uint64_t seed = 0;
  int max_iterations = 0;
  int b_d = 20;
  double alpha = 0.5;
  std::string out;
};

struct CheckArgs {
  std::string scenario;
  std::string trajectory;
  double delta = 0.0;  // > 0: discontinuity-bounded check instead of full feasibility
  std::uint64_t seed = 0;
};

struct BenchArgs {
  std::vector<std::string> scenarios;
  std::string library_dir = ".";
  int trials = 10;
  double timeout = 300.0;
  std::uint64_t seed = 0;
  int workers = 1;
  int b_d = 20;
  std::string out = "results";
};

void print_report(const FeasibilityReport& r) {
  std::printf("dynamics %.3e bounds %.3e collisions %zu start_gap %.3e goal_gap %.3e -> %s\n",
              r.dynamics_inf_norm, r.bound_violation, r.collision_violation, r.start_gap,
              r.goal_gap, r.ok ? "ok" : "FAIL");
}

int gen_primitives(const GenArgs& a) {
  const SystemModel system = make_system(a.system, a.variant);
  std::fprintf(stderr, "generating %d primitives for %s\n", a.count, system.id().c_str());
  PrimitiveLibrary lib;
  lib.system = system.name;
  lib.variant = system.variant;
  auto motions = generate_primitives(system, a.count, a.piece_length, a.seed);
  lib.primitives = sort_by_dispersion(lib.metric, system, std::move(motions));
  save_library(lib, a.out);
  std::printf("wrote %zu primitives to %s\n", lib.primitives.size(), a.out.c_str());
  return kOk;
}

int db_search(const SearchArgs& a) {
  const Scenario sc = load_scenario(a.scenario);
  const PrimitiveLibrary lib = load_library(a.primitives, &sc.system);
  std::size_t n = lib.primitives.size();
  if (a.count > 0) n = std::min<std::size_t>(n, a.count);
  MotionSet motions(sc.system, sc.shape, sc.metric);
  motions.add(std::span(lib.primitives).first(n));
  DbOptions opt;
  opt.alpha = a.alpha;
  opt.delta = a.delta > 0.0 ? a.delta
                            : compute_delta(sc.metric, sc.system, motions.motions(),
                                            std::min<int>(a.b_d, static_cast<int>(n)), 100, a.seed);
  const DbResult r = db_astar(sc.start, sc.goal, sc.env, motions, opt);
  std::printf("|M| %zu delta %.4f expansions %zu nodes %zu\n", n, opt.delta, r.stats.expansions,
              r.stats.nodes);
  if (!r.solution) {
    std::printf("no solution\n");
    return kNoSolution;
  }
  std::printf("cost %.2f s, %zu primitives\n", r.solution->cost, r.solution->motions.size());
  if (!a.out.empty()) {
    TrajectoryFile f = make_trajectory_file(sc.system, r.solution->traj);
    f.delta = opt.delta;
    save_trajectory(f, a.out);
  }
  return kOk;
}

int optimize(const OptimizeArgs& a) {
  const Scenario sc = load_scenario(a.scenario);
  const TrajectoryFile guess = load_trajectory(a.guess);
  if (guess.system != sc.system.name || guess.variant != sc.system.variant) {
    throw FormatError(a.guess + ": trajectory is for " + guess.system + "_" + guess.variant);
  }
  OptProblem p;
  p.system = &sc.system;
  p.env = &sc.env;
  p.shape = &sc.shape;
  p.start = sc.start;
  p.goal = sc.goal;
  p.guess = guess.traj;
  std::optional<OptResult> result;
  const int guess_horizon = std::max<int>(1, static_cast<int>(guess.traj.steps()));
  if (a.horizon > 0) {
    p.horizon = a.horizon;
    OptResult r = optimize_fixed_horizon(p);
    if (r.converged) result = std::move(r);
  } else {
    p.horizon = guess_horizon;
    result = optimize_with_time_search(p, guess_horizon).best;
  }
  if (!result) {
    std::printf("optimization failed\n");
    return kNoSolution;
  }
  std::printf("T %d (%.2f s)\n", result->horizon, result->horizon * sc.system.dt);
  print_report(result->residuals);
  if (!a.out.empty()) {
    TrajectoryFile f = make_trajectory_file(sc.system, result->traj);
    f.residuals = result->residuals;
    save_trajectory(f, a.out);
  }
  return kOk;
}

int plan(const PlanArgs& a) {
  const Scenario sc = load_scenario(a.scenario);
  const PrimitiveLibrary lib = load_library(a.primitives, &sc.system);
  PlannerConfig config;
  config.timeout = a.timeout;
  config.seed = a.seed;
  config.max_iterations = a.max_iterations;
  config.b_d = a.b_d;
  config.alpha = a.alpha;
  const std::filesystem::path out = a.out;
  if (!out.empty()) std::filesystem::create_directories(out);

  int count = 0;
  const PlanResult r = kmp_db_astar(sc, lib, config, [&](const Solution& s) {
    std::printf("[%7.2f s] iteration %d: cost %.2f s\n", s.found_at, s.iteration, s.cost);
    std::fflush(stdout);
    if (out.empty()) return;
    TrajectoryFile f = make_trajectory_file(sc.system, s.traj);
    f.residuals = s.residuals;
    char name[32];
    std::snprintf(name, sizeof name, "solution_%03d.json", count++);
    save_trajectory(f, out / name);
  });
  if (!out.empty()) {
    std::ofstream(out / "trace.json") << trace_json(r.trace);
    std::ofstream(out / "timings.json") << timings_json(r.trace);
  }
  std::printf("%zu iterations, %zu solutions\n", r.trace.iterations.size(), r.solutions.size());
  return r.best ? kOk : kNoSolution;
}

int check(const CheckArgs& a) {
  const Scenario sc = load_scenario(a.scenario);
  const TrajectoryFile f = load_trajectory(a.trajectory);
  if (a.delta > 0.0) {
    const DbBoundReport r = check_db_bounded(sc.system, sc.metric, sc.env, sc.shape, f.traj,
                                             a.delta, sc.start, sc.goal);
    std::printf("max step gap %.4f start gap %.4f goal gap %.4f violations %zu -> %s\n",
                r.max_dynamics_gap, r.start_gap, r.goal_gap, r.violations.size(),
                r.ok ? "ok" : "FAIL");
    return r.ok ? kOk : kNoSolution;
  }
  const FeasibilityReport r =
      feasibility_report(sc.system, &sc.env, sc.shape, f.traj, sc.start, sc.goal);
  print_report(r);
  return r.ok ? kOk : kNoSolution;
}

int bench(const BenchArgs& a) {
  BenchOptions opt;
  opt.trials = a.trials;
  opt.timeout = a.timeout;
  opt.seed = a.seed;
  opt.workers = a.workers;
  opt.library_dir = a.library_dir;
  opt.planner.b_d = a.b_d;
  std::vector<std::filesystem::path> paths(a.scenarios.begin(), a.scenarios.end());
  const auto results = run_benchmark(paths, opt);
  const std::filesystem::path out = a.out;
  std::filesystem::create_directories(out);
  write_results_csv(results, out / "results.csv");
  write_timelines_json(results, out / "timelines.json");
  for (const TrialResult& r : results) {
    if (!r.error.empty()) {
      std::fprintf(stderr, "%s trial %d: %s\n", r.scenario.c_str(), r.trial, r.error.c_str());
    }
  }
  std::printf("%-16s %6s %8s %8s %8s\n", "scenario", "p", "t_first", "J_first", "J_final");
  for (const BenchSummary& s : summarize(results)) {
    auto cell = [](std::optional<double> v) { return v ? *v : std::nan(""); };
    std::printf("%-16s %6.2f %8.2f %8.2f %8.2f\n", s.scenario.c_str(), s.success_rate,
                cell(s.t_first), cell(s.j_first), cell(s.j_final));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinodynamic motion planning with discontinuity-bounded A*"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-primitives", "Generate a sorted primitive library");
  gen_cmd->add_option("--system", gen.system)->capture_default_str();
  gen_cmd->add_option("--variant", gen.variant)->capture_default_str();
  gen_cmd->add_option("--count", gen.count)->capture_default_str()->check(CLI::PositiveNumber);
  gen_cmd->add_option("--piece-length", gen.piece_length)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_option("--out", gen.out)->required();

  SearchArgs search;
  auto* db_cmd = app.add_subcommand("db-astar", "Run one discontinuity-bounded search");
  db_cmd->add_option("--scenario", search.scenario)->required();
  db_cmd->add_option("--primitives", search.primitives)->required();
  db_cmd->add_option("--count", search.count, "Use the first N library primitives (0: all)");
  db_cmd->add_option("--delta", search.delta, "Discontinuity bound (default: from --b-d)");
  db_cmd->add_option("--b-d", search.b_d)->capture_default_str();
  db_cmd->add_option("--alpha", search.alpha)->capture_default_str();
  db_cmd->add_option("--seed", search.seed)->capture_default_str();
  db_cmd->add_option("--out", search.out);

  OptimizeArgs opt;
  auto* opt_cmd = app.add_subcommand("optimize", "Repair a trajectory with the optimizer");
  opt_cmd->add_option("--scenario", opt.scenario)->required();
  opt_cmd->add_option("--guess", opt.guess)->required();
  opt_cmd->add_option("--T", opt.horizon, "Fixed horizon (default: time search)");
  opt_cmd->add_option("--seed", opt.seed)->capture_default_str();
  opt_cmd->add_option("--out", opt.out);

  PlanArgs plan_args;
  auto* plan_cmd = app.add_subcommand("plan", "Run the anytime planner");
  plan_cmd->add_option("--scenario", plan_args.scenario)->required();
  plan_cmd->add_option("--primitives", plan_args.primitives)->required();
  plan_cmd->add_option("--timeout", plan_args.timeout)->capture_default_str();
  plan_cmd->add_option("--seed", plan_args.seed)->capture_default_str();
  plan_cmd->add_option("--max-iterations", plan_args.max_iterations, "0: until the timeout");
  plan_cmd->add_option("--b-d", plan_args.b_d)->capture_default_str();
  plan_cmd->add_option("--alpha", plan_args.alpha)->capture_default_str();
  plan_cmd->add_option("--out", plan_args.out, "Directory for solutions and the run trace");

  CheckArgs check_args;
  auto* check_cmd = app.add_subcommand("check", "Check a trajectory against a scenario");
  check_cmd->add_option("--scenario", check_args.scenario)->required();
  check_cmd->add_option("--trajectory", check_args.trajectory)->required();
  check_cmd->add_option("--delta", check_args.delta, "Check as a delta-bounded guess");
  check_cmd->add_option("--seed", check_args.seed);

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Run benchmark trials");
  bench_cmd->add_option("--scenarios", bench_args.scenarios)->required();
  bench_cmd->add_option("--library-dir", bench_args.library_dir)->capture_default_str();
  bench_cmd->add_option("--trials", bench_args.trials)->capture_default_str();
  bench_cmd->add_option("--timeout", bench_args.timeout)->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed)->capture_default_str();
  bench_cmd->add_option("--workers", bench_args.workers)->capture_default_str();
  bench_cmd->add_option("--b-d", bench_args.b_d)->capture_default_str();
  bench_cmd->add_option("--out", bench_args.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen_cmd) return gen_primitives(gen);
    if (*db_cmd) return db_search(search);
    if (*opt_cmd) return optimize(opt);
    if (*plan_cmd) return plan(plan_args);
    if (*check_cmd) return check(check_args);
    if (*bench_cmd) return bench(bench_args);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNoSolution;
  }
  return kUsage;
}
