#include <catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kmp/bench.hpp"
#include "kmp/errors.hpp"
#include "kmp/primitives.hpp"
#include "kmp/scenario.hpp"
#include "kmp/trajectory_io.hpp"
#include "support.hpp"

using namespace kmp;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kmp-unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string read(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const char* kScenario = R"(name: box
system: unicycle1
variant: v0
environment:
  min: [0, 0]
  max: [2, 1]
  obstacles:
    - center: [1, 0.5]
      size: [0.2, 0.2]
start: [0.3, 0.5, 0]
goal: [1.7, 0.5, 0]
)";

std::string replace(std::string s, const std::string& from, const std::string& to) {
  s.replace(s.find(from), from.size(), to);
  return s;
}

std::string error_of(const fs::path& p) {
  try {
    load_scenario(p);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("trajectory files round trip", "[io]") {
  const SystemModel sys = make_system("unicycle2");
  std::mt19937_64 rng(81);
  Trajectory t;
  t.states.push_back(test::random_state(sys, rng));
  for (int k = 0; k < 9; ++k) {
    t.actions.push_back(test::random_control(sys, rng));
    t.states.push_back(step(sys, t.states.back(), t.actions.back()));
  }
  TrajectoryFile f = make_trajectory_file(sys, t);
  f.delta = 0.25;
  f.residuals = FeasibilityReport{1e-7, 0.0, 0, 0.0, 2e-5, true};
  const fs::path p = scratch_dir("traj") / "t.json";
  save_trajectory(f, p);
  const TrajectoryFile g = load_trajectory(p);
  CHECK(g.system == "unicycle2");
  CHECK(g.variant == "v0");
  CHECK_THAT(g.cost, WithinAbs(0.9, 1e-12));
  REQUIRE(g.traj.states.size() == t.states.size());
  for (std::size_t k = 0; k < t.states.size(); ++k) {
    CHECK((g.traj.states[k] - t.states[k]).cwiseAbs().maxCoeff() <= 1e-12);
  }
  for (std::size_t k = 0; k < t.actions.size(); ++k) {
    CHECK((g.traj.actions[k] - t.actions[k]).cwiseAbs().maxCoeff() <= 1e-12);
  }
  REQUIRE(g.delta);
  CHECK(*g.delta == 0.25);
  REQUIRE(g.residuals);
  CHECK(g.residuals->goal_gap == 2e-5);
  CHECK(g.residuals->ok);
}

TEST_CASE("malformed trajectory files name the field", "[io]") {
  const SystemModel sys = make_system("unicycle1");
  Trajectory t;
  t.actions.assign(2, Control::Zero(2));
  t.states.assign(3, State::Zero(3));
  const fs::path dir = scratch_dir("badtraj");
  save_trajectory(make_trajectory_file(sys, t), dir / "ok.json");
  std::string text = read(dir / "ok.json");

  // Drop one component of the last state.
  const auto pos = text.rfind("0.0,");
  REQUIRE(pos != std::string::npos);
  write(dir / "short.json", text.substr(0, pos) + text.substr(pos + 4));
  try {
    load_trajectory(dir / "short.json");
    FAIL("expected a FormatError");
  } catch (const FormatError& e) {
    CHECK_THAT(std::string(e.what()), ContainsSubstring("states["));
  }

  write(dir / "nosys.json", replace(text, "\"system\"", "\"sistem\""));
  CHECK_THROWS_WITH(load_trajectory(dir / "nosys.json"), ContainsSubstring("system"));
  write(dir / "garbage.json", "{not json");
  CHECK_THROWS_AS(load_trajectory(dir / "garbage.json"), FormatError);
}

TEST_CASE("scenario files", "[io]") {
  const fs::path dir = scratch_dir("scenario");
  write(dir / "ok.yaml", kScenario);
  const Scenario sc = load_scenario(dir / "ok.yaml");
  CHECK(sc.name == "box");
  CHECK(sc.system.id() == "unicycle1_v0");
  CHECK(sc.env.obstacles.size() == 1);
  CHECK(sc.env.obstacles[0].half.isApprox(Eigen::Vector2d(0.1, 0.1)));

  save_scenario(sc, dir / "copy.yaml");
  const Scenario again = load_scenario(dir / "copy.yaml");
  CHECK(again.goal == sc.goal);
  CHECK(again.shape.sizes[0] == sc.shape.sizes[0]);

  write(dir / "nogoal.yaml", replace(kScenario, "goal: [1.7, 0.5, 0]\n", ""));
  CHECK_THAT(error_of(dir / "nogoal.yaml"), ContainsSubstring("'goal'"));

  write(dir / "short.yaml", replace(kScenario, "start: [0.3, 0.5, 0]", "start: [0.3, 0.5]"));
  CHECK_THAT(error_of(dir / "short.yaml"), ContainsSubstring("'start'"));

  write(dir / "blocked.yaml", replace(kScenario, "goal: [1.7, 0.5, 0]", "goal: [1.0, 0.5, 0]"));
  CHECK_THAT(error_of(dir / "blocked.yaml"), ContainsSubstring("not a valid state"));

  write(dir / "system.yaml", replace(kScenario, "unicycle1", "hovercraft"));
  CHECK_THAT(error_of(dir / "system.yaml"), ContainsSubstring("hovercraft"));

  write(dir / "box.yaml", replace(kScenario, "size: [0.2, 0.2]", "size: [0.2, -1]"));
  CHECK_THROWS_AS(load_scenario(dir / "box.yaml"), FormatError);
}

TEST_CASE("medians and seeds", "[io]") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS(median({}));
  CHECK(trial_seed(1, "park", 0) == trial_seed(1, "park", 0));
  CHECK(trial_seed(1, "park", 0) != trial_seed(1, "park", 1));
  CHECK(trial_seed(1, "park", 0) != trial_seed(1, "wall", 0));
  CHECK(trial_seed(1, "park", 0) != trial_seed(2, "park", 0));
}

TEST_CASE("timelines round trip and reproduce the summary", "[io]") {
  std::vector<TrialResult> results;
  for (int t = 0; t < 4; ++t) {
    TrialResult r;
    r.scenario = "a";
    r.trial = t;
    r.seed = 100 + t;
    r.success = t != 3;
    if (r.success) {
      r.timeline = {{0.5 * (t + 1), 4.0 - t}, {2.0 + t, 3.0 - 0.5 * t}};
      r.iterations = {{0.3, 100}, {0.1, 300}};
    }
    results.push_back(r);
  }
  const fs::path dir = scratch_dir("timelines");
  write_timelines_json(results, dir / "t.json");
  write_results_csv(results, dir / "r.csv");
  const auto back = read_timelines_json(dir / "t.json");
  REQUIRE(back.size() == 4);
  CHECK(back[1].timeline.size() == 2);
  CHECK(back[1].iterations.size() == 2);

  const auto s = summarize(back);
  REQUIRE(s.size() == 1);
  CHECK_THAT(s[0].success_rate, WithinAbs(0.75, 1e-15));
  // Successful trials 0..2: t_first 0.5, 1.0, 1.5; J_final 3.0, 2.5, 2.0.
  CHECK(*s[0].t_first == 1.0);
  CHECK(*s[0].j_first == 3.0);
  CHECK(*s[0].j_final == 2.5);

  const std::string csv = read(dir / "r.csv");
  CHECK(csv.rfind("scenario,trial,seed,success,t_first,J_first,J_final,num_solutions\n", 0) == 0);
  CHECK_THAT(csv, ContainsSubstring("a,3,103,0,,,,0\n"));
  CHECK_THAT(csv, ContainsSubstring("a,0,100,1,0.5,4,3,2\n"));
}

TEST_CASE("benchmark runs every trial and honours the timeout", "[io]") {
  const fs::path dir = scratch_dir("bench");
  const SystemModel sys = make_system("unicycle1", "v0");
  PrimitiveLibrary lib;
  lib.system = sys.name;
  lib.variant = sys.variant;
  lib.primitives = generate_primitives(sys, 30, 5, 9);
  save_library(lib, dir / "unicycle1_v0.kmplib");
  write(dir / "a.yaml", kScenario);
  write(dir / "b.yaml", replace(kScenario, "name: box", "name: box2"));

  BenchOptions opt;
  opt.trials = 3;
  opt.timeout = 0.001;
  opt.library_dir = dir;
  const auto results = run_benchmark({dir / "a.yaml", dir / "b.yaml"}, opt);
  REQUIRE(results.size() == 6);
  for (const TrialResult& r : results) {
    CHECK_FALSE(r.success);
    CHECK(r.error.empty());
  }
  CHECK(results[0].scenario == "box");
  CHECK(results[5].scenario == "box2");
  CHECK(results[5].trial == 2);
  for (const BenchSummary& s : summarize(results)) CHECK(s.success_rate == 0.0);

  write_results_csv(results, dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 7);

  // A missing library is a failed trial, not a crash of the harness.
  opt.library_dir = dir / "nowhere";
  const auto missing = run_benchmark({dir / "a.yaml"}, opt);
  REQUIRE(missing.size() == 3);
  CHECK_FALSE(missing[0].success);
  CHECK_FALSE(missing[0].error.empty());
}

TEST_CASE("command line exit codes", "[io]") {
  const std::string cli = KMP_CLI;
  const fs::path dir = scratch_dir("cli");
  write(dir / "bad.yaml", replace(kScenario, "goal: [1.7, 0.5, 0]\n", ""));
  auto run = [](const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
  };
  CHECK(run(cli + " --help") == 0);
  CHECK(run(cli + " frobnicate") == 2);
  CHECK(run(cli + " check --scenario " + (dir / "bad.yaml").string() + " --trajectory x.json") ==
        2);
  CHECK(run(cli + " gen-primitives --system unicycle1 --count 5 --seed 1 --out " +
            (dir / "l.kmplib").string()) == 0);
  CHECK(fs::exists(dir / "l.kmplib"));
}
