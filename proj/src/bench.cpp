#include "kmp/bench.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kmp/errors.hpp"
#include "kmp/hash.hpp"
#include "kmp/primitives.hpp"

namespace kmp {
namespace {

using json = nlohmann::ordered_json;

json trial_to_json(const TrialResult& r) {
  json timeline = json::array();
  for (const TimelinePoint& p : r.timeline) timeline.push_back({p.t, p.cost});
  json j = {{"scenario", r.scenario},
            {"trial", r.trial},
            {"seed", r.seed},
            {"success", r.success},
            {"timeline", timeline}};
  json iterations = json::array();
  for (const IterationSummary& it : r.iterations) iterations.push_back({it.delta, it.motions});
  j["iterations"] = iterations;
  if (r.final_traj) {
    json states = json::array(), actions = json::array();
    for (const State& x : r.final_traj->states)
      states.push_back(std::vector<double>(x.begin(), x.end()));
    for (const Control& u : r.final_traj->actions)
      actions.push_back(std::vector<double>(u.begin(), u.end()));
    j["final"] = {{"states", states}, {"actions", actions}};
  }
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

TrialResult trial_from_json(const json& j) {
  TrialResult r;
  r.scenario = j.at("scenario").get<std::string>();
  r.trial = j.at("trial").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.success = j.at("success").get<bool>();
  for (const json& p : j.at("timeline")) {
    r.timeline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  }
  if (j.contains("iterations")) {
    for (const json& it : j.at("iterations")) {
      r.iterations.push_back({it.at(0).get<double>(), it.at(1).get<std::size_t>()});
    }
  }
  if (j.contains("final")) {
    auto read = [](const json& rows) {
      std::vector<State> out;
      for (const json& row : rows) {
        const auto v = row.get<std::vector<double>>();
        out.push_back(
            Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
      return out;
    };
    Trajectory t;
    t.states = read(j.at("final").at("states"));
    t.actions = read(j.at("final").at("actions"));
    r.final_traj = std::move(t);
  }
  if (j.contains("error")) r.error = j.at("error").get<std::string>();
  return r;
}

struct Job {
  std::filesystem::path scenario_path;
  std::string scenario;
  int trial = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

// Runs in the worker process.
[[noreturn]] void run_trial(const Job& job, const BenchOptions& options) {
  // Backstop for a worker that overruns the planner deadline.
  alarm(static_cast<unsigned>(std::ceil(options.timeout)) + 120);
  int code = 0;
  TrialResult r;
  r.scenario = job.scenario;
  r.trial = job.trial;
  r.seed = job.seed;
  try {
    const Scenario sc = load_scenario(job.scenario_path);
    const auto lib_path = options.library_dir / (sc.system.id() + ".kmplib");
    const PrimitiveLibrary lib = load_library(lib_path, &sc.system);
    PlannerConfig config = options.planner;
    config.seed = job.seed;
    config.timeout = options.timeout;
    const PlanResult plan = kmp_db_astar(sc, lib, config);
    for (const Solution& s : plan.solutions) r.timeline.push_back({s.found_at, s.cost});
    for (const IterationRecord& it : plan.trace.iterations)
      r.iterations.push_back({it.delta, it.motions});
    if (plan.best) r.final_traj = plan.best->traj;
    r.success = !r.timeline.empty();
  } catch (const std::exception& e) {
    r.error = e.what();
    code = 3;
  }
  std::ofstream(job.out) << trial_to_json(r).dump() << '\n';
  std::fflush(nullptr);
  _exit(code);
}

std::string describe_status(int status) {
  if (WIFSIGNALED(status)) return "worker killed by signal " + std::to_string(WTERMSIG(status));
  if (WIFEXITED(status)) return "worker exited with status " + std::to_string(WEXITSTATUS(status));
  return "worker ended abnormally";
}

std::string format_optional(std::optional<double> v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(17);
  s << *v;
  return s.str();
}

}  // namespace

std::optional<double> TrialResult::t_first() const {
  if (timeline.empty()) return std::nullopt;
  return timeline.front().t;
}

std::optional<double> TrialResult::j_first() const {
  if (timeline.empty()) return std::nullopt;
  return timeline.front().cost;
}

std::optional<double> TrialResult::j_final() const {
  if (timeline.empty()) return std::nullopt;
  return timeline.back().cost;
}

std::uint64_t trial_seed(std::uint64_t master, const std::string& scenario, int trial) {
  return derive_seed(fnv1a(scenario, derive_seed(master, 0)), static_cast<std::uint64_t>(trial));
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<TrialResult> run_benchmark(const std::vector<std::filesystem::path>& scenarios,
                                       const BenchOptions& options) {
  if (options.trials < 1) throw ConfigError("bench: trials must be at least 1");
  if (options.workers < 1) throw ConfigError("bench: workers must be at least 1");
  if (!(options.timeout > 0.0)) throw ConfigError("bench: timeout must be positive");
  validate_config(options.planner);

  char dir_template[] = "/tmp/kmp-bench-XXXXXX";
  if (!mkdtemp(dir_template)) throw std::runtime_error("bench: cannot create a scratch directory");
  const std::filesystem::path scratch = dir_template;

  std::vector<Job> jobs;
  for (const auto& path : scenarios) {
    // Scenarios are identified by name; fall back to the file stem when the
    // file does not parse so the failure still gets its rows.
    std::string name = path.stem().string();
    try {
      name = load_scenario(path).name;
    } catch (const std::exception&) {
    }
    for (int t = 0; t < options.trials; ++t) {
      Job job{path, name, t, trial_seed(options.seed, name, t), {}};
      job.out = scratch / ("trial_" + std::to_string(jobs.size()) + ".json");
      jobs.push_back(std::move(job));
    }
  }

  std::vector<TrialResult> results(jobs.size());
  std::map<pid_t, std::size_t> running;
  std::size_t next = 0;
  auto collect = [&](pid_t pid, int status) {
    const std::size_t i = running.at(pid);
    running.erase(pid);
    const Job& job = jobs[i];
    TrialResult r;
    r.scenario = job.scenario;
    r.trial = job.trial;
    r.seed = job.seed;
    std::ifstream in(job.out);
    std::string line;
    if (in && std::getline(in, line) && !line.empty()) {
      try {
        r = trial_from_json(json::parse(line));
      } catch (const std::exception& e) {
        r.error = std::string("unreadable worker output: ") + e.what();
      }
    } else {
      r.error = describe_status(status);
    }
    if (!r.error.empty()) r.success = false;
    results[i] = std::move(r);
  };

  std::fflush(nullptr);
  while (next < jobs.size() || !running.empty()) {
    while (next < jobs.size() && static_cast<int>(running.size()) < options.workers) {
      const pid_t pid = fork();
      if (pid < 0) {
        TrialResult& r = results[next];
        r.scenario = jobs[next].scenario;
        r.trial = jobs[next].trial;
        r.seed = jobs[next].seed;
        r.error = "fork failed";
        ++next;
        continue;
      }
      if (pid == 0) run_trial(jobs[next], options);
      running[pid] = next++;
    }
    if (running.empty()) continue;
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    if (pid > 0 && running.count(pid)) collect(pid, status);
  }
  std::filesystem::remove_all(scratch);

  std::stable_sort(results.begin(), results.end(), [](const TrialResult& a, const TrialResult& b) {
    return a.scenario != b.scenario ? a.scenario < b.scenario : a.trial < b.trial;
  });
  return results;
}

std::vector<BenchSummary> summarize(const std::vector<TrialResult>& results) {
  std::map<std::string, std::vector<const TrialResult*>> groups;
  for (const TrialResult& r : results) groups[r.scenario].push_back(&r);
  std::vector<BenchSummary> out;
  for (const auto& [name, trials] : groups) {
    BenchSummary s;
    s.scenario = name;
    s.trials = static_cast<int>(trials.size());
    std::vector<double> tf, jf, jl;
    for (const TrialResult* r : trials) {
      if (!r->success) continue;
      tf.push_back(*r->t_first());
      jf.push_back(*r->j_first());
      jl.push_back(*r->j_final());
    }
    s.success_rate = static_cast<double>(tf.size()) / static_cast<double>(s.trials);
    if (!tf.empty()) {
      s.t_first = median(tf);
      s.j_first = median(jf);
      s.j_final = median(jl);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_results_csv(const std::vector<TrialResult>& results, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << "scenario,trial,seed,success,t_first,J_first,J_final,num_solutions\n";
  for (const TrialResult& r : results) {
    out << r.scenario << ',' << r.trial << ',' << r.seed << ',' << (r.success ? 1 : 0) << ','
        << format_optional(r.t_first()) << ',' << format_optional(r.j_first()) << ','
        << format_optional(r.j_final()) << ',' << r.timeline.size() << '\n';
  }
}

void write_timelines_json(const std::vector<TrialResult>& results,
                          const std::filesystem::path& path) {
  json j = {{"format", "kmp-bench-timelines"}, {"version", 1}, {"trials", json::array()}};
  for (const TrialResult& r : results) j["trials"].push_back(trial_to_json(r));
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << j.dump(1) << '\n';
}

std::vector<TrialResult> read_timelines_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(path.string() + ": cannot open file");
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != "kmp-bench-timelines") {
      throw FormatError(path.string() + ": not a timeline file");
    }
    std::vector<TrialResult> out;
    for (const json& t : j.at("trials")) out.push_back(trial_from_json(t));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace kmp
