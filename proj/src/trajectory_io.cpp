#include "kmp/trajectory_io.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

namespace kmp {
namespace {

using json = nlohmann::json;

constexpr const char* kFormatName = "kmp-trajectory";

json rows(const std::vector<State>& vs) {
  json out = json::array();
  for (const auto& v : vs) out.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return out;
}

std::vector<State> read_rows(const std::string& file, const json& j, const char* field, int dim) {
  if (!j.is_array()) throw FormatError(file + ": field '" + field + "' must be a list");
  std::vector<State> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = std::string(field) + "[" + std::to_string(i) + "]";
    if (!j[i].is_array()) throw FormatError(file + ": field '" + where + "' must be a list");
    const auto v = j[i].get<std::vector<double>>();
    if (static_cast<int>(v.size()) != dim) {
      throw FormatError(file + ": field '" + where + "' must have " + std::to_string(dim) +
                        " entries");
    }
    out.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), dim));
  }
  return out;
}

}  // namespace

TrajectoryFile make_trajectory_file(const SystemModel& system, const Trajectory& traj) {
  TrajectoryFile f;
  f.system = system.name;
  f.variant = system.variant;
  f.dt = system.dt;
  f.traj = traj;
  f.cost = static_cast<double>(traj.steps()) * system.dt;
  return f;
}

void save_trajectory(const TrajectoryFile& f, const std::filesystem::path& path) {
  json j = {
      {"format", kFormatName},
      {"version", kTrajectoryVersion},
      {"system", f.system},
      {"variant", f.variant},
      {"dt", f.dt},
      {"cost", f.cost},
      {"steps", f.traj.steps()},
      {"states", rows(f.traj.states)},
      {"actions", rows(f.traj.actions)},
  };
  if (f.delta) j["delta"] = *f.delta;
  if (f.residuals) {
    const FeasibilityReport& r = *f.residuals;
    j["residuals"] = {{"dynamics_inf_norm", r.dynamics_inf_norm},
                      {"bound_violation", r.bound_violation},
                      {"collision_violation", r.collision_violation},
                      {"start_gap", r.start_gap},
                      {"goal_gap", r.goal_gap},
                      {"ok", r.ok}};
  }
  std::ofstream out(path);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << j.dump(1) << '\n';
}

TrajectoryFile load_trajectory(const std::filesystem::path& path) {
  const std::string file = path.string();
  std::ifstream in(path);
  if (!in) throw FormatError(file + ": cannot open file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(file + ": " + e.what());
  }
  auto field = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw FormatError(file + ": missing field '" + key + "'");
    return j.at(key);
  };

  TrajectoryFile f;
  try {
    if (field("format").get<std::string>() != kFormatName) {
      throw FormatError(file + ": not a trajectory file");
    }
    if (field("version").get<int>() != kTrajectoryVersion) {
      throw FormatError(file + ": unsupported trajectory version");
    }
    f.system = field("system").get<std::string>();
    f.variant = field("variant").get<std::string>();
    f.dt = field("dt").get<double>();
    const SystemModel system = make_system(f.system, f.variant);
    f.traj.states = read_rows(file, field("states"), "states", system.state_dim);
    f.traj.actions = read_rows(file, field("actions"), "actions", system.control_dim);
    if (f.traj.states.size() != f.traj.actions.size() + 1) {
      throw FormatError(file + ": 'states' must have one more entry than 'actions'");
    }
    f.cost = j.contains("cost") ? j.at("cost").get<double>()
                                : static_cast<double>(f.traj.steps()) * f.dt;
    if (j.contains("delta")) f.delta = j.at("delta").get<double>();
    if (j.contains("residuals")) {
      const json& r = j.at("residuals");
      FeasibilityReport rep;
      rep.dynamics_inf_norm = r.at("dynamics_inf_norm").get<double>();
      rep.bound_violation = r.at("bound_violation").get<double>();
      rep.collision_violation = r.at("collision_violation").get<std::size_t>();
      rep.start_gap = r.at("start_gap").get<double>();
      rep.goal_gap = r.at("goal_gap").get<double>();
      rep.ok = r.at("ok").get<bool>();
      f.residuals = rep;
    }
  } catch (const json::exception& e) {
    throw FormatError(file + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(file + ": " + e.what());
  }
  return f;
}

}  // namespace kmp
