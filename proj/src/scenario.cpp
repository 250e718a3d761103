#include "kmp/scenario.hpp"

#include <fstream>

#include "yaml_util.hpp"

namespace kmp {

Scenario load_scenario(const std::filesystem::path& path) {
  const std::string file = path.string();
  const YAML::Node root = yaml::load_file(file);
  if (!root.IsMap()) throw FormatError(file + ": scenario must be a mapping");

  Scenario s;
  s.name = root["name"] ? root["name"].as<std::string>() : path.stem().string();
  const std::string system = yaml::require(file, root, "system", "").as<std::string>();
  const std::string variant = root["variant"] ? root["variant"].as<std::string>() : "v0";
  try {
    s.system = make_system(system, variant);
  } catch (const ConfigError& e) {
    throw FormatError(yaml::where(file, root["system"]) + ": " + e.what());
  }
  s.env = yaml::parse_environment(file, yaml::require(file, root, "environment", ""));

  s.shape = default_shape(s.system);
  if (const YAML::Node robot = root["robot"]) {
    const YAML::Node sizes = yaml::require(file, robot, "sizes", "robot.");
    if (!sizes.IsSequence() || sizes.size() != s.shape.sizes.size()) {
      throw FormatError(yaml::where(file, sizes) + ": 'robot.sizes' must list " +
                        std::to_string(s.shape.sizes.size()) + " body sizes");
    }
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      const std::string field = "robot.sizes[" + std::to_string(i) + "]";
      s.shape.sizes[i] = yaml::to_vector(file, sizes[i], field, 2);
      if (!(s.shape.sizes[i].x() > 0.0 && s.shape.sizes[i].y() > 0.0)) {
        throw FormatError(yaml::where(file, sizes[i]) + ": '" + field + "' must be positive");
      }
    }
  }

  const int n = s.system.state_dim;
  s.start = yaml::to_vector(file, yaml::require(file, root, "start", ""), "start", n);
  s.goal = yaml::to_vector(file, yaml::require(file, root, "goal", ""), "goal", n);
  normalize(s.system, s.start);
  normalize(s.system, s.goal);

  if (const YAML::Node metric = root["metric"]) {
    auto weight = [&](const char* key, double fallback) {
      return metric[key] ? yaml::to_double(file, metric[key], std::string("metric.") + key)
                         : fallback;
    };
    s.metric.translation_weight = weight("translation", s.metric.translation_weight);
    s.metric.angle_weight = weight("angle", s.metric.angle_weight);
    s.metric.velocity_weight = weight("velocity", s.metric.velocity_weight);
    try {
      validate_metric(s.metric);
    } catch (const ConfigError& e) {
      throw FormatError(yaml::where(file, metric) + ": " + e.what());
    }
  }

  if (!state_valid(s.env, s.shape, s.system, s.start)) {
    throw FormatError(yaml::where(file, root["start"]) + ": 'start' is not a valid state");
  }
  if (!state_valid(s.env, s.shape, s.system, s.goal)) {
    throw FormatError(yaml::where(file, root["goal"]) + ": 'goal' is not a valid state");
  }
  return s;
}

void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  auto seq = [](YAML::Emitter& out, const Eigen::VectorXd& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : v) out << x;
    out << YAML::EndSeq;
  };
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << s.name;
  out << YAML::Key << "system" << YAML::Value << s.system.name;
  out << YAML::Key << "variant" << YAML::Value << s.system.variant;
  out << YAML::Key << "environment" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "min" << YAML::Value;
  seq(out, s.env.min);
  out << YAML::Key << "max" << YAML::Value;
  seq(out, s.env.max);
  out << YAML::Key << "obstacles" << YAML::Value << YAML::BeginSeq;
  for (const Box& b : s.env.obstacles) {
    out << YAML::BeginMap << YAML::Key << "center" << YAML::Value;
    seq(out, b.center);
    out << YAML::Key << "size" << YAML::Value;
    seq(out, 2.0 * b.half);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  out << YAML::Key << "robot" << YAML::Value << YAML::BeginMap << YAML::Key << "sizes"
      << YAML::Value << YAML::BeginSeq;
  for (const auto& size : s.shape.sizes) seq(out, size);
  out << YAML::EndSeq << YAML::EndMap;
  out << YAML::Key << "start" << YAML::Value;
  seq(out, s.start);
  out << YAML::Key << "goal" << YAML::Value;
  seq(out, s.goal);
  out << YAML::Key << "metric" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "translation" << YAML::Value << s.metric.translation_weight;
  out << YAML::Key << "angle" << YAML::Value << s.metric.angle_weight;
  out << YAML::Key << "velocity" << YAML::Value << s.metric.velocity_weight;
  out << YAML::EndMap << YAML::EndMap;

  std::ofstream f(path);
  if (!f) throw FormatError(path.string() + ": cannot open for writing");
  f << out.c_str() << '\n';
}

}  // namespace kmp
