#pragma once

// Helpers shared by the YAML-backed readers. Not installed.

#include <yaml-cpp/yaml.h>

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "kmp/errors.hpp"
#include "kmp/geometry.hpp"

namespace kmp::yaml {

inline std::string where(const std::string& file, const YAML::Node& node) {
  const auto mark = node.Mark();
  if (mark.line < 0) return file;
  return file + ":" + std::to_string(mark.line + 1);
}

inline YAML::Node require(const std::string& file, const YAML::Node& parent, const std::string& key,
                          const std::string& path) {
  YAML::Node child = parent[key];
  if (!child) {
    throw FormatError(where(file, parent) + ": missing field '" + path + key + "'");
  }
  return child;
}

inline double to_double(const std::string& file, const YAML::Node& node, const std::string& path) {
  try {
    return node.as<double>();
  } catch (const YAML::Exception&) {
    throw FormatError(where(file, node) + ": field '" + path + "' is not a number");
  }
}

inline Eigen::VectorXd to_vector(const std::string& file, const YAML::Node& node,
                                 const std::string& path, int expected = -1) {
  if (!node.IsSequence()) {
    throw FormatError(where(file, node) + ": field '" + path + "' must be a list of numbers");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) =
        to_double(file, node[i], path + "[" + std::to_string(i) + "]");
  }
  if (expected >= 0 && v.size() != expected) {
    throw FormatError(where(file, node) + ": field '" + path + "' must have " +
                      std::to_string(expected) + " entries, got " + std::to_string(v.size()));
  }
  return v;
}

inline YAML::Node load_file(const std::string& file) {
  try {
    return YAML::LoadFile(file);
  } catch (const YAML::BadFile&) {
    throw FormatError(file + ": cannot open file");
  } catch (const YAML::ParserException& e) {
    throw FormatError(file + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
}

/// Parses and validates an `environment` mapping. Defined in geometry.cpp.
Environment parse_environment(const std::string& file, const YAML::Node& node);

}  // namespace kmp::yaml
