#include "kmp/primitives.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>

#include "kmp/hash.hpp"

namespace kmp {
namespace {

using json = nlohmann::json;

constexpr const char* kFormatName = "kmp-primitive-library";

MotionPrimitive canonical(const SystemModel& system, std::span<const State> states,
                          std::span<const Control> actions) {
  MotionPrimitive m;
  const Eigen::Vector2d offset = -position(states.front());
  m.states.reserve(states.size());
  for (const State& x : states) m.states.push_back(translate(system, x, offset));
  // Exactly zero, whatever the rounding of x - x.
  m.states.front().head<2>().setZero();
  m.actions.assign(actions.begin(), actions.end());
  m.cost = static_cast<double>(actions.size()) * system.dt;
  return m;
}

void check_lengths(std::span<const State> states, std::span<const Control> actions) {
  if (states.size() != actions.size() + 1) {
    throw std::invalid_argument("state sequence must be one longer than the action sequence");
  }
}

void put_double(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

}  // namespace

double dynamics_residual(const SystemModel& system, std::span<const State> states,
                         std::span<const Control> actions) {
  check_lengths(states, actions);
  double r = 0.0;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const double gap = state_difference(system, states[k + 1], step(system, states[k], actions[k]))
                           .lpNorm<Eigen::Infinity>();
    if (!(gap <= r)) r = gap;  // propagates NaN
  }
  return r;
}

bool validate_primitive(const SystemModel& system, const MotionPrimitive& m) {
  if (m.actions.empty() || m.states.size() != m.actions.size() + 1) return false;
  for (const State& x : m.states) {
    if (x.size() != system.state_dim || !x.allFinite() || !state_in_bounds(system, x)) return false;
  }
  for (const Control& u : m.actions) {
    if (u.size() != system.control_dim || !u.allFinite()) return false;
  }
  if (m.start()(0) != 0.0 || m.start()(1) != 0.0) return false;
  if (!controls_in_bounds(system, m.actions)) return false;
  if (!(dynamics_residual(system, m.states, m.actions) <= kPrimitiveTolerance)) return false;
  return std::abs(m.cost - static_cast<double>(m.steps()) * system.dt) <= 1e-12 * (1.0 + m.cost);
}

State sample_state(const SystemModel& system, std::mt19937_64& rng, double half_extent) {
  std::uniform_real_distribution<double> pos(-half_extent, half_extent);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  for (;;) {
    State x(system.state_dim);
    for (int i = 0; i < system.state_dim; ++i) {
      switch (system.component(i)) {
        case Component::Translation:
          x(i) = pos(rng);
          break;
        case Component::Angle:
          x(i) = ang(rng);
          break;
        case Component::Velocity:
          x(i) = std::uniform_real_distribution<double>(system.x_lo(i), system.x_hi(i))(rng);
          break;
      }
    }
    normalize(system, x);
    if (state_in_bounds(system, x)) return x;
  }
}

std::vector<MotionPrimitive> split_motion(const SystemModel& system, std::span<const State> states,
                                          std::span<const Control> actions, int piece_length) {
  check_lengths(states, actions);
  if (piece_length < 2) throw std::invalid_argument("piece_length must be at least 2");
  std::vector<MotionPrimitive> out;
  const std::size_t T = actions.size();
  for (std::size_t begin = 0; begin < T; begin += piece_length) {
    const std::size_t len = std::min<std::size_t>(piece_length, T - begin);
    if (len < 2) break;
    MotionPrimitive m =
        canonical(system, states.subspan(begin, len + 1), actions.subspan(begin, len));
    if (validate_primitive(system, m)) out.push_back(std::move(m));
  }
  return out;
}

std::vector<MotionPrimitive> extract_primitives(const SystemModel& system,
                                                std::span<const State> states,
                                                std::span<const Control> actions,
                                                int piece_length) {
  check_lengths(states, actions);
  const std::size_t T = actions.size();
  auto state_ok = [&](const State& x) {
    return x.size() == system.state_dim && x.allFinite() && state_in_bounds(system, x);
  };
  auto transition_ok = [&](std::size_t k) {
    if (!state_ok(states[k]) || !state_ok(states[k + 1])) return false;
    if (actions[k].size() != system.control_dim || !actions[k].allFinite()) return false;
    if (!control_in_bounds(system, actions[k])) return false;
    const double gap = state_difference(system, states[k + 1], step(system, states[k], actions[k]))
                           .lpNorm<Eigen::Infinity>();
    return gap <= kPrimitiveTolerance;
  };

  std::vector<MotionPrimitive> out;
  std::size_t k = 0;
  while (k < T) {
    if (!transition_ok(k)) {
      ++k;
      continue;
    }
    std::size_t end = k + 1;
    while (end < T && transition_ok(end)) ++end;
    auto pieces = split_motion(system, states.subspan(k, end - k + 1), actions.subspan(k, end - k),
                               piece_length);
    std::move(pieces.begin(), pieces.end(), std::back_inserter(out));
    k = end;
  }
  return out;
}

std::vector<MotionPrimitive> generate_primitives(const SystemModel& system, int count,
                                                 int piece_length, std::uint64_t seed,
                                                 const GenerationOptions& options) {
  if (count <= 0) throw std::invalid_argument("count must be positive");
  if (piece_length < 2) throw std::invalid_argument("piece_length must be at least 2");

  std::vector<MotionPrimitive> out;
  int attempts = 0;
  int failures = 0;
  while (static_cast<int>(out.size()) < count) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(attempts)));
    ++attempts;
    const State start = sample_state(system, rng, options.half_extent);
    const State goal = sample_state(system, rng, options.half_extent);
    const auto bvp = solve_bvp(system, start, goal, options.bvp);
    std::vector<MotionPrimitive> pieces;
    if (bvp) {
      // Re-simulate so the pieces satisfy the dynamics to rounding error.
      const auto X = rollout(system, bvp->traj.states.front(), bvp->traj.actions);
      pieces = extract_primitives(system, X, bvp->traj.actions, piece_length);
    }
    if (pieces.empty()) ++failures;
    std::move(pieces.begin(), pieces.end(), std::back_inserter(out));
    if (attempts >= options.min_attempts &&
        failures > options.max_failure_rate * static_cast<double>(attempts)) {
      throw GenerationError("primitive generation for " + system.id() + " failed " +
                            std::to_string(failures) + " of " + std::to_string(attempts) +
                            " boundary value problems");
    }
  }
  out.resize(static_cast<std::size_t>(count));
  return out;
}

std::vector<MotionPrimitive> sort_by_dispersion(const StateMetric& metric,
                                                const SystemModel& system,
                                                std::vector<MotionPrimitive> motions) {
  const std::size_t n = motions.size();
  if (n <= 1) return motions;

  std::size_t first = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = distance(metric, system, motions[i].start(), motions[i].end());
    if (d > best) {
      best = d;
      first = i;
    }
  }

  std::vector<std::size_t> order{first};
  std::vector<char> picked(n, 0);
  picked[first] = 1;
  std::vector<double> min_start(n), min_end(n);
  for (std::size_t i = 0; i < n; ++i) {
    min_start[i] = distance(metric, system, motions[i].start(), motions[first].start());
    min_end[i] = distance(metric, system, motions[i].end(), motions[first].end());
  }
  while (order.size() < n) {
    std::size_t next = n;
    double score = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!picked[i] && min_start[i] + min_end[i] > score) {
        score = min_start[i] + min_end[i];
        next = i;
      }
    }
    picked[next] = 1;
    order.push_back(next);
    for (std::size_t i = 0; i < n; ++i) {
      if (picked[i]) continue;
      min_start[i] = std::min(min_start[i],
                              distance(metric, system, motions[i].start(), motions[next].start()));
      min_end[i] =
          std::min(min_end[i], distance(metric, system, motions[i].end(), motions[next].end()));
    }
  }

  std::vector<MotionPrimitive> out;
  out.reserve(n);
  for (std::size_t i : order) out.push_back(std::move(motions[i]));
  return out;
}

double compute_delta(const StateMetric& metric, const SystemModel& system,
                     std::span<const MotionPrimitive> motions, int b_d,
                     std::span<const State> samples) {
  if (b_d < 1 || static_cast<std::size_t>(b_d) > motions.size()) {
    throw std::invalid_argument("compute_delta requires 1 <= b_d <= number of motions");
  }
  if (samples.empty()) throw std::invalid_argument("compute_delta requires samples");
  NearestNeighborIndex index(system, metric, IndexMode::Rotational);
  for (const MotionPrimitive& m : motions) index.add(m.start());
  double sum = 0.0;
  for (const State& x : samples)
    sum += index.query_knn(x, static_cast<std::size_t>(b_d)).back().distance;
  return sum / static_cast<double>(samples.size());
}

double compute_delta(const StateMetric& metric, const SystemModel& system,
                     std::span<const MotionPrimitive> motions, int b_d, int n_samples,
                     std::uint64_t seed) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be positive");
  std::mt19937_64 rng(seed);
  std::vector<State> samples;
  samples.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) samples.push_back(sample_state(system, rng));
  return compute_delta(metric, system, motions, b_d, samples);
}

void save_library(const PrimitiveLibrary& lib, const std::filesystem::path& path) {
  std::string payload;
  std::vector<std::size_t> steps;
  int n = 0;
  int m = 0;
  for (const MotionPrimitive& p : lib.primitives) {
    steps.push_back(p.steps());
    n = static_cast<int>(p.start().size());
    m = static_cast<int>(p.actions.front().size());
    for (const State& x : p.states) {
      for (double v : x) put_double(payload, v);
    }
    for (const Control& u : p.actions) {
      for (double v : u) put_double(payload, v);
    }
  }
  const SystemModel system = make_system(lib.system, lib.variant);
  json header = {
      {"format", kFormatName},
      {"version", lib.version},
      {"system", lib.system},
      {"variant", lib.variant},
      {"metric",
       {{"translation", lib.metric.translation_weight},
        {"angle", lib.metric.angle_weight},
        {"velocity", lib.metric.velocity_weight}}},
      {"dt", system.dt},
      {"state_dim", lib.primitives.empty() ? system.state_dim : n},
      {"control_dim", lib.primitives.empty() ? system.control_dim : m},
      {"count", lib.primitives.size()},
      {"steps", steps},
      {"payload_bytes", payload.size()},
      {"checksum", hex(fnv1a(payload))},
  };
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(path.string() + ": cannot open for writing");
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw FormatError(path.string() + ": write failed");
}

PrimitiveLibrary load_library(const std::filesystem::path& path, const SystemModel* expected) {
  const std::string file = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(file + ": cannot open file");
  std::string line;
  if (!std::getline(in, line)) throw FormatError(file + ": missing header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(file + ":1: malformed header: " + e.what());
  }

  PrimitiveLibrary lib;
  std::vector<std::size_t> steps;
  std::size_t payload_bytes = 0;
  std::string checksum;
  int n = 0;
  int m = 0;
  try {
    if (header.at("format").get<std::string>() != kFormatName) {
      throw FormatError(file + ": not a primitive library");
    }
    lib.version = header.at("version").get<int>();
    if (lib.version != kLibraryVersion) {
      throw FormatError(file + ": unsupported library version " + std::to_string(lib.version));
    }
    lib.system = header.at("system").get<std::string>();
    lib.variant = header.at("variant").get<std::string>();
    const json& metric = header.at("metric");
    lib.metric.translation_weight = metric.at("translation").get<double>();
    lib.metric.angle_weight = metric.at("angle").get<double>();
    lib.metric.velocity_weight = metric.at("velocity").get<double>();
    steps = header.at("steps").get<std::vector<std::size_t>>();
    payload_bytes = header.at("payload_bytes").get<std::size_t>();
    checksum = header.at("checksum").get<std::string>();
    n = header.at("state_dim").get<int>();
    m = header.at("control_dim").get<int>();
    if (header.at("count").get<std::size_t>() != steps.size()) {
      throw FormatError(file + ": count does not match the step table");
    }
  } catch (const json::exception& e) {
    throw FormatError(file + ":1: invalid header: " + e.what());
  }

  if (expected != nullptr && (expected->name != lib.system || expected->variant != lib.variant)) {
    throw FormatError(file + ": library is for " + lib.system + "_" + lib.variant + ", expected " +
                      expected->id());
  }
  SystemModel system;
  try {
    system = make_system(lib.system, lib.variant);
  } catch (const ConfigError& e) {
    throw FormatError(file + ": " + e.what());
  }
  if (n != system.state_dim || m != system.control_dim) {
    throw FormatError(file + ": dimensions do not match system " + system.id());
  }

  std::size_t expected_bytes = 0;
  for (std::size_t T : steps) expected_bytes += 8 * ((T + 1) * n + T * m);
  if (expected_bytes != payload_bytes) throw FormatError(file + ": payload size mismatch");

  std::string payload(payload_bytes, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::size_t>(in.gcount()) != payload_bytes)
    throw FormatError(file + ": truncated payload");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(file + ": trailing data");
  if (hex(fnv1a(payload)) != checksum) throw FormatError(file + ": checksum mismatch");

  const auto* p = reinterpret_cast<const unsigned char*>(payload.data());
  lib.primitives.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    MotionPrimitive prim;
    for (std::size_t k = 0; k <= steps[i]; ++k) {
      State x(n);
      for (int j = 0; j < n; ++j, p += 8) x(j) = get_double(p);
      prim.states.push_back(std::move(x));
    }
    for (std::size_t k = 0; k < steps[i]; ++k) {
      Control u(m);
      for (int j = 0; j < m; ++j, p += 8) u(j) = get_double(p);
      prim.actions.push_back(std::move(u));
    }
    prim.cost = static_cast<double>(steps[i]) * system.dt;
    if (!validate_primitive(system, prim)) {
      throw FormatError(file + ": primitive " + std::to_string(i) + " fails validation");
    }
    lib.primitives.push_back(std::move(prim));
  }
  return lib;
}

}  // namespace kmp
