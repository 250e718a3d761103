#include <catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "kmp/errors.hpp"
#include "kmp/primitives.hpp"
#include "support.hpp"

using namespace kmp;
using Catch::Matchers::WithinAbs;
namespace fs = std::filesystem;

namespace {

State vec(std::initializer_list<double> v) {
  State x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) x(i++) = a;
  return x;
}

fs::path scratch_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "kmp-unit";
  fs::create_directories(dir);
  return dir / name;
}

Trajectory arc(const SystemModel& sys, int steps) {
  Trajectory t;
  for (int k = 0; k < steps; ++k) t.actions.push_back(vec({0.4, 0.3 - 0.05 * k}));
  t.states = rollout(sys, vec({1.0, 2.0, 0.5}), t.actions);
  return t;
}

}  // namespace

TEST_CASE("splitting into fixed-length pieces", "[primitives]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  const Trajectory t10 = arc(sys, 10);
  auto pieces = split_motion(sys, t10.states, t10.actions, 5);
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0].steps() == 5);
  CHECK(pieces[1].steps() == 5);

  const Trajectory t12 = arc(sys, 12);
  pieces = split_motion(sys, t12.states, t12.actions, 5);
  REQUIRE(pieces.size() == 3);
  CHECK(pieces[2].steps() == 2);
  for (const MotionPrimitive& m : pieces) {
    CHECK(position(m.start()).norm() == 0.0);
    CHECK(validate_primitive(sys, m));
    CHECK_THAT(m.cost, WithinAbs(0.1 * static_cast<double>(m.steps()), 1e-12));
  }
  // The second piece keeps its heading, only the position moves.
  CHECK_THAT(pieces[1].start()(2), WithinAbs(t12.states[5](2), 1e-15));

  // A trailing single step is dropped.
  const Trajectory t11 = arc(sys, 11);
  CHECK(split_motion(sys, t11.states, t11.actions, 5).size() == 2);
}

TEST_CASE("extraction skips invalid transitions", "[primitives]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  Trajectory t = arc(sys, 10);
  t.actions[4](1) = 0.9;  // out of bounds; states stay consistent with it
  t.states = rollout(sys, t.states.front(), t.actions);
  const auto pieces = extract_primitives(sys, t.states, t.actions, 10);
  REQUIRE(pieces.size() == 2);
  CHECK(pieces[0].steps() == 4);
  CHECK(pieces[1].steps() == 5);
  CHECK_THAT(pieces[1].start()(2), WithinAbs(t.states[5](2), 1e-15));

  // A state jump breaks the run the same way.
  Trajectory j = arc(sys, 10);
  j.states[6](0) += 0.01;
  const auto split = extract_primitives(sys, j.states, j.actions, 10);
  REQUIRE(split.size() == 2);
  CHECK(split[0].steps() == 5);
  CHECK(split[1].steps() == 3);
}

TEST_CASE("primitive validation", "[primitives]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  const MotionPrimitive good = test::constant_motion(sys, vec({0, 0, 0.3}), vec({0.5, 0.1}), 5);
  CHECK(validate_primitive(sys, good));
  MotionPrimitive shifted = good;
  for (State& x : shifted.states) x(0) += 1.0;
  CHECK_FALSE(validate_primitive(sys, shifted));
  MotionPrimitive wrong_cost = good;
  wrong_cost.cost = 1.0;
  CHECK_FALSE(validate_primitive(sys, wrong_cost));
  MotionPrimitive fast = test::constant_motion(sys, vec({0, 0, 0}), vec({0.6, 0.0}), 5);
  CHECK_FALSE(validate_primitive(sys, fast));
}

TEST_CASE("generation is exact and deterministic", "[primitives]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  const auto a = generate_primitives(sys, 40, 5, 7);
  const auto b = generate_primitives(sys, 40, 5, 7);
  const auto c = generate_primitives(sys, 40, 5, 8);
  REQUIRE(a.size() == 40);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(validate_primitive(sys, a[i]));
    CHECK(a[i].steps() <= 5);
    REQUIRE(a[i].states.size() == b[i].states.size());
    for (std::size_t k = 0; k < a[i].states.size(); ++k) CHECK(a[i].states[k] == b[i].states[k]);
  }
  CHECK(a[0].states.back() != c[0].states.back());
}

TEST_CASE("dispersion order matches a direct greedy selection", "[primitives]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  const StateMetric metric;
  std::mt19937_64 rng(51);
  std::vector<MotionPrimitive> motions;
  for (int i = 0; i < 60; ++i) {
    const State s = vec({0, 0, test::uniform(rng, -3, 3)});
    motions.push_back(test::constant_motion(sys, s, test::random_control(sys, rng),
                                            2 + static_cast<int>(rng() % 4)));
  }
  const auto sorted = sort_by_dispersion(metric, sys, motions);
  REQUIRE(sorted.size() == motions.size());

  auto d = [&](const State& a, const State& b) { return test::unicycle_distance(metric, a, b); };
  std::vector<std::size_t> order;
  std::vector<bool> used(motions.size(), false);
  std::size_t first = 0;
  for (std::size_t i = 1; i < motions.size(); ++i) {
    if (d(motions[i].start(), motions[i].end()) > d(motions[first].start(), motions[first].end())) {
      first = i;
    }
  }
  order.push_back(first);
  used[first] = true;
  while (order.size() < motions.size()) {
    std::size_t pick = 0;
    double score = -1.0;
    for (std::size_t i = 0; i < motions.size(); ++i) {
      if (used[i]) continue;
      double ds = 1e300, de = 1e300;
      for (std::size_t j : order) {
        ds = std::min(ds, d(motions[i].start(), motions[j].start()));
        de = std::min(de, d(motions[i].end(), motions[j].end()));
      }
      if (ds + de > score) {
        score = ds + de;
        pick = i;
      }
    }
    order.push_back(pick);
    used[pick] = true;
  }
  for (std::size_t i = 0; i < order.size(); ++i) {
    INFO("position " << i);
    CHECK(sorted[i].states.back() == motions[order[i]].states.back());
  }
}

TEST_CASE("delta is the mean b_d-th neighbor distance", "[primitives]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  const StateMetric metric;
  const auto motions = generate_primitives(sys, 60, 5, 3);
  std::mt19937_64 rng(52);
  std::vector<State> samples;
  for (int i = 0; i < 30; ++i) samples.push_back(test::random_state(sys, rng));
  for (int b : {1, 5, 20, 60}) {
    double sum = 0.0;
    for (const State& x : samples) {
      State origin = x;
      origin(0) = origin(1) = 0.0;
      std::vector<double> dist;
      for (const MotionPrimitive& m : motions) {
        dist.push_back(test::unicycle_distance(metric, origin, m.start()));
      }
      std::sort(dist.begin(), dist.end());
      sum += dist[static_cast<std::size_t>(b - 1)];
    }
    CHECK_THAT(compute_delta(metric, sys, motions, b, samples), WithinAbs(sum / 30.0, 1e-12));
  }
  CHECK_THROWS(compute_delta(metric, sys, motions, 61, samples));
  // More primitives never push the estimate up for a fixed sample.
  const std::span<const MotionPrimitive> all(motions);
  CHECK(compute_delta(metric, sys, all, 5, samples) <=
        compute_delta(metric, sys, all.first(30), 5, samples));
}

TEST_CASE("library files round trip and reject damage", "[primitives]") {
  const SystemModel sys = make_system("unicycle1", "v0");
  PrimitiveLibrary lib;
  lib.system = sys.name;
  lib.variant = sys.variant;
  lib.primitives = generate_primitives(sys, 25, 5, 4);
  const fs::path path = scratch_file("lib.kmplib");
  save_library(lib, path);

  const PrimitiveLibrary back = load_library(path, &sys);
  REQUIRE(back.primitives.size() == 25);
  for (std::size_t i = 0; i < 25; ++i) {
    REQUIRE(back.primitives[i].states.size() == lib.primitives[i].states.size());
    for (std::size_t k = 0; k < lib.primitives[i].states.size(); ++k) {
      CHECK(back.primitives[i].states[k] == lib.primitives[i].states[k]);
    }
    CHECK(back.primitives[i].cost == lib.primitives[i].cost);
  }

  const SystemModel other = make_system("unicycle1", "v2");
  CHECK_THROWS_AS(load_library(path, &other), FormatError);

  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  const fs::path cut = scratch_file("cut.kmplib");
  std::ofstream(cut, std::ios::binary) << bytes.substr(0, bytes.size() - 9);
  CHECK_THROWS_AS(load_library(cut), FormatError);

  std::string flipped = bytes;
  flipped[flipped.size() - 20] ^= 0x40;
  const fs::path bad = scratch_file("flip.kmplib");
  std::ofstream(bad, std::ios::binary) << flipped;
  CHECK_THROWS_AS(load_library(bad), FormatError);

  CHECK_THROWS_AS(load_library(scratch_file("missing.kmplib")), FormatError);
}
