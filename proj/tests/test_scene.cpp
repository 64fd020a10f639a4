// Copyright 2026, The radfed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <vector>

#include "radfed/scene.hpp"

using namespace radfed;

namespace {

std::vector<Landmark> room() {
  return {{"A", {0.0, 0.0}}, {"B", {1.0, 0.0}}, {"C", {3.0, 4.0}}, {"D", {3.0, 0.0}}};
}

TargetSpec walker(int id, std::vector<std::string> path, double speed) {
  TargetSpec t;
  t.id = id;
  t.waypoints = std::move(path);
  t.speed = speed;
  return t;
}

}  // namespace

TEST_SUITE("scene") {
  TEST_CASE("landmark_path: single waypoint stays put") {
    const auto lm = room();
    const std::vector<std::string> wp{"B"};
    const auto c = landmark_path(lm, wp, 2.0, 0.1);
    REQUIRE(c.size() == 1);
    CHECK(c[0] == Vec2(1.0, 0.0));
  }

  TEST_CASE("landmark_path: uniform motion") {
    const auto lm = room();
    const std::vector<std::string> wp{"A", "B"};
    const auto c = landmark_path(lm, wp, 1.0, 0.5);
    REQUIRE(c.size() == 3);
    CHECK((c[0] - Vec2(0.0, 0.0)).norm() < 1e-12);
    CHECK((c[1] - Vec2(0.5, 0.0)).norm() < 1e-12);
    CHECK((c[2] - Vec2(1.0, 0.0)).norm() < 1e-12);
  }

  TEST_CASE("landmark_path: arc-length spacing on a diagonal") {
    const auto lm = room();
    const std::vector<std::string> wp{"A", "C"};
    const auto c = landmark_path(lm, wp, 1.0, 1.0);
    REQUIRE(c.size() == 6);
    for (std::size_t i = 1; i < c.size(); ++i) {
      // Oracle: the straight line from A to C at unit spacing.
      const Vec2 expect = Vec2(3.0, 4.0) * (static_cast<double>(i) / 5.0);
      CHECK((c[i] - expect).norm() < 1e-9);
      CHECK(std::abs((c[i] - c[i - 1]).norm() - 1.0) < 1e-9);
    }
    CHECK(c.back() == Vec2(3.0, 4.0));
  }

  TEST_CASE("landmark_path: multi-segment path ends on the last landmark") {
    const auto lm = room();
    const std::vector<std::string> wp{"A", "D", "C"};
    const auto c = landmark_path(lm, wp, 0.7, 0.1);
    CHECK(c.front() == Vec2(0.0, 0.0));
    CHECK((c.back() - Vec2(3.0, 4.0)).norm() < 1e-12);
    for (std::size_t i = 1; i < c.size(); ++i) CHECK((c[i] - c[i - 1]).norm() <= 0.07 + 1e-9);
  }

  TEST_CASE("landmark_path: unknown label is a configuration error") {
    const auto lm = room();
    const std::vector<std::string> wp{"A", "Z"};
    CHECK_THROWS_AS(landmark_path(lm, wp, 1.0, 0.1), ConfigError);
  }

  TEST_CASE("advance_scene: empty scene") {
    Rng rng(1);
    const std::vector<Trajectory> none;
    const Scene s0 = initial_scene(none, rng);
    const Scene s1 = advance_scene(s0, none, 0.01, rng);
    CHECK(s1.points.empty());
    CHECK(s1.epoch == s0.epoch + 1);
  }

  TEST_CASE("advance_scene: zero body extent puts every point on the center") {
    auto t = walker(1, {"A", "B"}, 1.0);
    t.body_extent = Vec3::Zero();
    const auto lm = room();
    const std::vector<Trajectory> tr{Trajectory(t, lm)};
    Rng rng(2);
    const Scene s = advance_scene(initial_scene(tr, rng), tr, 0.1, rng);
    REQUIRE(!s.points.empty());
    for (const auto& p : s.points) {
      CHECK(p.position.x() == doctest::Approx(0.1));
      CHECK(p.position.y() == 0.0);
      CHECK(p.position.z() == t.center_height);
    }
  }

  TEST_CASE("advance_scene: sample mean near the center") {
    auto t = walker(1, {"A", "B"}, 1.0);
    t.points_per_frame = 1000;
    t.body_extent = Vec3(0.2, 0.2, 0.5);
    const auto lm = room();
    const std::vector<Trajectory> tr{Trajectory(t, lm)};
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      Rng rng = make_stream(seed, 0);
      const Scene s = advance_scene(initial_scene(tr, rng), tr, 0.1, rng);
      Vec3 mean = Vec3::Zero();
      for (const auto& p : s.points) mean += p.position;
      mean /= static_cast<double>(s.points.size());
      const Vec3 center(s.targets[0].center.x(), s.targets[0].center.y(), t.center_height);
      const Vec3 bound = 3.0 * t.body_extent / std::sqrt(1000.0);
      for (int a = 0; a < 3; ++a) CHECK(std::abs(mean[a] - center[a]) < bound[a]);
    }
  }

  TEST_CASE("properties: speed bound, clamping, Markov determinism") {
    const auto lm = room();
    const std::vector<Trajectory> tr{Trajectory(walker(1, {"A", "D", "C"}, 1.3), lm),
                                     Trajectory(walker(2, {"C", "B"}, 0.6), lm)};
    Rng rng(3);
    Scene s = initial_scene(tr, rng);
    for (int e = 0; e < 900; ++e) {
      Rng r1(100 + e), r2(100 + e);
      const Scene a = advance_scene(s, tr, 0.01, r1);
      const Scene b = advance_scene(s, tr, 0.01, r2);
      REQUIRE(a.points.size() == b.points.size());
      for (std::size_t i = 0; i < a.points.size(); ++i) {
        REQUIRE(a.points[i].position == b.points[i].position);
      }
      for (std::size_t k = 0; k < a.targets.size(); ++k) {
        const double speed = tr[k].spec().speed;
        CHECK((a.targets[k].center - s.targets[k].center).norm() <= speed * 0.01 + 1e-9);
        for (const auto& p : a.points) CHECK(p.target_id >= 1);
      }
      s = a;
    }
    CHECK((s.targets[1].center - Vec2(1.0, 0.0)).norm() < 1e-12);  // clamped at B
  }

  TEST_CASE("segment attribution") {
    const auto lm = room();
    const Trajectory t(walker(1, {"A", "D", "C"}, 1.0), lm);
    CHECK(t.segment_near({1.5, 0.1}) == "A-D");
    CHECK(t.segment_near({2.9, 3.0}) == "D-C");
    const Trajectory still(walker(2, {"B"}, 0.0), lm);
    CHECK(still.segment_near({0.0, 0.0}) == "B");
  }
}
