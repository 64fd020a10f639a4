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
/**
 * \file scene.hpp
 * \brief Ground-truth scene: targets walking landmark trajectories, each one
 * emitting a cloud of true body points per epoch.
 */
#pragma once

#include <span>
#include <string>
#include <vector>

#include "radfed/types.hpp"

namespace radfed {

struct Landmark {
  std::string label;
  Vec2 position = Vec2::Zero();
};

struct TargetSpec {
  int id = 0;
  std::vector<std::string> waypoints;
  double speed = 0.0;                       // m/s
  Vec3 body_extent = Vec3(0.12, 0.12, 0.4); // per-axis std-dev, m
  double points_per_frame = 550.0;          // Poisson mean
  double center_height = 1.0;               // body center z, m
};

/// Piecewise-linear path through a target's waypoints, parameterized by arc length.
class Trajectory {
 public:
  Trajectory(const TargetSpec& spec, std::span<const Landmark> landmarks);

  const TargetSpec& spec() const { return spec_; }
  double length() const { return cumulative_.back(); }

  /// Point at arc length s, clamped to [0, length()].
  Vec2 position_at(double s) const;

  /// Label of the path segment nearest to p ("C-D"); the landmark label for
  /// single-waypoint paths.
  std::string segment_near(const Vec2& p) const;

 private:
  TargetSpec spec_;
  std::vector<Vec2> vertices_;
  std::vector<double> cumulative_;
};

/// Centers sampled every speed*dt of arc length from the first to the last
/// waypoint; the last landmark is always the final center.
std::vector<Vec2> landmark_path(std::span<const Landmark> landmarks,
                                std::span<const std::string> waypoints, double speed,
                                double dt);

struct ScenePoint {
  int target_id = 0;
  Vec3 position = Vec3::Zero();
};

struct TargetState {
  int id = 0;
  double progress = 0.0;  // arc length travelled
  Vec2 center = Vec2::Zero();
};

struct Scene {
  Epoch epoch = 0;
  std::vector<ScenePoint> points;
  std::vector<TargetState> targets;
};

/// Scene at epoch 0 with every target at its first waypoint.
Scene initial_scene(std::span<const Trajectory> trajectories, Rng& rng);

/// One Markov step: move each target speed*dt along its path (clamped at the
/// end) and re-sample its body points. Reads nothing but the input scene.
Scene advance_scene(const Scene& scene, std::span<const Trajectory> trajectories, double dt,
                    Rng& rng);

}  // namespace radfed
