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
#include "radfed/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace radfed {
namespace {

const Landmark& find_landmark(std::span<const Landmark> landmarks, const std::string& label) {
  auto it = std::find_if(landmarks.begin(), landmarks.end(),
                         [&](const Landmark& l) { return l.label == label; });
  if (it == landmarks.end()) throw ConfigError("unknown landmark label '" + label + "'");
  return *it;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

void sample_body(const Trajectory& traj, const Vec2& center, Rng& rng,
                 std::vector<ScenePoint>& out) {
  const TargetSpec& spec = traj.spec();
  std::poisson_distribution<int> count(spec.points_per_frame);
  std::normal_distribution<double> unit(0.0, 1.0);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    Vec3 p(center.x(), center.y(), spec.center_height);
    p.x() += spec.body_extent.x() * unit(rng);
    p.y() += spec.body_extent.y() * unit(rng);
    p.z() += spec.body_extent.z() * unit(rng);
    out.push_back({spec.id, p});
  }
}

}  // namespace

Trajectory::Trajectory(const TargetSpec& spec, std::span<const Landmark> landmarks)
    : spec_(spec) {
  if (spec.waypoints.empty()) {
    throw ConfigError("target " + std::to_string(spec.id) + " has no waypoints");
  }
  for (const auto& label : spec.waypoints) {
    vertices_.push_back(find_landmark(landmarks, label).position);
  }
  cumulative_.push_back(0.0);
  for (std::size_t i = 1; i < vertices_.size(); ++i) {
    cumulative_.push_back(cumulative_.back() + (vertices_[i] - vertices_[i - 1]).norm());
  }
}

Vec2 Trajectory::position_at(double s) const {
  if (s <= 0.0 || vertices_.size() == 1) return vertices_.front();
  if (s >= length()) return vertices_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const std::size_t seg = static_cast<std::size_t>(it - cumulative_.begin()) - 1;
  const double seg_len = cumulative_[seg + 1] - cumulative_[seg];
  if (seg_len == 0.0) return vertices_[seg + 1];
  const double t = (s - cumulative_[seg]) / seg_len;
  return vertices_[seg] + t * (vertices_[seg + 1] - vertices_[seg]);
}

std::string Trajectory::segment_near(const Vec2& p) const {
  const auto& labels = spec_.waypoints;
  if (vertices_.size() == 1) return labels.front();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < vertices_.size(); ++i) {
    const double d = point_segment_distance(p, vertices_[i], vertices_[i + 1]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return labels[best] + "-" + labels[best + 1];
}

std::vector<Vec2> landmark_path(std::span<const Landmark> landmarks,
                                std::span<const std::string> waypoints, double speed,
                                double dt) {
  if (!(dt > 0.0)) throw ConfigError("landmark_path: dt must be positive");
  TargetSpec spec;
  spec.waypoints.assign(waypoints.begin(), waypoints.end());
  const Trajectory traj(spec, landmarks);
  if (waypoints.size() == 1) return {traj.position_at(0.0)};
  if (!(speed > 0.0)) throw ConfigError("landmark_path: speed must be positive");

  const double step = speed * dt;
  const double total = traj.length();
  std::vector<Vec2> centers;
  // Integer step count avoids drift from repeated accumulation.
  const auto full_steps = static_cast<std::int64_t>(std::floor(total / step + 1e-9));
  for (std::int64_t i = 0; i <= full_steps; ++i) {
    centers.push_back(traj.position_at(std::min(total, static_cast<double>(i) * step)));
  }
  if ((centers.back() - traj.position_at(total)).norm() > 1e-12) {
    centers.push_back(traj.position_at(total));
  }
  return centers;
}

Scene initial_scene(std::span<const Trajectory> trajectories, Rng& rng) {
  Scene scene;
  for (const auto& traj : trajectories) {
    TargetState st{traj.spec().id, 0.0, traj.position_at(0.0)};
    scene.targets.push_back(st);
    sample_body(traj, st.center, rng, scene.points);
  }
  return scene;
}

Scene advance_scene(const Scene& scene, std::span<const Trajectory> trajectories, double dt,
                    Rng& rng) {
  if (!(dt > 0.0)) throw ContractError("advance_scene: dt must be positive");
  Scene next;
  next.epoch = scene.epoch + 1;
  for (const auto& prev : scene.targets) {
    auto it = std::find_if(trajectories.begin(), trajectories.end(),
                           [&](const Trajectory& t) { return t.spec().id == prev.id; });
    if (it == trajectories.end()) {
      throw ContractError("advance_scene: no trajectory for target " + std::to_string(prev.id));
    }
    const double progress = std::min(prev.progress + it->spec().speed * dt, it->length());
    TargetState st{prev.id, progress, it->position_at(progress)};
    next.targets.push_back(st);
    sample_body(*it, st.center, rng, next.points);
  }
  return next;
}

}  // namespace radfed
