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

#include "radfed/sensor.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

namespace radfed {
namespace {

Mat3 yaw_rotation(double yaw) {
  return Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
}

double segment_distance_2d(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

double normalize_angle(double a) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  a = std::fmod(a, kTwoPi);
  if (a <= -std::numbers::pi) a += kTwoPi;
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

Observation observe(const Scene& scene, const RadarPose& pose, const RadarModel& model,
                    int radar_id, Rng& rng) {
  Observation obs;
  obs.cloud.frame = Frame::RadarLocal;
  obs.cloud.epoch = scene.epoch;
  obs.cloud.radar_id = radar_id;

  const Mat3 rot_t = yaw_rotation(pose.yaw).transpose();
  const Vec2 radar_xy = pose.position.head<2>();
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> unit(0.0, 1.0);

  // One angle error per body and frame, drawn in target order.
  std::vector<double> body_error(scene.targets.size());
  for (auto& e : body_error) e = model.azimuth_error * unit(rng);
  auto error_of = [&](int target_id) {
    for (std::size_t i = 0; i < scene.targets.size(); ++i) {
      if (scene.targets[i].id == target_id) return body_error[i];
    }
    return 0.0;
  };

  for (const auto& sp : scene.points) {
    // Draws happen before any censoring test so a fixed seed consumes the
    // same stream whatever the field of view.
    const double u = uniform(rng);
    const double n_range = unit(rng);
    const double n_cross = unit(rng);
    const double n_height = unit(rng);

    const Vec3 local = rot_t * (sp.position - pose.position);
    const double range = local.norm();
    const double azimuth = std::atan2(local.y(), local.x());
    if (std::abs(azimuth) > model.fov_azimuth || range > model.max_range) continue;

    double p_detect = range > 0.0 ? std::min(1.0, std::pow(model.detection_range_ref / range, 2))
                                  : 1.0;
    const Vec2 point_xy = sp.position.head<2>();
    const double point_range_xy = (point_xy - radar_xy).norm();
    for (const auto& other : scene.targets) {
      if (other.id == sp.target_id) {
        if ((point_xy - other.center).dot(radar_xy - other.center) < 0.0) {
          p_detect *= model.self_occlusion;
        }
        continue;
      }
      if ((other.center - radar_xy).norm() >= point_range_xy) continue;
      if (segment_distance_2d(other.center, radar_xy, point_xy) < model.occlusion_width) {
        p_detect *= model.occlusion_attenuation;
      }
    }
    if (u >= p_detect) continue;

    const double r_xy = local.head<2>().norm();
    const Vec3 along(std::cos(azimuth), std::sin(azimuth), 0.0);
    const Vec3 across(-std::sin(azimuth), std::cos(azimuth), 0.0);
    obs.cloud.points.push_back(local + model.range_noise * n_range * along +
                               r_xy * (model.azimuth_noise * n_cross + error_of(sp.target_id)) * across +
                               Vec3(0.0, 0.0, model.height_noise * n_height));
    obs.sources.push_back(sp.target_id);
  }

  std::poisson_distribution<int> n_outliers(model.outlier_rate);
  const int n_out = model.outlier_rate > 0.0 ? n_outliers(rng) : 0;
  for (int i = 0; i < n_out; ++i) {
    const double az = (2.0 * uniform(rng) - 1.0) * model.fov_azimuth;
    const double r = model.max_range * std::sqrt(uniform(rng));
    const double z = model.outlier_z_min + (model.outlier_z_max - model.outlier_z_min) * uniform(rng);
    obs.cloud.points.emplace_back(r * std::cos(az), r * std::sin(az), z);
    obs.sources.push_back(kOutlier);
  }
  return obs;
}

PointCloud to_global_frame(const PointCloud& cloud, const RadarPose& pose) {
  if (cloud.frame != Frame::RadarLocal) {
    throw ContractError("to_global_frame: cloud is not in the radar-local frame");
  }
  const Mat3 rot = yaw_rotation(pose.yaw);
  PointCloud out = cloud;
  out.frame = Frame::Global;
  for (auto& p : out.points) p = rot * p + pose.position;
  return out;
}

PointCloud to_local_frame(const PointCloud& cloud, const RadarPose& pose) {
  if (cloud.frame != Frame::Global) {
    throw ContractError("to_local_frame: cloud is not in the global frame");
  }
  const Mat3 rot_t = yaw_rotation(pose.yaw).transpose();
  PointCloud out = cloud;
  out.frame = Frame::RadarLocal;
  for (auto& p : out.points) p = rot_t * (p - pose.position);
  return out;
}

Preprocessed preprocess(const PointCloud& cloud, const RadarPose& pose, double eps, int min_pts) {
  Preprocessed out;
  PointCloud global = to_global_frame(cloud, pose);
  out.raw_clusters = dbscan(global.points, eps, min_pts);

  out.cloud.frame = Frame::Global;
  out.cloud.epoch = cloud.epoch;
  out.cloud.radar_id = cloud.radar_id;
  out.clusters.n_clusters = out.raw_clusters.n_clusters;
  for (std::size_t i = 0; i < global.points.size(); ++i) {
    const int label = out.raw_clusters.labels[i];
    if (label == kOutlier) continue;
    out.kept.push_back(i);
    out.cloud.points.push_back(global.points[i]);
    out.clusters.labels.push_back(label);
  }
  return out;
}

}  // namespace radfed
