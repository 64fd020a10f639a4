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
 * \file sensor.hpp
 * \brief Per-radar point-cloud formation and preprocessing.
 *
 * A radar sees each true body point through its field of view and a
 * detection draw that falls with range, with shadowing by nearer targets and
 * on the far side of the point's own body. Detected points get noise along
 * the line of sight, across it (growing with range) and in height, then
 * Poisson clutter is added. Preprocessing moves the cloud to the global frame
 * and strips the points dbscan labels as outliers.
 */
#pragma once

#include <numbers>
#include <vector>

#include "radfed/dbscan.hpp"
#include "radfed/scene.hpp"
#include "radfed/types.hpp"

namespace radfed {

struct RadarPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;  // boresight azimuth in the global frame, (-pi, pi]
};

/// Wraps an angle into (-pi, pi].
double normalize_angle(double a);

struct RadarModel {
  double fov_azimuth = std::numbers::pi / 3.0;  // half-angle
  double max_range = 10.0;
  double range_resolution = 0.042;
  double azimuth_resolution = 25.0 * std::numbers::pi / 180.0;
  double range_noise = 0.03;                            // m, along the line of sight
  double azimuth_noise = 3.0 * std::numbers::pi / 180.0;  // rad; cross-range std is r times this
  double height_noise = 0.08;                           // m
  double azimuth_error = 4.0 * std::numbers::pi / 180.0;  // rad; per-frame angle error shared by one body's points
  double self_occlusion = 0.3;  // detection factor for the far side of a body
  double outlier_rate = 20.0;                  // Poisson mean per frame
  double detection_range_ref = 6.0;            // p_d = min(1, (ref / r)^2)
  double occlusion_width = 0.3;
  double occlusion_attenuation = 0.1;
  double outlier_z_min = -1.5;  // local z band for clutter
  double outlier_z_max = 1.0;
};

enum class Frame { RadarLocal, Global };

struct PointCloud {
  Frame frame = Frame::RadarLocal;
  std::vector<Vec3> points;
  Epoch epoch = 0;
  int radar_id = 0;
};

/// Raw cloud plus the ground-truth source of every point (target id or kOutlier).
struct Observation {
  PointCloud cloud;
  std::vector<int> sources;
};

Observation observe(const Scene& scene, const RadarPose& pose, const RadarModel& model,
                    int radar_id, Rng& rng);

/// Throws ContractError unless the cloud is radar-local.
PointCloud to_global_frame(const PointCloud& cloud, const RadarPose& pose);

/// Throws ContractError unless the cloud is global.
PointCloud to_local_frame(const PointCloud& cloud, const RadarPose& pose);

struct Preprocessed {
  PointCloud cloud;          // global frame, outliers removed
  ClusterResult clusters;    // over the surviving points, no kOutlier labels
  ClusterResult raw_clusters;  // over the input points
  std::vector<std::size_t> kept;  // input indices of the surviving points
};

Preprocessed preprocess(const PointCloud& cloud, const RadarPose& pose, double eps, int min_pts);

}  // namespace radfed
