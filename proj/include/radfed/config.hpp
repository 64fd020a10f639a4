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
 * \file config.hpp
 * \brief Experiment configuration and its JSON form.
 *
 * Every key is optional and falls back to default_config(); unknown keys are
 * rejected so a typo cannot silently change an experiment. See
 * configs/default.json for the full schema.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "radfed/fusion.hpp"
#include "radfed/grid.hpp"
#include "radfed/scene.hpp"
#include "radfed/sensor.hpp"
#include "radfed/sidelink.hpp"

namespace radfed {

enum class Mode { Isolated, Cooperation, Federation };

const char* to_string(Mode mode);
/// "isolated", "cooperation"/"coop", "federation"/"fed". Throws ConfigError.
Mode parse_mode(std::string_view text);

struct RadarConfig {
  RadarPose pose;
  RadarModel model;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Mode mode = Mode::Federation;
  std::uint64_t seed = 1;
  Epoch n_epochs = 900;
  double dt = 0.010;  // update period, s

  std::vector<Landmark> landmarks;
  std::vector<TargetSpec> targets;
  std::vector<RadarConfig> radars;
  Topology topology;

  GridSpec grid = GridSpec::from_extent(0.0, 0.0, 8.0, 8.0, 0.05);
  double tau = 0.45;
  double min_separation = 0.5;
  double dbscan_eps = 0.15;
  int dbscan_min_pts = 5;
  FusionParams fusion;
  double motion_speed = 1.0;  // v in the prior spread v*dt + sigma_floor, m/s
  double sigma_floor = 0.042;

  double clock_jitter = 0.0;        // s
  std::vector<double> clock_offsets;  // s, per radar

  bool compute_kl = false;   // reference global posterior in federation mode
  int reference_radar = 0;   // radar whose metrics are the headline
  Epoch grid_dump_every = 0; // 0: no grid dumps
  bool replay_log = false;   // write every broadcast as a JSON line

  ClockModel clock() const;
};

/// The built-in three-radar, two-target room; every config key overrides it.
ExperimentConfig default_config();

/// Throws ConfigError describing the first problem found.
void validate(const ExperimentConfig& config);

ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string to_json_text(const ExperimentConfig& config);

}  // namespace radfed
