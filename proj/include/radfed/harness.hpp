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
 * \file harness.hpp
 * \brief Experiment loop, metrics and CSV output.
 *
 * One epoch runs: advance the scene, observe and preprocess at every radar,
 * build and deliver messages for the mode, fuse, extract targets, and derive
 * the next prior from the posterior each radar estimated from.
 */
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "radfed/config.hpp"
#include "radfed/grid.hpp"
#include "radfed/sidelink.hpp"

namespace radfed {

struct RadarEpoch {
  int radar = 0;
  std::int64_t raw_points = 0;    // before outlier removal
  std::int64_t cloud_points = 0;  // after
  int clusters = 0;
  int components = 0;  // of the mixture the estimates came from
  std::vector<Vec2> estimates;
  bool resolved = false;  // at least as many estimates as targets
  double kl_global_fed = std::numeric_limits<double>::quiet_NaN();
  double kl_global_local = std::numeric_limits<double>::quiet_NaN();
  std::int64_t bits_sent = 0;
  std::int64_t bits_received = 0;
};

struct EpochRecord {
  Epoch epoch = 0;
  std::vector<int> target_ids;
  std::vector<Vec2> truth;
  std::vector<std::string> segments;  // path segment nearest each target
  std::vector<RadarEpoch> radars;
};

struct SegmentError {
  std::string segment;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  std::int64_t samples = 0;
};

struct MaeResult {
  std::optional<double> sigma_x;  // absent without resolved epochs
  std::optional<double> sigma_y;
  std::int64_t resolved_epochs = 0;
  std::vector<SegmentError> segments;  // sorted by label
};

struct KlSummary {
  std::int64_t count = 0;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double median = 0.0;
  std::array<double, 9> deciles{};  // 10%, 20%, ..., 90%
};

struct RadarMetrics {
  int radar = 0;
  MaeResult mae;
  double p_u = 0.0;
  Rational rate;  // sent payload bits per second
  double mean_cloud_points = 0.0;
  KlSummary kl_fed;
  KlSummary kl_local;
};

struct MetricsRecord {
  Mode mode = Mode::Federation;
  std::uint64_t seed = 0;
  Epoch epochs = 0;
  int reference_radar = 0;
  std::vector<RadarMetrics> radars;
  KlSummary kl_fed_pooled;
  KlSummary kl_local_pooled;

  const RadarMetrics& reference() const { return radars.at(static_cast<std::size_t>(reference_radar)); }
};

struct GridDump {
  Epoch epoch = 0;
  int radar = 0;
  std::string kind;  // "posterior" or "local"
  DensityGrid grid;
};

struct RunResult {
  std::vector<EpochRecord> records;
  MetricsRecord metrics;
  LinkStats link;
  std::vector<Message> replay;  // when config.replay_log
  std::vector<GridDump> grids;  // when config.grid_dump_every > 0
};

/// Deterministic in (config, config.seed). Throws ConfigError before epoch 0.
RunResult run_experiment(const ExperimentConfig& config);

/// For each truth, the index of its estimate under the assignment with the
/// least total distance. Needs at least as many estimates as truths.
std::vector<int> assign_optimal(const std::vector<Vec2>& estimates, const std::vector<Vec2>& truth);

/// Mean absolute x and y error of one radar over its resolved epochs.
MaeResult compute_mae(const std::vector<EpochRecord>& records, int radar);

/// Fraction of epochs in which the radar was unresolved; 0 without epochs.
double unresolved_probability(const std::vector<EpochRecord>& records, int radar);

/// Summary of the finite values; count 0 and zeros when there are none.
KlSummary summarize(std::vector<double> values);

struct KlStudy {
  std::vector<KlSummary> fed;    // per radar: D(global || federated)
  std::vector<KlSummary> local;  // per radar: D(global || local)
  KlSummary fed_pooled;
  KlSummary local_pooled;
};

KlStudy kl_study(const std::vector<EpochRecord>& records, int n_radars);

MetricsRecord compute_metrics(const std::vector<EpochRecord>& records, const LinkStats& link,
                              const ExperimentConfig& config);

/**
 * Writes epochs.csv, targets.csv and summary.csv into `dir` (created if
 * needed), plus grids/ and messages.jsonl when the run carries them.
 * Throws std::runtime_error naming the path on I/O failure.
 */
void export_csv(const RunResult& run, const std::filesystem::path& dir);

struct SummaryRow {
  std::string metric;
  std::string scope;
  std::string value;
};

std::vector<SummaryRow> summary_rows(const MetricsRecord& metrics);
MetricsRecord metrics_from_rows(const std::vector<SummaryRow>& rows);
void write_summary_csv(const MetricsRecord& metrics, const std::filesystem::path& path);
MetricsRecord read_summary_csv(const std::filesystem::path& path);

}  // namespace radfed
