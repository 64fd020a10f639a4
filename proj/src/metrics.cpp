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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "radfed/csv.hpp"
#include "radfed/harness.hpp"

namespace radfed {
namespace {

void assign_dfs(const std::vector<Vec2>& est, const std::vector<Vec2>& truth, std::size_t i,
                std::vector<char>& used, std::vector<int>& current, double cost,
                std::vector<int>& best, double& best_cost) {
  if (cost >= best_cost) return;
  if (i == truth.size()) {
    best = current;
    best_cost = cost;
    return;
  }
  for (std::size_t j = 0; j < est.size(); ++j) {
    if (used[j]) continue;
    used[j] = 1;
    current[i] = static_cast<int>(j);
    assign_dfs(est, truth, i + 1, used, current, cost + (est[j] - truth[i]).norm(), best, best_cost);
    used[j] = 0;
  }
}

// Linear interpolation between order statistics.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("error while writing " + path.string());
}

std::string radar_scope(int k) { return "radar" + std::to_string(k); }

void kl_rows(std::vector<SummaryRow>& rows, const std::string& prefix, const std::string& scope,
             const KlSummary& s) {
  rows.push_back({prefix + "_count", scope, std::to_string(s.count)});
  rows.push_back({prefix + "_mean", scope, format_double(s.mean)});
  rows.push_back({prefix + "_min", scope, format_double(s.min)});
  rows.push_back({prefix + "_max", scope, format_double(s.max)});
  rows.push_back({prefix + "_median", scope, format_double(s.median)});
  for (std::size_t d = 0; d < s.deciles.size(); ++d) {
    rows.push_back({prefix + "_d" + std::to_string(d + 1), scope, format_double(s.deciles[d])});
  }
}

bool read_kl(const std::string& metric, const std::string& prefix, const std::string& value,
             KlSummary& s) {
  if (metric.rfind(prefix + "_", 0) != 0) return false;
  const std::string field = metric.substr(prefix.size() + 1);
  if (field == "count") {
    s.count = std::stoll(value);
  } else if (field == "mean") {
    s.mean = parse_double(value);
  } else if (field == "min") {
    s.min = parse_double(value);
  } else if (field == "max") {
    s.max = parse_double(value);
  } else if (field == "median") {
    s.median = parse_double(value);
  } else if (field.size() >= 2 && field[0] == 'd') {
    const int d = std::stoi(field.substr(1));
    if (d < 1 || d > 9) return false;
    s.deciles[static_cast<std::size_t>(d - 1)] = parse_double(value);
  } else {
    return false;
  }
  return true;
}

}  // namespace

std::vector<int> assign_optimal(const std::vector<Vec2>& estimates, const std::vector<Vec2>& truth) {
  if (estimates.size() < truth.size()) {
    throw ContractError("assign_optimal: fewer estimates than truths");
  }
  std::vector<int> best(truth.size(), -1);
  std::vector<int> current(truth.size(), -1);
  std::vector<char> used(estimates.size(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  assign_dfs(estimates, truth, 0, used, current, 0.0, best, best_cost);
  return best;
}

MaeResult compute_mae(const std::vector<EpochRecord>& records, int radar) {
  MaeResult out;
  double sx = 0.0, sy = 0.0;
  std::int64_t n = 0;
  std::map<std::string, SegmentError> segments;
  for (const auto& rec : records) {
    const auto& re = rec.radars.at(static_cast<std::size_t>(radar));
    if (!re.resolved || rec.truth.empty()) continue;
    ++out.resolved_epochs;
    const auto match = assign_optimal(re.estimates, rec.truth);
    for (std::size_t i = 0; i < rec.truth.size(); ++i) {
      const Vec2 err = re.estimates[static_cast<std::size_t>(match[i])] - rec.truth[i];
      const double ex = std::abs(err.x());
      const double ey = std::abs(err.y());
      sx += ex;
      sy += ey;
      ++n;
      auto& seg = segments[rec.segments.at(i)];
      seg.segment = rec.segments.at(i);
      seg.sigma_x += ex;
      seg.sigma_y += ey;
      ++seg.samples;
    }
  }
  if (n > 0) {
    out.sigma_x = sx / static_cast<double>(n);
    out.sigma_y = sy / static_cast<double>(n);
  }
  for (auto& [label, seg] : segments) {
    seg.sigma_x /= static_cast<double>(seg.samples);
    seg.sigma_y /= static_cast<double>(seg.samples);
    out.segments.push_back(seg);
  }
  return out;
}

double unresolved_probability(const std::vector<EpochRecord>& records, int radar) {
  if (records.empty()) return 0.0;
  std::int64_t resolved = 0;
  for (const auto& rec : records) {
    if (rec.radars.at(static_cast<std::size_t>(radar)).resolved) ++resolved;
  }
  return 1.0 - static_cast<double>(resolved) / static_cast<double>(records.size());
}

KlSummary summarize(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
               values.end());
  KlSummary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.count = static_cast<std::int64_t>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.min = values.front();
  s.max = values.back();
  s.median = quantile(values, 0.5);
  for (std::size_t d = 0; d < s.deciles.size(); ++d) {
    s.deciles[d] = quantile(values, static_cast<double>(d + 1) / 10.0);
  }
  return s;
}

KlStudy kl_study(const std::vector<EpochRecord>& records, int n_radars) {
  KlStudy out;
  std::vector<double> fed_all, local_all;
  for (int k = 0; k < n_radars; ++k) {
    std::vector<double> fed, local;
    for (const auto& rec : records) {
      const auto& re = rec.radars.at(static_cast<std::size_t>(k));
      fed.push_back(re.kl_global_fed);
      local.push_back(re.kl_global_local);
    }
    fed_all.insert(fed_all.end(), fed.begin(), fed.end());
    local_all.insert(local_all.end(), local.begin(), local.end());
    out.fed.push_back(summarize(std::move(fed)));
    out.local.push_back(summarize(std::move(local)));
  }
  out.fed_pooled = summarize(std::move(fed_all));
  out.local_pooled = summarize(std::move(local_all));
  return out;
}

MetricsRecord compute_metrics(const std::vector<EpochRecord>& records, const LinkStats& link,
                              const ExperimentConfig& config) {
  MetricsRecord m;
  m.mode = config.mode;
  m.seed = config.seed;
  m.epochs = static_cast<Epoch>(records.size());
  m.reference_radar = config.reference_radar;
  const int n = static_cast<int>(config.radars.size());
  const KlStudy kl = kl_study(records, n);
  for (int k = 0; k < n; ++k) {
    RadarMetrics r;
    r.radar = k;
    r.mae = compute_mae(records, k);
    r.p_u = unresolved_probability(records, k);
    r.rate = link.rate(k);
    double pts = 0.0;
    for (const auto& rec : records) pts += static_cast<double>(rec.radars.at(static_cast<std::size_t>(k)).cloud_points);
    r.mean_cloud_points = records.empty() ? 0.0 : pts / static_cast<double>(records.size());
    r.kl_fed = kl.fed[static_cast<std::size_t>(k)];
    r.kl_local = kl.local[static_cast<std::size_t>(k)];
    m.radars.push_back(r);
  }
  m.kl_fed_pooled = kl.fed_pooled;
  m.kl_local_pooled = kl.local_pooled;
  return m;
}

std::vector<SummaryRow> summary_rows(const MetricsRecord& m) {
  std::vector<SummaryRow> rows;
  rows.push_back({"mode", "run", to_string(m.mode)});
  rows.push_back({"seed", "run", std::to_string(m.seed)});
  rows.push_back({"epochs", "run", std::to_string(m.epochs)});
  rows.push_back({"reference_radar", "run", std::to_string(m.reference_radar)});
  for (const auto& r : m.radars) {
    const std::string scope = radar_scope(r.radar);
    if (r.mae.sigma_x) rows.push_back({"sigma_x", scope, format_double(*r.mae.sigma_x)});
    if (r.mae.sigma_y) rows.push_back({"sigma_y", scope, format_double(*r.mae.sigma_y)});
    rows.push_back({"resolved_epochs", scope, std::to_string(r.mae.resolved_epochs)});
    rows.push_back({"p_u", scope, format_double(r.p_u)});
    rows.push_back({"rate_bps", scope, format_double(r.rate.value())});
    rows.push_back({"rate_num", scope, std::to_string(r.rate.num)});
    rows.push_back({"rate_den", scope, std::to_string(r.rate.den)});
    rows.push_back({"mean_cloud_points", scope, format_double(r.mean_cloud_points)});
    kl_rows(rows, "kl_fed", scope, r.kl_fed);
    kl_rows(rows, "kl_local", scope, r.kl_local);
    for (const auto& s : r.mae.segments) {
      const std::string seg_scope = scope + "/" + s.segment;
      rows.push_back({"sigma_x", seg_scope, format_double(s.sigma_x)});
      rows.push_back({"sigma_y", seg_scope, format_double(s.sigma_y)});
      rows.push_back({"samples", seg_scope, std::to_string(s.samples)});
    }
  }
  kl_rows(rows, "kl_fed", "pooled", m.kl_fed_pooled);
  kl_rows(rows, "kl_local", "pooled", m.kl_local_pooled);
  return rows;
}

MetricsRecord metrics_from_rows(const std::vector<SummaryRow>& rows) {
  MetricsRecord m;
  std::map<int, RadarMetrics> radars;
  std::map<std::pair<int, std::string>, SegmentError> segments;
  auto bad = [](const SummaryRow& r) {
    return std::runtime_error("unexpected summary row: " + r.metric + "," + r.scope);
  };
  for (const auto& row : rows) {
    if (row.scope == "run") {
      if (row.metric == "mode") {
        m.mode = parse_mode(row.value);
      } else if (row.metric == "seed") {
        m.seed = std::stoull(row.value);
      } else if (row.metric == "epochs") {
        m.epochs = std::stoll(row.value);
      } else if (row.metric == "reference_radar") {
        m.reference_radar = std::stoi(row.value);
      } else {
        throw bad(row);
      }
      continue;
    }
    if (row.scope == "pooled") {
      if (!read_kl(row.metric, "kl_fed", row.value, m.kl_fed_pooled) &&
          !read_kl(row.metric, "kl_local", row.value, m.kl_local_pooled)) {
        throw bad(row);
      }
      continue;
    }
    if (row.scope.rfind("radar", 0) != 0) throw bad(row);
    const auto slash = row.scope.find('/');
    const int k = std::stoi(row.scope.substr(5, slash == std::string::npos ? std::string::npos : slash - 5));
    auto& r = radars[k];
    r.radar = k;
    if (slash != std::string::npos) {
      auto& s = segments[{k, row.scope.substr(slash + 1)}];
      s.segment = row.scope.substr(slash + 1);
      if (row.metric == "sigma_x") {
        s.sigma_x = parse_double(row.value);
      } else if (row.metric == "sigma_y") {
        s.sigma_y = parse_double(row.value);
      } else if (row.metric == "samples") {
        s.samples = std::stoll(row.value);
      } else {
        throw bad(row);
      }
      continue;
    }
    if (row.metric == "sigma_x") {
      r.mae.sigma_x = parse_double(row.value);
    } else if (row.metric == "sigma_y") {
      r.mae.sigma_y = parse_double(row.value);
    } else if (row.metric == "resolved_epochs") {
      r.mae.resolved_epochs = std::stoll(row.value);
    } else if (row.metric == "p_u") {
      r.p_u = parse_double(row.value);
    } else if (row.metric == "rate_bps") {
      // derived from rate_num / rate_den
    } else if (row.metric == "rate_num") {
      r.rate.num = std::stoll(row.value);
    } else if (row.metric == "rate_den") {
      r.rate.den = std::stoll(row.value);
    } else if (row.metric == "mean_cloud_points") {
      r.mean_cloud_points = parse_double(row.value);
    } else if (!read_kl(row.metric, "kl_fed", row.value, r.kl_fed) &&
               !read_kl(row.metric, "kl_local", row.value, r.kl_local)) {
      throw bad(row);
    }
  }
  for (auto& [key, seg] : segments) radars[key.first].mae.segments.push_back(seg);
  for (auto& [k, r] : radars) m.radars.push_back(r);
  return m;
}

void write_summary_csv(const MetricsRecord& metrics, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "metric,scope,value\n";
  for (const auto& r : summary_rows(metrics)) out << r.metric << ',' << r.scope << ',' << r.value << '\n';
  close_out(out, path);
}

MetricsRecord read_summary_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"metric", "scope", "value"}) {
    throw std::runtime_error(path.string() + ": not a summary CSV");
  }
  std::vector<SummaryRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 3) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    rows.push_back({f[0], f[1], f[2]});
  }
  try {
    return metrics_from_rows(rows);
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void export_csv(const RunResult& run, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());

  const auto epochs_path = dir / "epochs.csv";
  auto out = open_out(epochs_path);
  out << "epoch,radar,raw_points,cloud_points,clusters,components,n_estimates,resolved,"
         "bits_sent,bits_received,kl_global_fed,kl_global_local,estimates\n";
  for (const auto& rec : run.records) {
    for (const auto& re : rec.radars) {
      out << rec.epoch << ',' << re.radar << ',' << re.raw_points << ',' << re.cloud_points << ','
          << re.clusters << ',' << re.components << ',' << re.estimates.size() << ','
          << (re.resolved ? 1 : 0) << ',' << re.bits_sent << ',' << re.bits_received << ','
          << format_double(re.kl_global_fed) << ',' << format_double(re.kl_global_local) << ',';
      for (std::size_t i = 0; i < re.estimates.size(); ++i) {
        if (i) out << ';';
        out << format_double(re.estimates[i].x()) << ' ' << format_double(re.estimates[i].y());
      }
      out << '\n';
    }
  }
  close_out(out, epochs_path);

  const auto targets_path = dir / "targets.csv";
  auto tout = open_out(targets_path);
  tout << "epoch,target,x,y,segment\n";
  for (const auto& rec : run.records) {
    for (std::size_t i = 0; i < rec.truth.size(); ++i) {
      tout << rec.epoch << ',' << rec.target_ids[i] << ',' << format_double(rec.truth[i].x()) << ','
           << format_double(rec.truth[i].y()) << ',' << rec.segments[i] << '\n';
    }
  }
  close_out(tout, targets_path);

  write_summary_csv(run.metrics, dir / "summary.csv");

  if (!run.grids.empty()) {
    const auto grid_dir = dir / "grids";
    std::filesystem::create_directories(grid_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + grid_dir.string() + ": " + ec.message());
    for (const auto& g : run.grids) {
      write_grid_csv(g.grid, grid_dir / ("epoch" + std::to_string(g.epoch) + "_radar" +
                                         std::to_string(g.radar) + "_" + g.kind + ".csv"));
    }
  }
  if (!run.replay.empty()) write_replay(dir / "messages.jsonl", run.replay);
}

}  // namespace radfed
