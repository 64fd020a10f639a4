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

// radfed: run, sweep, kl and report subcommands over scenario configs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "radfed/config.hpp"
#include "radfed/csv.hpp"
#include "radfed/harness.hpp"
#include "radfed/kernels.hpp"

namespace fs = std::filesystem;
using namespace radfed;

namespace {

struct CommonArgs {
  std::string config;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::optional<Epoch> epochs;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& a, bool with_mode) {
  cmd->add_option("--config", a.config, "Scenario JSON file (built-in default room if omitted)");
  if (with_mode) cmd->add_option("--mode", a.mode, "isolated, cooperation or federation");
  cmd->add_option("--seed", a.seed, "Random seed (first seed for sweeps)");
  cmd->add_option("--epochs", a.epochs, "Number of 10 ms updates");
  cmd->add_option("--out", a.out, "Output directory");
}

ExperimentConfig resolve(const CommonArgs& a) {
  ExperimentConfig cfg = a.config.empty() ? default_config() : load_config(a.config);
  if (!a.mode.empty()) cfg.mode = parse_mode(a.mode);
  if (a.seed) cfg.seed = *a.seed;
  if (a.epochs) cfg.n_epochs = *a.epochs;
  validate(cfg);
  return cfg;
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : "n/a"; }

void print_metrics(const MetricsRecord& m) {
  std::printf("mode=%s seed=%llu epochs=%lld\n", to_string(m.mode),
              static_cast<unsigned long long>(m.seed), static_cast<long long>(m.epochs));
  for (const auto& r : m.radars) {
    std::printf("  radar%d%s: sigma_x=%s sigma_y=%s P_u=%.4f rate=%s bit/s points=%.1f\n", r.radar,
                r.radar == m.reference_radar ? "*" : "", opt_text(r.mae.sigma_x).c_str(),
                opt_text(r.mae.sigma_y).c_str(), r.p_u, format_double(r.rate.value()).c_str(),
                r.mean_cloud_points);
  }
}

int cmd_run(const CommonArgs& a, bool kl, Epoch grids, bool replay) {
  ExperimentConfig cfg = resolve(a);
  if (kl) cfg.compute_kl = true;
  if (grids > 0) cfg.grid_dump_every = grids;
  if (replay) cfg.replay_log = true;
  const RunResult run = run_experiment(cfg);
  print_metrics(run.metrics);
  if (!a.out.empty()) {
    export_csv(run, a.out);
    std::printf("wrote %s\n", a.out.c_str());
  }
  return 0;
}

int cmd_sweep(const CommonArgs& a, int n_seeds, int jobs, bool all_modes) {
  const ExperimentConfig base = resolve(a);
  std::vector<Mode> modes;
  if (all_modes || a.mode.empty()) {
    modes = {Mode::Isolated, Mode::Cooperation, Mode::Federation};
  } else {
    modes = {base.mode};
  }
  struct Job {
    Mode mode;
    std::uint64_t seed;
  };
  std::vector<Job> work;
  for (Mode m : modes) {
    for (int i = 0; i < n_seeds; ++i) work.push_back({m, base.seed + static_cast<std::uint64_t>(i)});
  }
  std::vector<MetricsRecord> results(work.size());
  std::mutex error_mutex;
  std::string first_error;
  std::size_t next = 0;
  std::mutex next_mutex;
  auto worker = [&] {
    while (true) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next >= work.size()) return;
        i = next++;
      }
      try {
        ExperimentConfig cfg = base;
        cfg.mode = work[i].mode;
        cfg.seed = work[i].seed;
        results[i] = run_experiment(cfg).metrics;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 0; j < std::max(1, jobs); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw std::runtime_error(first_error);

  const int ref = base.reference_radar;
  std::printf("%-12s %8s %10s %10s %8s %14s\n", "mode", "seeds", "sigma_x", "sigma_y", "P_u", "rate_bps");
  std::map<std::string, std::vector<double>> agg;
  for (Mode m : modes) {
    double sx = 0, sy = 0, pu = 0, rate = 0;
    int n_sigma = 0, n = 0;
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (work[i].mode != m) continue;
      const auto& r = results[i].radars.at(static_cast<std::size_t>(ref));
      if (r.mae.sigma_x) {
        sx += *r.mae.sigma_x;
        sy += *r.mae.sigma_y;
        ++n_sigma;
      }
      pu += r.p_u;
      rate += r.rate.value();
      ++n;
    }
    std::printf("%-12s %8d %10.4f %10.4f %8.4f %14.1f\n", to_string(m), n,
                n_sigma ? sx / n_sigma : NAN, n_sigma ? sy / n_sigma : NAN, pu / n, rate / n);
  }

  if (!a.out.empty()) {
    fs::create_directories(a.out);
    const fs::path path = fs::path(a.out) / "sweep.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "mode,seed,metric,scope,value\n";
    for (std::size_t i = 0; i < work.size(); ++i) {
      for (const auto& row : summary_rows(results[i])) {
        if (row.scope == "run") continue;
        out << to_string(work[i].mode) << ',' << work[i].seed << ',' << row.metric << ','
            << row.scope << ',' << row.value << '\n';
      }
    }
    if (!out) throw std::runtime_error("error while writing " + path.string());
    for (std::size_t i = 0; i < work.size(); ++i) {
      const fs::path dir = fs::path(a.out) / to_string(work[i].mode);
      fs::create_directories(dir);
      write_summary_csv(results[i], dir / ("summary_seed" + std::to_string(work[i].seed) + ".csv"));
    }
    std::printf("wrote %s\n", a.out.c_str());
  }
  return 0;
}

int cmd_kl(const CommonArgs& a) {
  ExperimentConfig cfg = resolve(a);
  cfg.mode = Mode::Federation;
  cfg.compute_kl = true;
  const RunResult run = run_experiment(cfg);
  const auto& m = run.metrics;
  std::printf("%-8s %8s %14s %14s %14s %14s\n", "radar", "samples", "median(C||F)", "median(C||L)",
              "mean(C||F)", "mean(C||L)");
  for (const auto& r : m.radars) {
    std::printf("%-8d %8lld %14.6g %14.6g %14.6g %14.6g\n", r.radar,
                static_cast<long long>(r.kl_fed.count), r.kl_fed.median, r.kl_local.median,
                r.kl_fed.mean, r.kl_local.mean);
  }
  std::printf("%-8s %8lld %14.6g %14.6g %14.6g %14.6g\n", "pooled",
              static_cast<long long>(m.kl_fed_pooled.count), m.kl_fed_pooled.median,
              m.kl_local_pooled.median, m.kl_fed_pooled.mean, m.kl_local_pooled.mean);
  if (!a.out.empty()) {
    export_csv(run, a.out);
    const fs::path path = fs::path(a.out) / "kl.csv";
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "scope,divergence,count,mean,min,max,median,d1,d2,d3,d4,d5,d6,d7,d8,d9\n";
    auto line = [&](const std::string& scope, const char* which, const KlSummary& s) {
      out << scope << ',' << which << ',' << s.count << ',' << format_double(s.mean) << ','
          << format_double(s.min) << ',' << format_double(s.max) << ',' << format_double(s.median);
      for (double d : s.deciles) out << ',' << format_double(d);
      out << '\n';
    };
    for (const auto& r : m.radars) {
      line("radar" + std::to_string(r.radar), "global_fed", r.kl_fed);
      line("radar" + std::to_string(r.radar), "global_local", r.kl_local);
    }
    line("pooled", "global_fed", m.kl_fed_pooled);
    line("pooled", "global_local", m.kl_local_pooled);
    if (!out) throw std::runtime_error("error while writing " + path.string());
    std::printf("wrote %s\n", a.out.c_str());
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out_path) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      for (const auto& e : fs::recursive_directory_iterator(in)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("summary", 0) == 0 && e.path().extension() == ".csv") {
          files.push_back(e.path());
        }
      }
    } else {
      files.emplace_back(in);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("report: no summary CSV files found");

  // (mode, metric, scope) -> values
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> values;
  for (const auto& f : files) {
    const MetricsRecord m = read_summary_csv(f);
    for (const auto& row : summary_rows(m)) {
      if (row.scope == "run") continue;
      values[{to_string(m.mode), row.metric, row.scope}].push_back(parse_double(row.value));
    }
  }
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw std::runtime_error("cannot write " + out_path);
    out = &file;
  }
  *out << "mode,metric,scope,runs,mean,std\n";
  for (const auto& [key, v] : values) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    *out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ',' << v.size()
         << ',' << format_double(mean) << ',' << format_double(sd) << '\n';
  }
  if (file.is_open() && !file) throw std::runtime_error("error while writing " + out_path);
  std::fprintf(stderr, "aggregated %zu summary files\n", files.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-radar tracking simulator: isolated, cooperative and federated fusion"};
  app.require_subcommand(1);
  bool show_kernels = false;
  app.add_flag("--kernels", show_kernels, "Print the active kernel variant to stderr");

  CommonArgs run_args;
  bool run_kl = false, run_replay = false;
  Epoch run_grids = 0;
  auto* run = app.add_subcommand("run", "Run one experiment");
  add_common(run, run_args, true);
  run->add_flag("--kl", run_kl, "Also compute the reference global posterior (federation)");
  run->add_option("--grids", run_grids, "Dump posterior grids every N epochs");
  run->add_flag("--replay", run_replay, "Write every broadcast to messages.jsonl");

  CommonArgs sweep_args;
  int n_seeds = 100, jobs = 1;
  bool all_modes = false;
  auto* sweep = app.add_subcommand("sweep", "Monte Carlo over seeds (all modes unless --mode)");
  add_common(sweep, sweep_args, true);
  sweep->add_option("--seeds", n_seeds, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  sweep->add_flag("--all-modes", all_modes, "Sweep all three modes");

  CommonArgs kl_args;
  auto* kl = app.add_subcommand("kl", "Divergence study: global vs federated and local posteriors");
  add_common(kl, kl_args, false);

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* report = app.add_subcommand("report", "Aggregate summary CSVs (files or directories)");
  report->add_option("inputs", report_inputs, "summary CSV files or directories")->required();
  report->add_option("--out", report_out, "Write the aggregate here instead of stdout");

  CLI11_PARSE(app, argc, argv);
  if (show_kernels) std::fprintf(stderr, "kernels: %s\n", kernels::active().name);

  try {
    if (*run) return cmd_run(run_args, run_kl, run_grids, run_replay);
    if (*sweep) return cmd_sweep(sweep_args, n_seeds, jobs, all_modes);
    if (*kl) return cmd_kl(kl_args);
    if (*report) return cmd_report(report_inputs, report_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
