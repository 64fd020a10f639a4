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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "radfed/config.hpp"
#include "radfed/harness.hpp"

using namespace radfed;

namespace {

std::filesystem::path config_dir() {
  const char* dir = std::getenv("RADFED_CONFIG_DIR");
  return dir ? std::filesystem::path(dir) : std::filesystem::path("configs");
}

ExperimentConfig short_config(Mode mode, Epoch epochs, std::uint64_t seed = 1) {
  ExperimentConfig c = default_config();
  c.mode = mode;
  c.n_epochs = epochs;
  c.seed = seed;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("radfed_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

EpochRecord record(Epoch t, std::vector<Vec2> truth, std::vector<Vec2> est) {
  EpochRecord r;
  r.epoch = t;
  r.truth = std::move(truth);
  for (std::size_t i = 0; i < r.truth.size(); ++i) {
    r.target_ids.push_back(static_cast<int>(i) + 1);
    r.segments.push_back(i == 0 ? "A-B" : "C-D");
  }
  RadarEpoch re;
  re.resolved = est.size() >= r.truth.size();
  re.estimates = std::move(est);
  r.radars.push_back(re);
  return r;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("runs are deterministic") {
    for (Mode m : {Mode::Isolated, Mode::Cooperation, Mode::Federation}) {
      const auto a = run_experiment(short_config(m, 40, 7));
      const auto b = run_experiment(short_config(m, 40, 7));
      const auto da = scratch("det_a"), db = scratch("det_b");
      export_csv(a, da);
      export_csv(b, db);
      for (const char* f : {"epochs.csv", "targets.csv", "summary.csv"}) {
        CHECK(slurp(da / f) == slurp(db / f));
      }
      std::filesystem::remove_all(da);
      std::filesystem::remove_all(db);
    }
    const auto a = run_experiment(short_config(Mode::Federation, 20, 1));
    const auto b = run_experiment(short_config(Mode::Federation, 20, 2));
    CHECK(a.records.back().radars[0].raw_points != b.records.back().radars[0].raw_points);
  }

  TEST_CASE("isolated and single-radar runs send nothing") {
    const auto iso = run_experiment(short_config(Mode::Isolated, 30));
    CHECK(iso.link.total_bits() == 0);
    for (const auto& r : iso.metrics.radars) CHECK(r.rate == Rational{0, 1});

    auto one = short_config(Mode::Isolated, 30);
    one.radars.resize(1);
    one.topology = Topology::fully_connected(1);
    CHECK(run_experiment(one).link.total_bits() == 0);
  }

  TEST_CASE("payload sizes follow the message layouts") {
    const auto coop = run_experiment(short_config(Mode::Cooperation, 30));
    for (const auto& rec : coop.records) {
      for (const auto& re : rec.radars) CHECK(re.bits_sent == 192 * re.cloud_points);
    }
    const auto fed = run_experiment(short_config(Mode::Federation, 30));
    std::int64_t bits = 0;
    for (const auto& rec : fed.records) {
      for (const auto& re : rec.radars) {
        CHECK(re.bits_sent % 64 == 0);
        CHECK((re.bits_sent / 64 - 2) % 14 == 0);
        CHECK(re.bits_received > 0);
        if (re.radar == 0) bits += re.bits_sent;
      }
    }
    // 30 updates of 10 ms: rate = bits / 0.3 s.
    CHECK(fed.metrics.radars[0].rate == Rational::make(bits * 10, 3));
    CHECK(coop.metrics.radars[0].rate.value() > 20.0 * fed.metrics.radars[0].rate.value());
  }

  TEST_CASE("mae: exact and offset estimates") {
    std::vector<EpochRecord> exact, shifted;
    for (Epoch t = 0; t < 10; ++t) {
      const std::vector<Vec2> truth{{1.0, 2.0}, {3.0, 4.0}};
      exact.push_back(record(t, truth, {truth[1], truth[0]}));
      shifted.push_back(record(t, truth, {truth[0] + Vec2(0.1, 0.0), truth[1] + Vec2(0.1, 0.0)}));
    }
    const auto e = compute_mae(exact, 0);
    CHECK(*e.sigma_x == 0.0);
    CHECK(*e.sigma_y == 0.0);
    CHECK(e.resolved_epochs == 10);
    const auto s = compute_mae(shifted, 0);
    CHECK(*s.sigma_x == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(*s.sigma_y == 0.0);
    REQUIRE(s.segments.size() == 2);
    CHECK(s.segments[0].segment == "A-B");
    CHECK(s.segments[0].samples == 10);

    std::vector<EpochRecord> none{record(0, {{1.0, 1.0}}, {})};
    CHECK(!compute_mae(none, 0).sigma_x.has_value());
    CHECK(assign_optimal({{0.0, 0.0}, {5.0, 5.0}, {1.0, 1.0}}, {{1.1, 1.0}, {0.1, 0.0}}) ==
          std::vector<int>{2, 0});
    CHECK_THROWS_AS(assign_optimal({}, {{0.0, 0.0}}), ContractError);
  }

  TEST_CASE("unresolved probability") {
    std::vector<EpochRecord> recs;
    for (Epoch t = 0; t < 8; ++t) {
      std::vector<Vec2> est{{1.0, 1.0}};
      if (t % 4 != 0) est.push_back({2.0, 2.0});
      recs.push_back(record(t, {{1.0, 1.0}, {2.0, 2.0}}, est));
    }
    CHECK(unresolved_probability(recs, 0) == 0.25);
    CHECK(unresolved_probability({}, 0) == 0.0);

    const auto run = run_experiment(short_config(Mode::Federation, 50));
    for (const auto& r : run.metrics.radars) {
      CHECK(r.p_u == doctest::Approx(1.0 - static_cast<double>(r.mae.resolved_epochs) / 50.0));
    }
  }

  TEST_CASE("summaries of divergences") {
    const auto s = summarize({3.0, NAN, 1.0, 2.0, INFINITY});
    CHECK(s.count == 3);
    CHECK(s.median == 2.0);
    CHECK(s.min == 1.0);
    CHECK(s.max == 3.0);
    CHECK(s.mean == 2.0);
    CHECK(summarize({}).count == 0);
  }

  TEST_CASE("kl study: one radar federates to itself") {
    auto c = short_config(Mode::Federation, 40);
    c.radars.resize(1);
    c.topology = Topology::fully_connected(1);
    c.compute_kl = true;
    const auto run = run_experiment(c);
    for (const auto& rec : run.records) {
      CHECK(std::abs(rec.radars[0].kl_global_fed - rec.radars[0].kl_global_local) < 1e-12);
    }
    // Under a flat prior the global and local posteriors coincide. Afterwards
    // they apply the prior differently (see README, fusion).
    CHECK(run.records[0].radars[0].kl_global_fed < 1e-12);
    CHECK(run.metrics.radars[0].kl_fed.count == 40);
  }

  TEST_CASE("kl study: the shadowed radar is furthest from the global view") {
    auto c = load_config(config_dir() / "shadowed.json");
    c.compute_kl = true;
    c.n_epochs = 100;
    const auto run = run_experiment(c);
    const auto& r = run.metrics.radars;
    CHECK(r[0].kl_local.median > r[1].kl_local.median);
    CHECK(r[0].kl_local.median > r[2].kl_local.median);
    for (const auto& k : r) CHECK(k.kl_fed.median < k.kl_local.median);
  }

  TEST_CASE("csv export") {
    auto c = short_config(Mode::Federation, 0);
    const auto empty_dir = scratch("empty");
    export_csv(run_experiment(c), empty_dir);
    CHECK(slurp(empty_dir / "epochs.csv").find('\n') == slurp(empty_dir / "epochs.csv").size() - 1);
    CHECK(slurp(empty_dir / "targets.csv") == "epoch,target,x,y,segment\n");
    std::filesystem::remove_all(empty_dir);

    c.n_epochs = 25;
    c.grid_dump_every = 10;
    c.replay_log = true;
    const auto run = run_experiment(c);
    const auto dir = scratch("export");
    export_csv(run, dir);
    const auto epochs = slurp(dir / "epochs.csv");
    CHECK(std::count(epochs.begin(), epochs.end(), '\n') == 1 + 25 * 3);
    const auto targets = slurp(dir / "targets.csv");
    CHECK(std::count(targets.begin(), targets.end(), '\n') == 1 + 25 * 2);
    CHECK(std::filesystem::exists(dir / "messages.jsonl"));
    CHECK(read_replay(dir / "messages.jsonl").size() == 25 * 3);
    CHECK(!std::filesystem::is_empty(dir / "grids"));

    const auto back = read_summary_csv(dir / "summary.csv");
    CHECK(summary_rows(back).size() == summary_rows(run.metrics).size());
    for (std::size_t i = 0; i < summary_rows(back).size(); ++i) {
      CHECK(summary_rows(back)[i].value == summary_rows(run.metrics)[i].value);
    }
    CHECK(back.radars[1].rate == run.metrics.radars[1].rate);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("config files") {
    for (const char* name : {"default.json", "shadowed.json", "colocated.json"}) {
      CAPTURE(name);
      const auto c = load_config(config_dir() / name);
      CHECK_NOTHROW(validate(c));
      CHECK(c.radars.size() == 3);
      CHECK(c.targets.size() == 2);
      const auto again = parse_config(to_json_text(c));
      CHECK(to_json_text(again) == to_json_text(c));
    }
    CHECK_THROWS_AS(parse_config("{\"epochz\": 10}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"fusion\": {\"tau\": 1.5}}"), ConfigError);
    CHECK_THROWS_AS(parse_config("{\"mode\": \"gossip\"}"), ConfigError);
    CHECK_THROWS_AS(parse_config("not json"), ConfigError);
    CHECK_THROWS_AS(load_config(config_dir() / "missing.json"), ConfigError);
    CHECK(parse_config("{}").n_epochs == default_config().n_epochs);
  }

  TEST_CASE("clouds stay in the calibrated size band") {
    const auto run = run_experiment(short_config(Mode::Federation, 100));
    for (const auto& r : run.metrics.radars) {
      CHECK(r.mean_cloud_points >= 400.0);
      CHECK(r.mean_cloud_points <= 1000.0);
    }
  }
}
