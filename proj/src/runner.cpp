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
#include <map>
#include <utility>

#include "radfed/dbscan.hpp"
#include "radfed/fusion.hpp"
#include "radfed/harness.hpp"
#include "radfed/scene.hpp"
#include "radfed/sensor.hpp"

namespace radfed {
namespace {

// Ensemble identity: which sender's cloud from which epoch, in sender order.
using EnsembleKey = std::vector<std::pair<int, Epoch>>;

// Scene cells a prior was built from; equal cells give equal priors.
struct PriorChain {
  std::vector<ReconstructedScene> scene;  // per radar, previous epoch
  std::vector<DensityGrid> prior;         // per radar, for this epoch

  PriorChain(int n, const GridSpec& spec)
      : scene(static_cast<std::size_t>(n)), prior(static_cast<std::size_t>(n), DensityGrid::uniform(spec)) {
    for (auto& s : scene) s.spec = spec;
  }

  // Next epoch's priors; radars whose scenes match share one computation.
  void advance(std::vector<ReconstructedScene> next, const ExperimentConfig& cfg) {
    for (std::size_t k = 0; k < next.size(); ++k) {
      bool reused = false;
      for (std::size_t j = 0; j < k; ++j) {
        if (next[j].cells == next[k].cells) {
          prior[k] = prior[j];
          reused = true;
          break;
        }
      }
      if (!reused) prior[k] = motion_prior(next[k], cfg.motion_speed, cfg.dt, cfg.sigma_floor, cfg.grid);
    }
    scene = std::move(next);
  }
};

// Posterior cache within one epoch, keyed by ensemble and prior scene.
struct CoopMemo {
  struct Entry {
    EnsembleKey key;
    std::vector<std::size_t> prior_cells;
    Posterior posterior;
  };
  std::vector<Entry> entries;

  const Posterior* find(const EnsembleKey& key, const std::vector<std::size_t>& cells) const {
    for (const auto& e : entries) {
      if (e.key == key && e.prior_cells == cells) return &e.posterior;
    }
    return nullptr;
  }
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  const int n_radars = static_cast<int>(cfg.radars.size());
  const auto nr = static_cast<std::size_t>(n_radars);

  std::vector<Trajectory> trajectories;
  for (const auto& t : cfg.targets) trajectories.emplace_back(t, cfg.landmarks);

  Rng scene_rng = make_stream(cfg.seed, 0);
  std::vector<Rng> radar_rng;
  std::vector<Rng> jitter_rng;
  for (int k = 0; k < n_radars; ++k) {
    radar_rng.push_back(make_stream(cfg.seed, 1 + static_cast<std::uint64_t>(k)));
    jitter_rng.push_back(make_stream(cfg.seed, 1001 + static_cast<std::uint64_t>(k)));
  }

  const ClockModel clock = cfg.clock();
  Epoch max_lag = 0;
  for (int k = 0; k < n_radars; ++k) max_lag = std::max(max_lag, clock.staleness(k));
  const double jitter_disp = cfg.motion_speed * cfg.clock_jitter;
  const bool jitter = jitter_disp > 0.0;

  RunResult run;
  run.link = LinkStats(n_radars, std::llround(cfg.dt * 1e6));
  MessageHistory history(n_radars, max_lag + 1);
  // Preprocessed clouds by (sender, epoch): receiver-side clustering cache
  // in cooperation mode, the reference ensemble in federation mode.
  std::vector<std::map<Epoch, ClusteredCloud>> clouds(nr);

  PriorChain chain(n_radars, cfg.grid);
  PriorChain reference(n_radars, cfg.grid);
  const bool want_kl = cfg.mode == Mode::Federation && cfg.compute_kl;
  const std::size_t n_targets = cfg.targets.size();

  Scene scene = initial_scene(trajectories, scene_rng);
  for (Epoch t = 0; t < cfg.n_epochs; ++t) {
    if (t > 0) scene = advance_scene(scene, trajectories, cfg.dt, scene_rng);
    scene.epoch = t;

    EpochRecord rec;
    rec.epoch = t;
    for (std::size_t i = 0; i < scene.targets.size(); ++i) {
      rec.target_ids.push_back(scene.targets[i].id);
      rec.truth.push_back(scene.targets[i].center);
      rec.segments.push_back(trajectories[i].segment_near(scene.targets[i].center));
    }
    rec.radars.resize(nr);

    std::vector<Preprocessed> pre(nr);
    for (int k = 0; k < n_radars; ++k) {
      const auto& rc = cfg.radars[static_cast<std::size_t>(k)];
      const Observation obs = observe(scene, rc.pose, rc.model, k, radar_rng[static_cast<std::size_t>(k)]);
      pre[static_cast<std::size_t>(k)] = preprocess(obs.cloud, rc.pose, cfg.dbscan_eps, cfg.dbscan_min_pts);
      auto& re = rec.radars[static_cast<std::size_t>(k)];
      re.radar = k;
      re.raw_points = static_cast<std::int64_t>(obs.cloud.points.size());
      re.cloud_points = static_cast<std::int64_t>(pre[static_cast<std::size_t>(k)].cloud.points.size());
      re.clusters = pre[static_cast<std::size_t>(k)].clusters.n_clusters;
      if (cfg.mode == Mode::Cooperation || want_kl) {
        // A coop message carries points only, so every holder of Q^ clusters
        // it the same way, the sender included.
        auto& slot = clouds[static_cast<std::size_t>(k)];
        const PointCloud& q = pre[static_cast<std::size_t>(k)].cloud;
        slot[t] = ClusteredCloud{q, dbscan(q.points, cfg.dbscan_eps, cfg.dbscan_min_pts)};
        while (!slot.empty() && slot.begin()->first <= t - (max_lag + 1)) slot.erase(slot.begin());
      }
    }

    auto broadcast = [&](Message msg) {
      run.link = account(std::move(run.link), msg);
      rec.radars[static_cast<std::size_t>(msg.sender)].bits_sent += msg.payload_bits();
      if (cfg.replay_log) {
        run.link = account_wire(std::move(run.link), msg);
        run.replay.push_back(msg);
      }
      history.store(std::move(msg));
    };
    auto receive = [&](int k, const Message& msg) {
      run.link = account_delivery(std::move(run.link), msg, k);
      rec.radars[static_cast<std::size_t>(k)].bits_received += msg.payload_bits();
    };

    // Ensemble for radar k: its own cloud plus the clouds behind `inbox`,
    // ordered by (sender, epoch). An unjittered coop message decodes
    // bit-exactly to the cached cloud, so its clustering comes from the
    // cache. Jittered copies are decoded and clustered afresh.
    auto ensemble_for = [&](int k, const std::vector<Message>& inbox, bool jittered_points,
                            std::vector<ClusteredCloud>& members, EnsembleKey& key) {
      members.clear();
      key.clear();
      members.push_back(clouds[static_cast<std::size_t>(k)].at(t));
      key.emplace_back(k, t);
      for (const auto& msg : inbox) {
        const ClusteredCloud& sent = clouds[static_cast<std::size_t>(msg.sender)].at(msg.epoch);
        if (jittered_points) {
          Message copy = msg;
          apply_jitter(copy, jitter_disp, jitter_rng[static_cast<std::size_t>(k)]);
          PointCloud cloud = decode_coop(copy);
          ClusterResult cl = dbscan(cloud.points, cfg.dbscan_eps, cfg.dbscan_min_pts);
          members.push_back(ClusteredCloud{std::move(cloud), std::move(cl)});
        } else {
          members.push_back(sent);
        }
        key.emplace_back(msg.sender, msg.epoch);
      }
      std::vector<std::size_t> order(members.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
      std::vector<ClusteredCloud> sorted;
      EnsembleKey sorted_key;
      for (std::size_t i : order) {
        sorted.push_back(std::move(members[i]));
        sorted_key.push_back(key[i]);
      }
      members = std::move(sorted);
      key = std::move(sorted_key);
    };

    std::vector<Posterior> estimate_from(nr);
    std::vector<Posterior> local(nr);
    std::vector<ReconstructedScene> reference_next(nr);

    if (cfg.mode == Mode::Isolated) {
      for (std::size_t k = 0; k < nr; ++k) {
        estimate_from[k] = local_posterior(pre[k].cloud, pre[k].clusters, chain.prior[k], cfg.grid, cfg.fusion);
      }
    } else if (cfg.mode == Mode::Cooperation) {
      for (int k = 0; k < n_radars; ++k) broadcast(encode_coop(pre[static_cast<std::size_t>(k)].cloud));
      const auto inbox = deliver(cfg.topology, history, clock, t);
      CoopMemo memo;
      std::vector<ClusteredCloud> members;
      EnsembleKey key;
      for (int k = 0; k < n_radars; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        for (const auto& msg : inbox[ku]) receive(k, msg);
        ensemble_for(k, inbox[ku], jitter, members, key);
        const Posterior* hit = jitter ? nullptr : memo.find(key, chain.scene[ku].cells);
        if (hit) {
          estimate_from[ku] = *hit;
        } else {
          estimate_from[ku] = coop_posterior(members, chain.prior[ku], cfg.grid, cfg.fusion);
          if (!jitter) memo.entries.push_back({key, chain.scene[ku].cells, estimate_from[ku]});
        }
      }
    } else {
      for (int k = 0; k < n_radars; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        local[ku] = local_posterior(pre[ku].cloud, pre[ku].clusters, chain.prior[ku], cfg.grid, cfg.fusion);
        broadcast(encode_fed(local[ku].mixture, k, t));
      }
      const auto inbox = deliver(cfg.topology, history, clock, t);
      CoopMemo memo;
      std::vector<ClusteredCloud> members;
      EnsembleKey key;
      for (int k = 0; k < n_radars; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        std::vector<GaussianMixture> received;
        std::vector<std::int64_t> counts{local[ku].mixture.total_points};
        for (const auto& msg : inbox[ku]) {
          receive(k, msg);
          Message copy = msg;
          if (jitter) apply_jitter(copy, jitter_disp, jitter_rng[ku]);
          received.push_back(decode_fed(copy));
          counts.push_back(received.back().total_points);
        }
        const AlphaWeights alpha = alpha_weights(counts);
        Posterior fed = federated_posterior(local[ku].mixture, received, alpha.alpha, cfg.grid, t);
        // Nothing to federate: stay with the local belief (the prior).
        if (fed.mixture.empty()) fed.grid = local[ku].grid;
        estimate_from[ku] = std::move(fed);

        if (want_kl) {
          // Evaluation-only reference; never charged to the link.
          ensemble_for(k, inbox[ku], false, members, key);
          const Posterior* hit = memo.find(key, reference.scene[ku].cells);
          Posterior global =
              hit ? *hit : coop_posterior(members, reference.prior[ku], cfg.grid, cfg.fusion);
          if (!hit) memo.entries.push_back({key, reference.scene[ku].cells, global});
          auto& re = rec.radars[ku];
          re.kl_global_fed = kl_divergence(global.grid, estimate_from[ku].grid);
          re.kl_global_local = kl_divergence(global.grid, local[ku].grid);
          reference_next[ku] = reconstruct_scene(global, cfg.tau);
        }
      }
    }

    std::vector<ReconstructedScene> next(nr);
    for (std::size_t k = 0; k < nr; ++k) {
      Posterior& post = estimate_from[k];
      post.epoch = t;
      auto& re = rec.radars[k];
      re.estimates = extract_targets(post, cfg.tau, cfg.min_separation).positions;
      re.resolved = re.estimates.size() >= n_targets;
      re.components = post.mixture.size();
      next[k] = reconstruct_scene(post, cfg.tau);
      if (cfg.grid_dump_every > 0 && t % cfg.grid_dump_every == 0) {
        run.grids.push_back({t, static_cast<int>(k), "posterior", post.grid});
        if (cfg.mode == Mode::Federation) run.grids.push_back({t, static_cast<int>(k), "local", local[k].grid});
      }
    }
    chain.advance(std::move(next), cfg);
    if (want_kl) reference.advance(std::move(reference_next), cfg);
    run.link.epochs += 1;
    run.records.push_back(std::move(rec));
  }
  run.metrics = compute_metrics(run.records, run.link, cfg);
  return run;
}

}  // namespace radfed
