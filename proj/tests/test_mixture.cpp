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
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "radfed/dbscan.hpp"
#include "radfed/grid.hpp"
#include "radfed/mixture.hpp"

using namespace radfed;

namespace {

std::vector<Vec3> gaussian_blob(const Vec3& c, int n, double s, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, s);
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.push_back(c + Vec3(nd(rng), nd(rng), nd(rng)));
  return out;
}

GaussianComponent iso_component(double w, const Vec3& mu, double var) {
  GaussianComponent c;
  c.weight = w;
  c.mean = mu;
  c.covariance = Mat3::Identity() * var;
  return c;
}

}  // namespace

TEST_SUITE("mixture") {
  TEST_CASE("choose_components") {
    ClusterResult r;
    r.n_clusters = 3;
    CHECK(choose_components(r, 8) == 3);
    r.n_clusters = 0;
    CHECK(choose_components(r, 8) == 0);
    r.n_clusters = 12;
    CHECK(choose_components(r, 8) == 8);
    CHECK_THROWS_AS(choose_components(r, 0), ContractError);
  }

  TEST_CASE("fit_em: one component is moment matching") {
    std::mt19937_64 rng(1);
    auto pts = gaussian_blob(Vec3(1.0, 2.0, 0.5), 300, 0.2, rng);
    // Oracle: sample mean and the 1/n sample covariance, eigenvalues floored.
    Vec3 mean = Vec3::Zero();
    for (const auto& p : pts) mean += p;
    mean /= static_cast<double>(pts.size());
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
    cov /= static_cast<double>(pts.size());

    EmInit init;
    init.means = {Vec3::Zero()};
    EmOptions opt;
    const auto m = fit_em(pts, 1, init, opt);
    REQUIRE(m.size() == 1);
    CHECK(m.components[0].weight == doctest::Approx(1.0));
    CHECK((m.components[0].mean - mean).norm() < 1e-9);
    CHECK((m.components[0].covariance - cov).norm() < 1e-9);
    CHECK(m.components[0].point_count == 300);
    CHECK(m.total_points == 300);

    // A floor above the scatter lifts every eigenvalue to it.
    opt.cov_floor = 1.0;
    const auto f = fit_em(pts, 1, init, opt);
    Eigen::SelfAdjointEigenSolver<Mat3> es(f.components[0].covariance);
    CHECK(es.eigenvalues().minCoeff() == doctest::Approx(1.0));
  }

  TEST_CASE("fit_em: two blobs against per-blob moments") {
    std::mt19937_64 rng(2);
    auto a = gaussian_blob(Vec3::Zero(), 200, 0.1, rng);
    auto b = gaussian_blob(Vec3(10.0, 0.0, 0.0), 200, 0.1, rng);
    Vec3 ma = Vec3::Zero(), mb = Vec3::Zero();
    for (const auto& p : a) ma += p / 200.0;
    for (const auto& p : b) mb += p / 200.0;
    std::vector<Vec3> pts = a;
    pts.insert(pts.end(), b.begin(), b.end());
    EmInit init;
    init.means = {Vec3(1.0, 1.0, 0.0), Vec3(8.0, -1.0, 0.0)};
    const auto m = fit_em(pts, 2, init, EmOptions{});
    REQUIRE(m.size() == 2);
    CHECK((m.components[0].mean - ma).norm() < 0.05);
    CHECK((m.components[1].mean - mb).norm() < 0.05);
    CHECK(std::abs(m.components[0].weight - 0.5) < 0.05);
    CHECK(std::abs(m.components[1].weight - 0.5) < 0.05);
    CHECK(m.components[0].weight + m.components[1].weight == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(m.components[0].point_count + m.components[1].point_count == 400);
    CHECK(is_valid(m));
  }

  TEST_CASE("fit_em: fewer points than components reduces M") {
    std::vector<Vec3> pts = {Vec3::Zero(), Vec3(1.0, 0.0, 0.0)};
    EmInit init;
    init.means = {Vec3::Zero(), Vec3(1.0, 0.0, 0.0), Vec3(2.0, 0.0, 0.0)};
    EmReport rep;
    const auto m = fit_em(pts, 3, init, EmOptions{}, {}, &rep);
    CHECK(m.size() == 2);
    CHECK(rep.reduced_components);
    CHECK(fit_em({}, 3, init, EmOptions{}).empty());
  }

  TEST_CASE("fit_em: log-likelihood never decreases") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> mdist(1, 5);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int fit = 0; fit < 200; ++fit) {
      const int m = mdist(rng);
      std::vector<Vec3> pts;
      for (int c = 0; c < m; ++c) {
        const auto b = gaussian_blob(Vec3(u(rng), u(rng), u(rng)), 20 + fit % 50, 0.05 + 0.1 * u(rng), rng);
        pts.insert(pts.end(), b.begin(), b.end());
      }
      EmInit init;
      for (int c = 0; c < m; ++c) init.means.push_back(Vec3(u(rng), u(rng), u(rng)));
      std::vector<double> w;
      if (fit % 2) {
        for (std::size_t i = 0; i < pts.size(); ++i) w.push_back(0.25 + u(rng));
      }
      EmReport rep;
      EmOptions opt;
      opt.tol = 0.0;
      opt.max_iters = 40;
      const auto mix = fit_em(pts, m, init, opt, w, &rep);
      for (std::size_t i = 1; i < rep.loglik_trace.size(); ++i) {
        CHECK(rep.loglik_trace[i] >= rep.loglik_trace[i - 1] - 1e-9);
      }
      CHECK(is_valid(mix));
    }
  }

  TEST_CASE("init_from_clusters: the m largest clusters in id order") {
    std::mt19937_64 rng(4);
    std::vector<Vec3> pts;
    ClusterResult r;
    r.n_clusters = 3;
    const int sizes[] = {5, 30, 12};
    for (int id = 0; id < 3; ++id) {
      const auto b = gaussian_blob(Vec3(3.0 * id, 0.0, 0.0), sizes[id], 0.1, rng);
      pts.insert(pts.end(), b.begin(), b.end());
      r.labels.insert(r.labels.end(), static_cast<std::size_t>(sizes[id]), id);
    }
    const auto init = init_from_clusters(pts, r, 2, 1e-6);
    REQUIRE(init.means.size() == 2);
    CHECK(init.means[0].x() == doctest::Approx(3.0).epsilon(0.05));
    CHECK(init.means[1].x() == doctest::Approx(6.0).epsilon(0.05));
    CHECK(init.weights[0] == doctest::Approx(30.0 / 42.0));
  }

  TEST_CASE("is_valid and floor_covariance") {
    GaussianMixture m;
    m.components = {iso_component(0.4, Vec3::Zero(), 1.0), iso_component(0.6, Vec3::Ones(), 0.5)};
    m.components[0].point_count = 4;
    m.components[1].point_count = 6;
    m.total_points = 10;
    CHECK(is_valid(m));
    m.components[1].weight = 0.7;
    std::string why;
    CHECK_FALSE(is_valid(m, &why));
    CHECK(!why.empty());
    m.components[1].weight = 0.6;
    m.components[1].covariance(0, 1) = 5.0;
    CHECK_FALSE(is_valid(m));

    Mat3 c = Mat3::Zero();
    c(0, 0) = 4.0;
    const Mat3 f = floor_covariance(c, 0.01);
    Eigen::SelfAdjointEigenSolver<Mat3> es(f);
    CHECK(es.eigenvalues().minCoeff() == doctest::Approx(0.01));
    CHECK(es.eigenvalues().maxCoeff() == doctest::Approx(4.0));
    CHECK((f - f.transpose()).norm() == 0.0);
  }

  TEST_CASE("eval_on_grid: matches direct density evaluation") {
    const GridSpec spec = GridSpec::from_extent(0.0, 0.0, 4.0, 3.0, 0.05);
    GaussianMixture m;
    m.components = {iso_component(0.3, Vec3(1.0, 1.0, 0.0), 0.04),
                    iso_component(0.7, Vec3(2.5, 2.0, 1.0), 0.09)};
    m.components[1].covariance(0, 1) = m.components[1].covariance(1, 0) = 0.03;
    m.components[1].covariance(2, 2) = 3.0;  // z is marginalized out
    const DensityGrid got = eval_on_grid(m, spec);
    const DensityGrid want = oracle::mixture_grid(m, spec);
    CHECK(got.sum() == doctest::Approx(1.0).epsilon(1e-9));
    double worst = 0.0;
    for (std::size_t i = 0; i < got.mass.size(); ++i) worst = std::max(worst, std::abs(got.mass[i] - want.mass[i]));
    CHECK(worst < 1e-12);
  }

  TEST_CASE("eval_on_grid: single peak, empty mixture, two equal bumps") {
    const GridSpec spec = GridSpec::from_extent(0.0, 0.0, 8.0, 8.0, 0.05);
    GaussianMixture one;
    one.components = {iso_component(1.0, Vec3(4.01, 3.97, 1.0), 0.01)};
    const DensityGrid g = eval_on_grid(one, spec);
    CHECK(g.argmax() == *spec.cell_of(4.01, 3.97));

    const DensityGrid u = eval_on_grid(GaussianMixture{}, spec);
    CHECK(u.is_flat());
    CHECK(u.mass[0] == doctest::Approx(1.0 / static_cast<double>(spec.cells())));

    GaussianMixture two;
    two.components = {iso_component(0.5, Vec3(2.025, 2.025, 0.0), 0.04),
                      iso_component(0.5, Vec3(6.025, 5.025, 0.0), 0.04)};
    const DensityGrid t = eval_on_grid(two, spec);
    const auto maxima = oracle::extract_targets(t, 0.1, 0.0);
    REQUIRE(maxima.size() == 2);
    CHECK((maxima[0] - Vec2(2.025, 2.025)).norm() < 1e-9);
    CHECK((maxima[1] - Vec2(6.025, 5.025)).norm() < 1e-9);
  }

  TEST_CASE("eval_on_grid: density integrates to one on a wide grid") {
    GaussianMixture m;
    m.components = {iso_component(0.5, Vec3(0.0, 0.0, 0.0), 0.2),
                    iso_component(0.5, Vec3(1.0, -0.5, 0.0), 0.1)};
    const GridSpec wide = GridSpec::from_extent(-6.0, -6.0, 7.0, 6.0, 0.05);
    const DensityGrid raw = oracle::mixture_grid(m, wide);
    // The oracle normalizes; recompute its pre-normalization mass.
    double total = 0.0;
    for (std::size_t c = 0; c < wide.cells(); ++c) {
      const Vec2 p = wide.center(c);
      for (const auto& comp : m.components) {
        const double v = comp.covariance(0, 0);
        total += comp.weight * std::exp(-0.5 * (p - comp.mean.head<2>()).squaredNorm() / v) /
                 (2.0 * std::numbers::pi * v) * wide.cell_area();
      }
    }
    CHECK(std::abs(total - 1.0) < 1e-3);
    CHECK(raw.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("kl_divergence: identity, closed form and disjoint supports") {
    const GridSpec spec = GridSpec::from_extent(-8.0, -8.0, 9.0, 8.0, 0.1);
    GaussianMixture p, q;
    p.components = {iso_component(1.0, Vec3(0.0, 0.0, 0.0), 1.0)};
    q.components = {iso_component(1.0, Vec3(1.0, 0.0, 0.0), 1.0)};
    const DensityGrid gp = eval_on_grid(p, spec);
    const DensityGrid gq = eval_on_grid(q, spec);
    CHECK(kl_divergence(gp, gp) < 1e-12);
    const double closed = oracle::gaussian_kl_2d(Vec2::Zero(), Eigen::Matrix2d::Identity(),
                                                 Vec2(1.0, 0.0), Eigen::Matrix2d::Identity());
    CHECK(closed == doctest::Approx(0.5));
    CHECK(std::abs(kl_divergence(gp, gq) - closed) < 0.01 * closed);

    DensityGrid a = DensityGrid::zeros(spec), b = DensityGrid::zeros(spec);
    a.mass[0] = 1.0;
    b.mass[spec.cells() - 1] = 1.0;
    const double d = kl_divergence(a, b);
    CHECK(std::isfinite(d));
    CHECK(d > 10.0);

    const GridSpec other = GridSpec::from_extent(0.0, 0.0, 1.0, 1.0, 0.1);
    CHECK_THROWS_AS(kl_divergence(gp, DensityGrid::uniform(other)), ContractError);
  }

  TEST_CASE("kl_divergence: non-negative and asymmetric on random grids") {
    const GridSpec spec = GridSpec::from_extent(0.0, 0.0, 1.0, 1.0, 0.1);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    bool asymmetric = false;
    for (int i = 0; i < 100; ++i) {
      DensityGrid a = DensityGrid::zeros(spec), b = DensityGrid::zeros(spec);
      for (auto& v : a.mass) v = u(rng) < 0.2 ? 0.0 : u(rng);
      for (auto& v : b.mass) v = u(rng);
      a.normalize();
      b.normalize();
      CHECK(kl_divergence(a, b) >= 0.0);
      asymmetric = asymmetric || std::abs(kl_divergence(a, b) - kl_divergence(b, a)) > 1e-6;
    }
    CHECK(asymmetric);
  }

  TEST_CASE("grid CSV round trip is exact") {
    const GridSpec spec = GridSpec::from_extent(0.5, -1.0, 2.0, 0.3, 0.1);
    DensityGrid g = DensityGrid::zeros(spec);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : g.mass) v = u(rng) * 1e-7;
    g.normalize();
    const auto path = std::filesystem::temp_directory_path() / "radfed_grid_roundtrip.csv";
    write_grid_csv(g, path);
    const DensityGrid back = read_grid_csv(path);
    CHECK(back.spec == g.spec);
    CHECK(back.mass == g.mass);
    std::filesystem::remove(path);
  }
}
