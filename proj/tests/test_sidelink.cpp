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
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <vector>

#include "radfed/sidelink.hpp"

using namespace radfed;

namespace {

PointCloud random_cloud(std::size_t n, std::mt19937_64& rng, int radar = 0, Epoch epoch = 0) {
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  PointCloud c;
  c.frame = Frame::Global;
  c.radar_id = radar;
  c.epoch = epoch;
  for (std::size_t i = 0; i < n; ++i) c.points.emplace_back(u(rng), u(rng), u(rng));
  return c;
}

GaussianMixture random_mixture(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> q(0, 500);
  GaussianMixture mix;
  double wsum = 0.0;
  for (int j = 0; j < m; ++j) {
    GaussianComponent c;
    c.weight = 0.1 + u(rng);
    wsum += c.weight;
    c.mean = Vec3(8.0 * u(rng), 8.0 * u(rng), u(rng));
    Mat3 a = Mat3::Random();
    c.covariance = a * a.transpose() + 0.01 * Mat3::Identity();
    c.point_count = q(rng);
    mix.total_points += c.point_count;
    mix.components.push_back(c);
  }
  for (auto& c : mix.components) c.weight /= wsum;
  return mix;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_bits(a[i], b[i])) return false;
  }
  return true;
}

Message coop_of_size(std::size_t n, int sender) {
  Message m;
  m.sender = sender;
  m.kind = MessageKind::Coop;
  m.values.assign(3 * n, 0.5);
  return m;
}

}  // namespace

TEST_SUITE("sidelink") {
  TEST_CASE("coop payload sizes") {
    std::mt19937_64 rng(1);
    CHECK(encode_coop(random_cloud(0, rng)).payload_bits() == 0);
    CHECK(encode_coop(random_cloud(1, rng)).payload_bits() == 192);
    CHECK(encode_coop(random_cloud(625, rng)).payload_bits() == 120000);
    CHECK(encode_coop(random_cloud(815, rng)).payload_bits() == 156480);
    PointCloud local;
    CHECK_THROWS_AS(encode_coop(local), ContractError);
  }

  TEST_CASE("fed payload sizes") {
    std::mt19937_64 rng(2);
    CHECK(encode_fed(GaussianMixture{}, 0, 0).values.size() == 2);
    CHECK(encode_fed(random_mixture(1, rng), 0, 0).values.size() == 16);
    const auto three = encode_fed(random_mixture(3, rng), 1, 7);
    CHECK(three.values.size() == 44);
    CHECK(three.payload_bits() == 2816);
    CHECK(three.sender == 1);
    CHECK(three.epoch == 7);

    auto bad = random_mixture(2, rng);
    bad.components[0].weight = 0.9;
    bad.components[1].weight = 0.9;
    CHECK_THROWS_AS(encode_fed(bad, 0, 0), ContractError);
    bad = random_mixture(2, rng);
    bad.components[1].covariance(0, 0) = -1.0;
    CHECK_THROWS_AS(encode_fed(bad, 0, 0), ContractError);
  }

  TEST_CASE("codec round trips are bit-exact") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const auto cloud = random_cloud(static_cast<std::size_t>(trial * 7), rng, trial % 3, trial);
      const auto msg = encode_coop(cloud);
      const auto back = decode_coop(msg);
      REQUIRE(back.points.size() == cloud.points.size());
      CHECK(back.frame == Frame::Global);
      CHECK(back.radar_id == cloud.radar_id);
      CHECK(back.epoch == cloud.epoch);
      for (std::size_t i = 0; i < cloud.points.size(); ++i) {
        for (int d = 0; d < 3; ++d) CHECK(same_bits(back.points[i](d), cloud.points[i](d)));
      }

      const auto mix = random_mixture(trial % 6, rng);
      const auto fmsg = encode_fed(mix, 2, trial);
      const auto fback = decode_fed(fmsg);
      CHECK(fback.total_points == mix.total_points);
      REQUIRE(fback.components.size() == mix.components.size());
      CHECK(same_bits(encode_fed(fback, 2, trial).values, fmsg.values));
    }
  }

  TEST_CASE("decoders refuse malformed messages") {
    Message m;
    m.kind = MessageKind::Coop;
    m.values = {1.0, 2.0};
    CHECK_THROWS_AS(decode_coop(m), ContractError);
    m.kind = MessageKind::Fed;
    m.values = {10.0, 1.0, 1.0};
    CHECK_THROWS_AS(decode_fed(m), ContractError);
    m.values = {10.5, 0.0};
    CHECK_THROWS_AS(decode_fed(m), ContractError);
    CHECK_THROWS_AS(decode_coop(m), ContractError);
  }

  TEST_CASE("wire and replay round trips") {
    std::mt19937_64 rng(4);
    std::vector<Message> msgs;
    msgs.push_back(encode_coop(random_cloud(5, rng, 1, 3)));
    msgs.push_back(encode_fed(random_mixture(2, rng), 2, 4));
    msgs.push_back(encode_coop(random_cloud(0, rng, 0, 5)));
    Message odd = coop_of_size(1, 0);
    odd.values = {0.1, -0.0, 1e-310};
    msgs.push_back(odd);
    for (const auto& m : msgs) {
      const auto text = to_wire(m);
      CHECK(text.find('\n') == std::string::npos);
      const auto back = from_wire(text);
      CHECK(back.sender == m.sender);
      CHECK(back.epoch == m.epoch);
      CHECK(back.kind == m.kind);
      CHECK(same_bits(back.values, m.values));
    }
    CHECK_THROWS_AS(from_wire("{\"sender\":0"), std::runtime_error);
    CHECK_THROWS_AS(from_wire("{\"sender\":0,\"epoch\":0,\"kind\":\"x\",\"values\":[]}"),
                    std::runtime_error);

    const auto path = std::filesystem::temp_directory_path() / "radfed_replay_test.jsonl";
    write_replay(path, msgs);
    const auto back = read_replay(path);
    REQUIRE(back.size() == msgs.size());
    for (std::size_t i = 0; i < msgs.size(); ++i) CHECK(same_bits(back[i].values, msgs[i].values));
    std::filesystem::remove(path);
  }

  TEST_CASE("topology") {
    const auto full = Topology::fully_connected(3);
    CHECK(full.edges().size() == 6);
    CHECK(full.neighbors(0) == std::vector<int>{1, 2});
    CHECK(full.neighbors(2) == std::vector<int>{0, 1});
    CHECK(Topology::disconnected(3).neighbors(1).empty());
    const Topology chain(3, {{2, 1}, {0, 1}});
    CHECK(chain.neighbors(1) == std::vector<int>{0, 2});
    CHECK(chain.neighbors(0).empty());
    CHECK_THROWS_AS(Topology(2, {{0, 0}}), ConfigError);
    CHECK_THROWS_AS(Topology(2, {{0, 1}, {0, 1}}), ConfigError);
    CHECK_THROWS_AS(Topology(2, {{0, 2}}), ConfigError);
    CHECK_THROWS_AS(Topology(0, {}), ConfigError);
  }

  TEST_CASE("deliver: synchronous, delayed and full mesh") {
    const auto topo = Topology::fully_connected(2);
    MessageHistory hist(2, 4);
    for (Epoch t = 0; t <= 5; ++t) {
      for (int h = 0; h < 2; ++h) {
        Message m = coop_of_size(1, h);
        m.epoch = t;
        hist.store(m);
      }
    }
    ClockModel sync;
    auto inbox = deliver(topo, hist, sync, 5);
    REQUIRE(inbox[1].size() == 1);
    CHECK(inbox[1][0].sender == 0);
    CHECK(inbox[1][0].epoch == 5);

    ClockModel late;
    late.offsets = {0.010, 0.0};
    CHECK(late.staleness(0) == 1);
    CHECK(late.staleness(1) == 0);
    CHECK(late.staleness(7) == 0);
    inbox = deliver(topo, hist, late, 5);
    CHECK(inbox[1][0].epoch == 4);
    CHECK(inbox[0][0].epoch == 5);
    CHECK(deliver(topo, hist, late, 0)[1].empty());

    // Older than the history depth: nothing to deliver.
    ClockModel far;
    far.offsets = {0.050};
    CHECK(deliver(topo, hist, far, 5)[1].empty());

    const auto mesh = Topology::fully_connected(3);
    MessageHistory h3(3, 1);
    for (int h = 0; h < 3; ++h) h3.store(coop_of_size(2, h));
    const auto in3 = deliver(mesh, h3, sync, 0);
    for (int k = 0; k < 3; ++k) {
      REQUIRE(in3[k].size() == 2);
      CHECK(in3[k][0].sender < in3[k][1].sender);
      for (const auto& m : in3[k]) CHECK(m.sender != k);
    }
  }

  TEST_CASE("jitter moves only horizontal coordinates") {
    std::mt19937_64 src(5);
    Message coop = encode_coop(random_cloud(20, src));
    const Message before = coop;
    Rng rng(9);
    apply_jitter(coop, 0.05, rng);
    for (std::size_t i = 0; i < coop.values.size(); ++i) {
      if (i % 3 == 2) {
        CHECK(coop.values[i] == before.values[i]);
      } else {
        CHECK(coop.values[i] != before.values[i]);
      }
    }
    Message fed = encode_fed(random_mixture(2, src), 0, 0);
    const Message fbefore = fed;
    apply_jitter(fed, 0.05, rng);
    for (std::size_t i = 0; i < fed.values.size(); ++i) {
      const bool moved = i >= 2 && ((i - 2) % 14 == 1 || (i - 2) % 14 == 2);
      CHECK((fed.values[i] != fbefore.values[i]) == moved);
    }
    Message zero = before;
    apply_jitter(zero, 0.0, rng);
    CHECK(zero == before);
  }

  TEST_CASE("rates: exact bandwidth figures") {
    auto run_rate = [](std::size_t values_per_update, Epoch epochs) {
      LinkStats s(1, 10000);
      s.epochs = epochs;
      Message m;
      m.values.assign(values_per_update, 0.0);
      for (Epoch t = 0; t < epochs; ++t) s = account(s, m);
      return s.rate(0);
    };
    CHECK(run_rate(3 * 625, 100) == Rational{12000000, 1});
    CHECK(run_rate(3 * 815, 100) == Rational{15648000, 1});
    CHECK(run_rate(44, 100) == Rational{281600, 1});
    CHECK(run_rate(3 * 625, 900) == Rational{12000000, 1});
    const auto coop = run_rate(3 * 625, 1);
    const auto fed = run_rate(44, 1);
    CHECK(coop.num * fed.den >= 20 * fed.num * coop.den);

    LinkStats none(3, 10000);
    none.epochs = 900;
    CHECK(none.total_rate() == Rational{0, 1});
    CHECK(none.rate(2) == Rational{0, 1});
    CHECK_THROWS_AS(none.rate(3), ContractError);
    LinkStats empty(3, 10000);
    CHECK(empty.total_rate() == Rational{0, 1});
    CHECK(Rational::make(6, 4) == Rational{3, 2});
  }

  TEST_CASE("accounting is additive") {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<int> n(0, 300), who(0, 2);
    LinkStats total(3, 10000);
    std::int64_t expect = 0;
    std::vector<std::int64_t> per(3, 0);
    for (int i = 0; i < 200; ++i) {
      const Message m = coop_of_size(static_cast<std::size_t>(n(rng)), who(rng));
      total = account(total, m);
      total = account_delivery(total, m, (m.sender + 1) % 3);
      expect += m.payload_bits();
      per[static_cast<std::size_t>(m.sender)] += m.payload_bits();
    }
    CHECK(total.total_bits() == expect);
    CHECK(total.sent_bits == per);
    std::int64_t linked = 0;
    for (const auto& [edge, bits] : total.link_bits) linked += bits;
    CHECK(linked == expect);
    CHECK(account_wire(total, coop_of_size(1, 0)).wire_bytes > 0);
    CHECK(account_wire(total, coop_of_size(1, 0)).total_bits() == expect);
  }
}
