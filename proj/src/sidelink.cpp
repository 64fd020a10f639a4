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

#include "radfed/sidelink.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace radfed {
namespace {

constexpr std::size_t kFedHeader = 2;
constexpr std::size_t kFedPerComponent = 14;

std::int64_t exact_count(double v, const char* what) {
  if (!(v >= 0.0) || v != std::floor(v) || v > 9007199254740992.0) {
    throw ContractError(std::string("decode_fed: ") + what + " is not a count");
  }
  return static_cast<std::int64_t>(v);
}

}  // namespace

Topology::Topology(int n_radars, std::vector<std::pair<int, int>> edges)
    : n_radars_(n_radars), edges_(std::move(edges)) {
  if (n_radars_ < 1) throw ConfigError("topology: need at least one radar");
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw ConfigError("topology: duplicate edge");
  }
  neighbors_.assign(static_cast<std::size_t>(n_radars_), {});
  for (const auto& [h, k] : edges_) {
    if (h < 0 || k < 0 || h >= n_radars_ || k >= n_radars_) {
      throw ConfigError("topology: edge endpoint out of range");
    }
    if (h == k) throw ConfigError("topology: self-loop on radar " + std::to_string(h));
    neighbors_[static_cast<std::size_t>(k)].push_back(h);
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());
}

Topology Topology::fully_connected(int n_radars) {
  std::vector<std::pair<int, int>> edges;
  for (int h = 0; h < n_radars; ++h) {
    for (int k = 0; k < n_radars; ++k) {
      if (h != k) edges.emplace_back(h, k);
    }
  }
  return Topology(n_radars, std::move(edges));
}

Topology Topology::disconnected(int n_radars) { return Topology(n_radars, {}); }

const std::vector<int>& Topology::neighbors(int k) const {
  if (k < 0 || k >= n_radars_) throw ContractError("topology: radar id out of range");
  return neighbors_[static_cast<std::size_t>(k)];
}

const char* to_string(MessageKind kind) { return kind == MessageKind::Coop ? "coop" : "fed"; }

Message encode_coop(const PointCloud& cloud) {
  if (cloud.frame != Frame::Global) throw ContractError("encode_coop: cloud must be global-frame");
  Message msg;
  msg.sender = cloud.radar_id;
  msg.epoch = cloud.epoch;
  msg.kind = MessageKind::Coop;
  msg.values.reserve(3 * cloud.points.size());
  for (const auto& p : cloud.points) {
    msg.values.push_back(p.x());
    msg.values.push_back(p.y());
    msg.values.push_back(p.z());
  }
  return msg;
}

PointCloud decode_coop(const Message& msg) {
  if (msg.kind != MessageKind::Coop) throw ContractError("decode_coop: not a coop message");
  if (msg.values.size() % 3 != 0) throw ContractError("decode_coop: value count not a multiple of 3");
  PointCloud cloud;
  cloud.frame = Frame::Global;
  cloud.epoch = msg.epoch;
  cloud.radar_id = msg.sender;
  cloud.points.reserve(msg.values.size() / 3);
  for (std::size_t i = 0; i < msg.values.size(); i += 3) {
    cloud.points.emplace_back(msg.values[i], msg.values[i + 1], msg.values[i + 2]);
  }
  return cloud;
}

Message encode_fed(const GaussianMixture& mixture, int sender, Epoch epoch) {
  std::string why;
  if (!is_valid(mixture, &why)) throw ContractError("encode_fed: invalid mixture: " + why);
  Message msg;
  msg.sender = sender;
  msg.epoch = epoch;
  msg.kind = MessageKind::Fed;
  msg.values.reserve(kFedHeader + kFedPerComponent * mixture.components.size());
  msg.values.push_back(static_cast<double>(mixture.total_points));
  msg.values.push_back(static_cast<double>(mixture.components.size()));
  for (const auto& c : mixture.components) {
    msg.values.push_back(c.weight);
    for (int i = 0; i < 3; ++i) msg.values.push_back(c.mean(i));
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) msg.values.push_back(c.covariance(r, col));
    }
    msg.values.push_back(static_cast<double>(c.point_count));
  }
  return msg;
}

GaussianMixture decode_fed(const Message& msg) {
  if (msg.kind != MessageKind::Fed) throw ContractError("decode_fed: not a fed message");
  if (msg.values.size() < kFedHeader) throw ContractError("decode_fed: truncated header");
  GaussianMixture mixture;
  mixture.total_points = exact_count(msg.values[0], "Q_k");
  const auto m = exact_count(msg.values[1], "M_k");
  if (msg.values.size() != kFedHeader + kFedPerComponent * static_cast<std::size_t>(m)) {
    throw ContractError("decode_fed: value count does not match M_k");
  }
  const double* v = msg.values.data() + kFedHeader;
  for (std::int64_t j = 0; j < m; ++j, v += kFedPerComponent) {
    GaussianComponent c;
    c.weight = v[0];
    c.mean = Vec3(v[1], v[2], v[3]);
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) c.covariance(r, col) = v[4 + 3 * r + col];
    }
    c.point_count = exact_count(v[13], "Q_k,m");
    mixture.components.push_back(c);
  }
  return mixture;
}

std::string to_wire(const Message& msg) {
  for (double v : msg.values) {
    if (!std::isfinite(v)) throw ContractError("to_wire: non-finite value");
  }
  nlohmann::json j;
  j["sender"] = msg.sender;
  j["epoch"] = msg.epoch;
  j["kind"] = to_string(msg.kind);
  j["values"] = msg.values;
  return j.dump();
}

Message from_wire(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed message: ") + e.what());
  }
  if (!j.is_object() || !j.contains("sender") || !j.contains("epoch") || !j.contains("kind") ||
      !j.contains("values") || !j["values"].is_array()) {
    throw std::runtime_error("malformed message: missing field");
  }
  Message msg;
  try {
    msg.sender = j["sender"].get<int>();
    msg.epoch = j["epoch"].get<Epoch>();
    const auto kind = j["kind"].get<std::string>();
    if (kind == "coop") {
      msg.kind = MessageKind::Coop;
    } else if (kind == "fed") {
      msg.kind = MessageKind::Fed;
    } else {
      throw std::runtime_error("malformed message: unknown kind '" + kind + "'");
    }
    msg.values.reserve(j["values"].size());
    for (const auto& v : j["values"]) {
      if (!v.is_number()) throw std::runtime_error("malformed message: non-numeric value");
      msg.values.push_back(v.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed message: ") + e.what());
  }
  return msg;
}

void write_replay(const std::filesystem::path& path, std::span<const Message> messages) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write replay log: " + path.string());
  for (const auto& m : messages) out << to_wire(m) << '\n';
  if (!out) throw std::runtime_error("error while writing replay log: " + path.string());
}

std::vector<Message> read_replay(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read replay log: " + path.string());
  std::vector<Message> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(from_wire(line));
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

double ClockModel::offset(int radar) const {
  if (radar < 0 || static_cast<std::size_t>(radar) >= offsets.size()) return 0.0;
  return offsets[static_cast<std::size_t>(radar)];
}

Epoch ClockModel::staleness(int radar) const {
  if (!(period > 0.0)) throw ContractError("clock: period must be positive");
  return static_cast<Epoch>(std::llround(std::abs(offset(radar)) / period));
}

MessageHistory::MessageHistory(int n_radars, Epoch depth)
    : depth_(std::max<Epoch>(depth, 1)), by_sender_(static_cast<std::size_t>(n_radars)) {}

void MessageHistory::store(Message msg) {
  if (msg.sender < 0 || static_cast<std::size_t>(msg.sender) >= by_sender_.size()) {
    throw ContractError("message history: sender out of range");
  }
  auto& slot = by_sender_[static_cast<std::size_t>(msg.sender)];
  const Epoch e = msg.epoch;
  slot[e] = std::move(msg);
  while (!slot.empty() && slot.begin()->first <= e - depth_) slot.erase(slot.begin());
}

const Message* MessageHistory::find(int sender, Epoch epoch) const {
  if (sender < 0 || static_cast<std::size_t>(sender) >= by_sender_.size()) return nullptr;
  const auto& slot = by_sender_[static_cast<std::size_t>(sender)];
  const auto it = slot.find(epoch);
  return it == slot.end() ? nullptr : &it->second;
}

std::vector<std::vector<Message>> deliver(const Topology& topology, const MessageHistory& history,
                                          const ClockModel& clock, Epoch epoch) {
  std::vector<std::vector<Message>> inbox(static_cast<std::size_t>(topology.n_radars()));
  for (int k = 0; k < topology.n_radars(); ++k) {
    for (int h : topology.neighbors(k)) {
      const Epoch sent = epoch - clock.staleness(h);
      if (sent < 0) continue;
      if (const Message* m = history.find(h, sent)) inbox[static_cast<std::size_t>(k)].push_back(*m);
    }
  }
  return inbox;
}

void apply_jitter(Message& msg, double displacement_std, Rng& rng) {
  if (!(displacement_std > 0.0)) return;
  std::normal_distribution<double> noise(0.0, displacement_std);
  if (msg.kind == MessageKind::Coop) {
    for (std::size_t i = 0; i + 2 < msg.values.size(); i += 3) {
      msg.values[i] += noise(rng);
      msg.values[i + 1] += noise(rng);
    }
    return;
  }
  if (msg.values.size() < kFedHeader) return;
  for (std::size_t off = kFedHeader; off + kFedPerComponent <= msg.values.size();
       off += kFedPerComponent) {
    msg.values[off + 1] += noise(rng);
    msg.values[off + 2] += noise(rng);
  }
}

Rational Rational::make(std::int64_t num, std::int64_t den) {
  if (den <= 0 || num < 0) throw ContractError("rational: need num >= 0 and den > 0");
  const std::int64_t g = std::gcd(num, den);
  return {num / g, den / g};
}

LinkStats::LinkStats(int n, std::int64_t period)
    : n_radars(n),
      period_us(period),
      sent_bits(static_cast<std::size_t>(n), 0),
      sent_messages(static_cast<std::size_t>(n), 0) {
  if (n < 0 || period <= 0) throw ContractError("link stats: need n >= 0 and a positive period");
}

std::int64_t LinkStats::total_bits() const {
  return std::accumulate(sent_bits.begin(), sent_bits.end(), std::int64_t{0});
}

namespace {

Rational bits_per_second(std::int64_t bits, Epoch epochs, std::int64_t period_us) {
  if (epochs <= 0 || bits == 0) return {0, 1};
  // bits * 1e6 / (epochs * period_us), reduced before multiplying out.
  const std::int64_t den = epochs * period_us;
  const std::int64_t g1 = std::gcd(bits, den);
  const std::int64_t g2 = std::gcd(std::int64_t{1000000}, den / g1);
  const __int128 num = static_cast<__int128>(bits / g1) * (1000000 / g2);
  if (num > std::numeric_limits<std::int64_t>::max()) {
    throw ContractError("link stats: rate overflows");
  }
  return Rational::make(static_cast<std::int64_t>(num), den / g1 / g2);
}

}  // namespace

Rational LinkStats::rate(int radar) const {
  if (radar < 0 || radar >= n_radars) throw ContractError("link stats: radar out of range");
  return bits_per_second(sent_bits[static_cast<std::size_t>(radar)], epochs, period_us);
}

Rational LinkStats::total_rate() const { return bits_per_second(total_bits(), epochs, period_us); }

LinkStats account(LinkStats stats, const Message& msg) {
  if (msg.sender < 0 || msg.sender >= stats.n_radars) {
    throw ContractError("account: sender out of range");
  }
  stats.sent_bits[static_cast<std::size_t>(msg.sender)] += msg.payload_bits();
  stats.sent_messages[static_cast<std::size_t>(msg.sender)] += 1;
  return stats;
}

LinkStats account_delivery(LinkStats stats, const Message& msg, int receiver) {
  stats.link_bits[{msg.sender, receiver}] += msg.payload_bits();
  stats.link_messages[{msg.sender, receiver}] += 1;
  return stats;
}

LinkStats account_wire(LinkStats stats, const Message& msg) {
  stats.wire_bytes += static_cast<std::int64_t>(to_wire(msg).size());
  return stats;
}

}  // namespace radfed
