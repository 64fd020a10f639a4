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
 * \file sidelink.hpp
 * \brief Simulated radar-to-radar link: topology, message codecs, clock
 * offsets, delivery and payload accounting.
 *
 * Payload is counted as 64 bits per transmitted number. JSON framing of the
 * wire format is tracked separately and never enters the bit rates.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "radfed/mixture.hpp"
#include "radfed/sensor.hpp"
#include "radfed/types.hpp"

namespace radfed {

class Topology {
 public:
  Topology() = default;
  /// Directed edges (h, k): h sends to k. Throws ConfigError on self-loops,
  /// duplicates or ids outside [0, n_radars).
  Topology(int n_radars, std::vector<std::pair<int, int>> edges);

  static Topology fully_connected(int n_radars);
  static Topology disconnected(int n_radars);

  int n_radars() const { return n_radars_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  /// Senders heard by radar k, ascending.
  const std::vector<int>& neighbors(int k) const;

 private:
  int n_radars_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> neighbors_;
};

enum class MessageKind { Coop, Fed };

const char* to_string(MessageKind kind);

struct Message {
  int sender = 0;
  Epoch epoch = 0;
  MessageKind kind = MessageKind::Coop;
  std::vector<double> values;

  std::int64_t payload_bits() const { return 64 * static_cast<std::int64_t>(values.size()); }
  bool operator==(const Message&) const = default;
};

/// Coordinates x, y, z per point. The cloud must be in the global frame.
Message encode_coop(const PointCloud& cloud);
PointCloud decode_coop(const Message& msg);

/// Q_k, M_k, then per component beta, mu (3), Sigma (9, row-major), Q_k,m.
/// Throws ContractError for an invalid mixture.
Message encode_fed(const GaussianMixture& mixture, int sender, Epoch epoch);
GaussianMixture decode_fed(const Message& msg);

/// One JSON object {"sender","epoch","kind","values"} without a newline.
std::string to_wire(const Message& msg);
/// Throws std::runtime_error on malformed input.
Message from_wire(std::string_view text);

/// One wire object per line.
void write_replay(const std::filesystem::path& path, std::span<const Message> messages);
std::vector<Message> read_replay(const std::filesystem::path& path);

struct ClockModel {
  std::vector<double> offsets;  // seconds, per radar; missing entries are 0
  double jitter_std = 0.0;      // seconds
  double period = 0.010;        // update period, seconds

  double offset(int radar) const;
  /// Whole update periods of lag for sender h: round(|offset| / period).
  Epoch staleness(int radar) const;
};

/// Recent outgoing messages per sender, keyed by epoch.
class MessageHistory {
 public:
  explicit MessageHistory(int n_radars = 0, Epoch depth = 1);

  void store(Message msg);
  const Message* find(int sender, Epoch epoch) const;

 private:
  Epoch depth_;
  std::vector<std::map<Epoch, Message>> by_sender_;
};

/**
 * Inbox of every radar at `epoch`: for each h in N_k, h's message from
 * epoch - staleness(h), if h had sent one by then. Inboxes are ordered by
 * sender id.
 */
std::vector<std::vector<Message>> deliver(const Topology& topology, const MessageHistory& history,
                                          const ClockModel& clock, Epoch epoch);

/// Adds N(0, std^2) to the x and y of every point (coop) or mean (fed).
void apply_jitter(Message& msg, double displacement_std, Rng& rng);

/// Exact non-negative fraction, kept reduced.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational make(std::int64_t num, std::int64_t den);
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

struct LinkStats {
  int n_radars = 0;
  std::int64_t period_us = 10000;
  Epoch epochs = 0;

  std::vector<std::int64_t> sent_bits;      // per sender, each broadcast once
  std::vector<std::int64_t> sent_messages;
  std::map<std::pair<int, int>, std::int64_t> link_bits;  // (sender, receiver)
  std::map<std::pair<int, int>, std::int64_t> link_messages;
  std::int64_t wire_bytes = 0;  // JSON text of the broadcasts, not in the rates

  LinkStats() = default;
  LinkStats(int n_radars, std::int64_t period_us);

  std::int64_t total_bits() const;
  /// Sent payload bits per second: bits * 1e6 / (epochs * period_us).
  Rational rate(int radar) const;
  Rational total_rate() const;
};

/// Charges one broadcast to its sender.
LinkStats account(LinkStats stats, const Message& msg);
/// Records one delivered copy on the (sender, receiver) link.
LinkStats account_delivery(LinkStats stats, const Message& msg, int receiver);
/// Adds the JSON text size of a broadcast to wire_bytes.
LinkStats account_wire(LinkStats stats, const Message& msg);

}  // namespace radfed
