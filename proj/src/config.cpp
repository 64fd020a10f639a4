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

#include "radfed/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace radfed {
namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

// Reads keys from one JSON object and complains about any it did not read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  const json* get(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) out = as<T>(*v, where(key));
  }

  void read_vec3(const std::string& key, Vec3& out) {
    if (const json* v = get(key)) out = to_vec3(*v, where(key));
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }
  }

  template <typename T>
  static T as(const json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
      }
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

  static Vec3 to_vec3(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) throw ConfigError(where + ": expected [x, y, z]");
    return {as<double>(v[0], where), as<double>(v[1], where), as<double>(v[2], where)};
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(Section& s, RadarModel& m) {
  if (const json* v = s.get("fov_deg")) m.fov_azimuth = Section::as<double>(*v, s.where("fov_deg")) * kDeg;
  s.read("max_range", m.max_range);
  s.read("range_resolution", m.range_resolution);
  if (const json* v = s.get("azimuth_resolution_deg")) {
    m.azimuth_resolution = Section::as<double>(*v, s.where("azimuth_resolution_deg")) * kDeg;
  }
  s.read("range_noise", m.range_noise);
  if (const json* v = s.get("azimuth_noise_deg")) {
    m.azimuth_noise = Section::as<double>(*v, s.where("azimuth_noise_deg")) * kDeg;
  }
  s.read("height_noise", m.height_noise);
  if (const json* v = s.get("azimuth_error_deg")) {
    m.azimuth_error = Section::as<double>(*v, s.where("azimuth_error_deg")) * kDeg;
  }
  s.read("self_occlusion", m.self_occlusion);
  s.read("outlier_rate", m.outlier_rate);
  s.read("detection_range_ref", m.detection_range_ref);
  s.read("occlusion_width", m.occlusion_width);
  s.read("occlusion_attenuation", m.occlusion_attenuation);
  if (const json* v = s.get("outlier_z")) {
    if (!v->is_array() || v->size() != 2) throw ConfigError(s.where("outlier_z") + ": expected [min, max]");
    m.outlier_z_min = Section::as<double>((*v)[0], s.where("outlier_z"));
    m.outlier_z_max = Section::as<double>((*v)[1], s.where("outlier_z"));
  }
}

json model_json(const RadarModel& m) {
  return json{{"fov_deg", m.fov_azimuth / kDeg},
              {"max_range", m.max_range},
              {"range_resolution", m.range_resolution},
              {"azimuth_resolution_deg", m.azimuth_resolution / kDeg},
              {"range_noise", m.range_noise},
              {"azimuth_noise_deg", m.azimuth_noise / kDeg},
              {"height_noise", m.height_noise},
              {"azimuth_error_deg", m.azimuth_error / kDeg},
              {"self_occlusion", m.self_occlusion},
              {"outlier_rate", m.outlier_rate},
              {"detection_range_ref", m.detection_range_ref},
              {"occlusion_width", m.occlusion_width},
              {"occlusion_attenuation", m.occlusion_attenuation},
              {"outlier_z", {m.outlier_z_min, m.outlier_z_max}}};
}

}  // namespace

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Isolated: return "isolated";
    case Mode::Cooperation: return "cooperation";
    case Mode::Federation: return "federation";
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  if (text == "isolated" || text == "iso") return Mode::Isolated;
  if (text == "cooperation" || text == "coop") return Mode::Cooperation;
  if (text == "federation" || text == "fed") return Mode::Federation;
  throw ConfigError("unknown mode '" + std::string(text) +
                    "' (expected isolated, cooperation or federation)");
}

ClockModel ExperimentConfig::clock() const {
  ClockModel c;
  c.offsets = clock_offsets;
  c.jitter_std = clock_jitter;
  c.period = dt;
  return c;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.name = "default";
  c.landmarks = {{"C", {2.5, 3.0}}, {"D", {3.3, 4.5}}, {"E", {3.7, 5.5}},
                 {"I", {5.5, 3.0}}, {"M", {4.8, 4.5}}, {"G", {4.4, 5.6}}};
  TargetSpec t1;
  t1.id = 1;
  t1.waypoints = {"C", "D", "E"};
  t1.speed = 0.3;
  TargetSpec t2 = t1;
  t2.id = 2;
  t2.waypoints = {"I", "M", "G"};
  c.targets = {t1, t2};

  RadarConfig r1;
  r1.pose.position = Vec3(4.0, 0.0, 1.0);
  r1.pose.yaw = std::numbers::pi / 2.0;
  RadarConfig r2;
  r2.pose.position = Vec3(0.0, 4.0, 1.0);
  r2.pose.yaw = 0.0;
  RadarConfig r3;
  r3.pose.position = Vec3(8.0, 4.0, 1.0);
  r3.pose.yaw = std::numbers::pi;
  c.radars = {r1, r2, r3};
  c.topology = Topology::fully_connected(3);
  c.dbscan_eps = 0.15;
  c.sigma_floor = r1.model.range_resolution;
  return c;
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  if (!(c.dt > 0.0)) fail("dt must be positive");
  if (c.n_epochs < 0) fail("epochs must be >= 0");
  if (c.radars.empty()) fail("need at least one radar");
  if (c.topology.n_radars() != static_cast<int>(c.radars.size())) {
    fail("topology radar count does not match the radar list");
  }
  if (!c.grid.valid()) fail("grid must have a positive resolution and extent");
  if (!(c.tau > 0.0 && c.tau < 1.0)) fail("tau must lie in (0, 1)");
  if (!(c.min_separation >= 0.0)) fail("min_separation must be >= 0");
  if (!(c.dbscan_eps > 0.0)) fail("dbscan eps must be positive");
  if (c.dbscan_min_pts < 1) fail("dbscan min_pts must be >= 1");
  if (c.fusion.m_max < 1) fail("m_max must be >= 1");
  if (c.fusion.em.max_iters < 0) fail("em_max_iters must be >= 0");
  if (!(c.fusion.em.tol >= 0.0)) fail("em_tol must be >= 0");
  if (!(c.fusion.em.cov_floor > 0.0)) fail("cov_floor must be positive");
  if (!(c.fusion.prior_floor >= 0.0)) fail("prior_floor must be >= 0");
  if (!(c.motion_speed >= 0.0)) fail("motion_speed must be >= 0");
  if (!(c.sigma_floor >= 0.0)) fail("sigma_floor must be >= 0");
  if (!(c.motion_speed * c.dt + c.sigma_floor > 0.0)) fail("prior spread must be positive");
  if (!(c.clock_jitter >= 0.0)) fail("clock jitter must be >= 0");
  if (c.clock_offsets.size() > c.radars.size()) fail("more clock offsets than radars");
  for (double o : c.clock_offsets) {
    if (!std::isfinite(o)) fail("clock offsets must be finite");
  }
  if (c.reference_radar < 0 || c.reference_radar >= static_cast<int>(c.radars.size())) {
    fail("reference_radar out of range");
  }
  if (c.grid_dump_every < 0) fail("grid_dump_every must be >= 0");

  std::set<std::string> labels;
  for (const auto& l : c.landmarks) {
    if (!labels.insert(l.label).second) fail("duplicate landmark '" + l.label + "'");
  }
  std::set<int> ids;
  for (const auto& t : c.targets) {
    if (!ids.insert(t.id).second) fail("duplicate target id " + std::to_string(t.id));
    if (t.waypoints.empty()) fail("target " + std::to_string(t.id) + " has no path");
    for (const auto& w : t.waypoints) {
      if (!labels.count(w)) fail("target " + std::to_string(t.id) + ": unknown landmark '" + w + "'");
    }
    if (!(t.speed >= 0.0)) fail("target speed must be >= 0");
    if (!(t.points_per_frame >= 0.0)) fail("points_per_frame must be >= 0");
    if (!(t.body_extent.minCoeff() >= 0.0)) fail("body_extent must be >= 0");
  }
  for (const auto& r : c.radars) {
    const auto& m = r.model;
    if (!(m.fov_azimuth > 0.0 && m.fov_azimuth <= std::numbers::pi)) fail("fov must lie in (0, 180] deg");
    if (!(m.max_range > 0.0)) fail("max_range must be positive");
    if (!(m.range_resolution > 0.0)) fail("range_resolution must be positive");
    if (!(m.range_noise >= 0.0 && m.azimuth_noise >= 0.0 && m.height_noise >= 0.0 &&
          m.azimuth_error >= 0.0)) {
      fail("noise must be >= 0");
    }
    if (!(m.self_occlusion >= 0.0 && m.self_occlusion <= 1.0)) fail("self_occlusion must lie in [0, 1]");
    if (!(m.outlier_rate >= 0.0)) fail("outlier_rate must be >= 0");
    if (!(m.detection_range_ref > 0.0)) fail("detection_range_ref must be positive");
    if (!(m.occlusion_attenuation >= 0.0 && m.occlusion_attenuation <= 1.0)) {
      fail("occlusion_attenuation must lie in [0, 1]");
    }
    if (!(m.outlier_z_max >= m.outlier_z_min)) fail("outlier_z must be [min, max]");
  }
}

ExperimentConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: not valid JSON: ") + e.what());
  }
  ExperimentConfig c = default_config();
  Section top(root, "config");
  top.read("name", c.name);
  if (const json* v = top.get("mode")) c.mode = parse_mode(Section::as<std::string>(*v, "config.mode"));
  top.read("seed", c.seed);
  top.read("epochs", c.n_epochs);
  top.read("dt", c.dt);

  if (const json* g = top.get("grid")) {
    Section s(*g, "config.grid");
    double x_min = c.grid.x_min, y_min = c.grid.y_min, x_max = c.grid.x_max(),
           y_max = c.grid.y_max(), res = c.grid.resolution;
    s.read("x_min", x_min);
    s.read("y_min", y_min);
    s.read("x_max", x_max);
    s.read("y_max", y_max);
    s.read("resolution", res);
    s.finish();
    c.grid = GridSpec::from_extent(x_min, y_min, x_max, y_max, res);
  }

  if (const json* l = top.get("landmarks")) {
    if (!l->is_object()) throw ConfigError("config.landmarks: expected {label: [x, y]}");
    c.landmarks.clear();
    for (auto it = l->begin(); it != l->end(); ++it) {
      const std::string where = "config.landmarks." + it.key();
      if (!it->is_array() || it->size() != 2) throw ConfigError(where + ": expected [x, y]");
      c.landmarks.push_back({it.key(), Vec2(Section::as<double>((*it)[0], where),
                                            Section::as<double>((*it)[1], where))});
    }
  }

  if (const json* ts = top.get("targets")) {
    if (!ts->is_array()) throw ConfigError("config.targets: expected an array");
    c.targets.clear();
    for (std::size_t i = 0; i < ts->size(); ++i) {
      Section s((*ts)[i], "config.targets[" + std::to_string(i) + "]");
      TargetSpec t;
      t.id = static_cast<int>(i) + 1;
      t.speed = 0.3;
      s.read("id", t.id);
      s.read("path", t.waypoints);
      s.read("speed", t.speed);
      s.read("points_per_frame", t.points_per_frame);
      s.read_vec3("body_extent", t.body_extent);
      s.read("center_height", t.center_height);
      s.finish();
      c.targets.push_back(t);
    }
  }

  RadarModel defaults;
  if (const json* d = top.get("radar_defaults")) {
    Section s(*d, "config.radar_defaults");
    read_model(s, defaults);
    s.finish();
    for (auto& r : c.radars) r.model = defaults;
  }
  if (const json* rs = top.get("radars")) {
    if (!rs->is_array()) throw ConfigError("config.radars: expected an array");
    c.radars.clear();
    for (std::size_t i = 0; i < rs->size(); ++i) {
      Section s((*rs)[i], "config.radars[" + std::to_string(i) + "]");
      RadarConfig r;
      r.model = defaults;
      s.read_vec3("position", r.pose.position);
      if (const json* v = s.get("yaw_deg")) {
        r.pose.yaw = normalize_angle(Section::as<double>(*v, s.where("yaw_deg")) * kDeg);
      }
      read_model(s, r.model);
      s.finish();
      c.radars.push_back(r);
    }
  }

  const int n_radars = static_cast<int>(c.radars.size());
  c.topology = Topology::fully_connected(std::max(n_radars, 1));
  if (const json* t = top.get("topology")) {
    if (t->is_string()) {
      const auto kind = t->get<std::string>();
      if (kind == "full") {
        c.topology = Topology::fully_connected(n_radars);
      } else if (kind == "none") {
        c.topology = Topology::disconnected(n_radars);
      } else {
        throw ConfigError("config.topology: expected \"full\", \"none\" or [[from, to], ...]");
      }
    } else if (t->is_array()) {
      std::vector<std::pair<int, int>> edges;
      for (const auto& e : *t) {
        if (!e.is_array() || e.size() != 2) throw ConfigError("config.topology: edges are [from, to]");
        edges.emplace_back(Section::as<int>(e[0], "config.topology"),
                           Section::as<int>(e[1], "config.topology"));
      }
      c.topology = Topology(n_radars, std::move(edges));
    } else {
      throw ConfigError("config.topology: expected a string or an edge list");
    }
  }

  if (const json* sl = top.get("sidelink")) {
    Section s(*sl, "config.sidelink");
    s.read("clock_offsets", c.clock_offsets);
    s.read("jitter", c.clock_jitter);
    s.finish();
  }

  if (const json* d = top.get("dbscan")) {
    Section s(*d, "config.dbscan");
    s.read("eps", c.dbscan_eps);
    s.read("min_pts", c.dbscan_min_pts);
    s.finish();
  }

  if (const json* f = top.get("fusion")) {
    Section s(*f, "config.fusion");
    s.read("tau", c.tau);
    s.read("min_separation", c.min_separation);
    s.read("m_max", c.fusion.m_max);
    s.read("em_max_iters", c.fusion.em.max_iters);
    s.read("em_tol", c.fusion.em.tol);
    s.read("cov_floor", c.fusion.em.cov_floor);
    s.read("prior_floor", c.fusion.prior_floor);
    s.read("motion_speed", c.motion_speed);
    s.read("sigma_floor", c.sigma_floor);
    s.finish();
  }

  if (const json* o = top.get("output")) {
    Section s(*o, "config.output");
    s.read("compute_kl", c.compute_kl);
    s.read("reference_radar", c.reference_radar);
    s.read("grid_dump_every", c.grid_dump_every);
    s.read("replay_log", c.replay_log);
    s.finish();
  }
  top.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_json_text(const ExperimentConfig& c) {
  json root;
  root["name"] = c.name;
  root["mode"] = to_string(c.mode);
  root["seed"] = c.seed;
  root["epochs"] = c.n_epochs;
  root["dt"] = c.dt;
  root["grid"] = {{"x_min", c.grid.x_min},
                  {"y_min", c.grid.y_min},
                  {"x_max", c.grid.x_max()},
                  {"y_max", c.grid.y_max()},
                  {"resolution", c.grid.resolution}};
  json landmarks = json::object();
  for (const auto& l : c.landmarks) landmarks[l.label] = {l.position.x(), l.position.y()};
  root["landmarks"] = landmarks;
  json targets = json::array();
  for (const auto& t : c.targets) {
    targets.push_back({{"id", t.id},
                       {"path", t.waypoints},
                       {"speed", t.speed},
                       {"points_per_frame", t.points_per_frame},
                       {"body_extent", {t.body_extent.x(), t.body_extent.y(), t.body_extent.z()}},
                       {"center_height", t.center_height}});
  }
  root["targets"] = targets;
  json radars = json::array();
  for (const auto& r : c.radars) {
    json j = model_json(r.model);
    j["position"] = {r.pose.position.x(), r.pose.position.y(), r.pose.position.z()};
    j["yaw_deg"] = r.pose.yaw / kDeg;
    radars.push_back(j);
  }
  root["radars"] = radars;
  json edges = json::array();
  for (const auto& [h, k] : c.topology.edges()) edges.push_back({h, k});
  root["topology"] = edges;
  root["sidelink"] = {{"clock_offsets", c.clock_offsets}, {"jitter", c.clock_jitter}};
  root["dbscan"] = {{"eps", c.dbscan_eps}, {"min_pts", c.dbscan_min_pts}};
  root["fusion"] = {{"tau", c.tau},
                    {"min_separation", c.min_separation},
                    {"m_max", c.fusion.m_max},
                    {"em_max_iters", c.fusion.em.max_iters},
                    {"em_tol", c.fusion.em.tol},
                    {"cov_floor", c.fusion.em.cov_floor},
                    {"prior_floor", c.fusion.prior_floor},
                    {"motion_speed", c.motion_speed},
                    {"sigma_floor", c.sigma_floor}};
  root["output"] = {{"compute_kl", c.compute_kl},
                    {"reference_radar", c.reference_radar},
                    {"grid_dump_every", c.grid_dump_every},
                    {"replay_log", c.replay_log}};
  return root.dump(2);
}

}  // namespace radfed
