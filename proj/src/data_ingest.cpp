#include "mpgdrive/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mpgdrive/errors.hpp"

namespace mpgdrive::ingest {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto keep = [](char c) { return c != ' ' && c != '\t' && c != '\r' && c != '"'; };
  auto b = std::find_if(s.begin(), s.end(), keep);
  auto e = std::find_if(s.rbegin(), s.rend(), keep).base();
  return b < e ? std::string(b, e) : std::string();
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  if (s.empty()) return false;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

int column_index(const std::vector<std::string>& header, const std::string& name) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw FormatError("trajectory file: missing column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

struct Row {
  std::int64_t frame;
  double x, y;
};

}  // namespace

ParseResult parse_trajectory_text(const std::string& text, const ColumnMap& columns) {
  if (!(columns.frame_rate > 0.0)) throw ConfigError("trajectory file: frame rate must be positive");
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split(line, columns.delimiter);
      break;
    }
  }
  if (header.empty()) throw FormatError("trajectory file: no header row");
  const int c_id = column_index(header, columns.vehicle_id);
  const int c_frame = column_index(header, columns.frame);
  const int c_x = column_index(header, columns.x);
  const int c_y = column_index(header, columns.y);
  const int needed = std::max({c_id, c_frame, c_x, c_y});
  const double unit = columns.feet ? kFeetToMeters : 1.0;

  ParseResult result;
  std::map<std::int64_t, std::vector<Row>> by_vehicle;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++result.rows;
    const std::vector<std::string> cells = split(line, columns.delimiter);
    std::int64_t id = 0, frame = 0;
    double x = 0.0, y = 0.0;
    if (static_cast<int>(cells.size()) <= needed || !parse_number(cells[c_id], id) ||
        !parse_number(cells[c_frame], frame) || !parse_number(cells[c_x], x) || !parse_number(cells[c_y], y) ||
        !std::isfinite(x) || !std::isfinite(y)) {
      ++result.malformed_rows;
      continue;
    }
    by_vehicle[id].push_back({frame, x * unit, y * unit});
  }

  for (auto& [id, rows] : by_vehicle) {
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.frame < b.frame; });
    RawTrack track;
    track.id = id;
    track.frame_rate = columns.frame_rate;
    for (const Row& r : rows) {
      if (!track.frames.empty() && track.frames.back() == r.frame) {
        ++result.duplicate_rows;
        continue;
      }
      track.frames.push_back(r.frame);
      track.x.push_back(r.x);
      track.y.push_back(r.y);
      track.t.push_back(static_cast<double>(r.frame) / columns.frame_rate);
    }
    result.tracks.push_back(std::move(track));
  }
  return result;
}

ParseResult parse_trajectory_file(const std::string& path, const ColumnMap& columns) {
  std::ifstream in(path);
  if (!in) throw FormatError("trajectory file: cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_trajectory_text(text.str(), columns);
}

std::vector<double> savitzky_golay_weights(int n, int order, int at) {
  if (order < 0 || n < order + 1) throw DomainError("savitzky_golay: need at least order + 1 samples");
  if (at < 0 || at >= n) throw DomainError("savitzky_golay: evaluation point outside the window");
  // Vandermonde in offsets from the evaluation point, so the fitted value is
  // the constant coefficient: row 0 of the pseudo-inverse.
  Eigen::MatrixXd a(n, order + 1);
  for (int r = 0; r < n; ++r) {
    double p = 1.0;
    for (int c = 0; c <= order; ++c) {
      a(r, c) = p;
      p *= static_cast<double>(r - at);
    }
  }
  const Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
  std::vector<double> w(n);
  for (int r = 0; r < n; ++r) w[r] = pinv(0, r);
  return w;
}

std::optional<std::vector<double>> savitzky_golay(const std::vector<double>& series, int window, int order) {
  if (window < 1 || window % 2 == 0) throw DomainError("savitzky_golay: window must be a positive odd count");
  if (order < 0 || order >= window) throw DomainError("savitzky_golay: order must be below the window");
  const int n = static_cast<int>(series.size());
  if (n < window) return std::nullopt;
  const int half = window / 2;
  const std::vector<double> centre = savitzky_golay_weights(window, order, half);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - half);
    int hi = std::min(n - 1, i + half);
    if (lo == i - half && hi == i + half) {
      double acc = 0.0;
      for (int k = 0; k < window; ++k) acc += centre[k] * series[lo + k];
      out[i] = acc;
      continue;
    }
    while (hi - lo < order) {
      if (lo > 0) --lo;
      if (hi - lo < order && hi < n - 1) ++hi;
    }
    const std::vector<double> w = savitzky_golay_weights(hi - lo + 1, order, i - lo);
    double acc = 0.0;
    for (int k = 0; k <= hi - lo; ++k) acc += w[k] * series[lo + k];
    out[i] = acc;
  }
  return out;
}

std::vector<double> differentiate(const std::vector<double>& positions, double dt) {
  if (!(dt > 0.0)) throw DomainError("differentiate: dt must be positive");
  const std::size_t n = positions.size();
  if (n < 2) throw DomainError("differentiate: need at least two samples");
  std::vector<double> v(n);
  v[0] = (positions[1] - positions[0]) / dt;
  v[n - 1] = (positions[n - 1] - positions[n - 2]) / dt;
  for (std::size_t i = 1; i + 1 < n; ++i) v[i] = (positions[i + 1] - positions[i - 1]) / (2.0 * dt);
  return v;
}

std::vector<int> reassign_lanes(const std::vector<double>& lateral, const std::vector<double>& boundaries) {
  for (std::size_t k = 1; k < boundaries.size(); ++k) {
    if (!(boundaries[k] > boundaries[k - 1])) throw DomainError("reassign_lanes: boundaries must increase strictly");
  }
  std::vector<int> lanes(lateral.size(), kOffRoad);
  if (boundaries.size() < 2) return lanes;
  for (std::size_t i = 0; i < lateral.size(); ++i) {
    const double y = lateral[i];
    if (y < boundaries.front() || y > boundaries.back()) continue;
    const auto it = std::lower_bound(boundaries.begin(), boundaries.end(), y);
    lanes[i] = std::max(0, static_cast<int>(it - boundaries.begin()) - 1);
  }
  return lanes;
}

ProcessResult process_tracks(const std::vector<RawTrack>& raw, const SmoothingConfig& config) {
  ProcessResult result;
  for (const RawTrack& r : raw) {
    auto xs = savitzky_golay(r.x, config.window, config.order);
    auto ys = savitzky_golay(r.y, config.window, config.order);
    if (!xs || !ys || r.size() < 2) {
      result.excluded.push_back(r.id);
      continue;
    }
    SmoothTrack s;
    s.id = r.id;
    s.frames = r.frames;
    s.t = r.t;
    s.x = std::move(*xs);
    s.y = std::move(*ys);
    const double dt = 1.0 / r.frame_rate;
    const std::vector<double> vx = differentiate(s.x, dt);
    const std::vector<double> vy = differentiate(s.y, dt);
    s.v.resize(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) s.v[i] = std::hypot(vx[i], vy[i]);
    s.lanes = reassign_lanes(s.y, config.lane_boundaries);
    result.tracks.push_back(std::move(s));
  }
  return result;
}

namespace {

struct Sample {
  double x, v;
  int lane;
};

// Linear interpolation in time; nullopt outside the recorded span.
std::optional<Sample> sample_at(const SmoothTrack& s, double t) {
  constexpr double kSlack = 1e-9;
  if (s.size() == 0 || t < s.t.front() - kSlack || t > s.t.back() + kSlack) return std::nullopt;
  auto it = std::upper_bound(s.t.begin(), s.t.end(), t);
  std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(it - s.t.begin()), s.size() - 1);
  std::size_t lo = hi > 0 ? hi - 1 : 0;
  if (s.t[hi] <= t + kSlack) lo = hi;
  const double span = s.t[hi] - s.t[lo];
  const double w = span > 0.0 ? std::clamp((t - s.t[lo]) / span, 0.0, 1.0) : 0.0;
  return Sample{s.x[lo] + w * (s.x[hi] - s.x[lo]), s.v[lo] + w * (s.v[hi] - s.v[lo]), s.lanes[lo]};
}

std::vector<VehicleState> resample(const SmoothTrack& s, double t0, const ReplayQuery& q, double y) {
  std::vector<VehicleState> out;
  for (int k = 0; k <= q.steps; ++k) {
    const auto p = sample_at(s, t0 + k * q.dt);
    if (!p) break;
    out.push_back({p->x, y, p->v, 0.0});
  }
  return out;
}

}  // namespace

ReplaySet build_replay_scenarios(const std::vector<SmoothTrack>& tracks, const ReplayQuery& query) {
  if (!(query.dt > 0.0) || query.steps < 1) throw ConfigError("replay query: dt and steps must be positive");
  if (query.leaders < 0 || query.followers < 0) throw ConfigError("replay query: negative neighbour count");
  const double ramp_y = query.road.target_y - query.road.lane_width;

  ReplaySet set;
  for (const SmoothTrack& ego : tracks) {
    if (ego.size() == 0 || ego.lanes.front() != query.ramp_lane) continue;
    if (ego.x.front() >= query.conflict_x) {
      set.skipped.push_back({ego.id, "starts at or beyond the conflict point"});
      continue;
    }
    const double t0 = ego.t.front();
    const double x0 = ego.x.front();
    std::vector<std::pair<double, const SmoothTrack*>> ahead, behind;
    for (const SmoothTrack& other : tracks) {
      if (other.id == ego.id) continue;
      const auto p = sample_at(other, t0);
      if (!p || p->lane != query.target_lane) continue;
      (p->x >= x0 ? ahead : behind).push_back({std::abs(p->x - x0), &other});
    }
    if (ahead.empty() && behind.empty()) {
      set.skipped.push_back({ego.id, "no target-lane vehicle at the start frame"});
      continue;
    }
    if (static_cast<int>(ahead.size()) < query.leaders || static_cast<int>(behind.size()) < query.followers) {
      std::ostringstream why;
      why << "found " << ahead.size() << " leaders and " << behind.size() << " followers, need " << query.leaders
          << " and " << query.followers;
      set.skipped.push_back({ego.id, why.str()});
      continue;
    }
    const auto by_distance = [](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && a.second->id < b.second->id);
    };
    std::sort(ahead.begin(), ahead.end(), by_distance);
    std::sort(behind.begin(), behind.end(), by_distance);

    ScenarioInstance inst;
    inst.id = static_cast<int>(set.scenarios.size());
    inst.initial.vehicles.push_back({x0, ramp_y, ego.v.front(), 0.0});
    inst.initial.lanes.push_back(Lane::kRamp);
    inst.replay.emplace_back();
    const auto add = [&](const SmoothTrack& s) {
      std::vector<VehicleState> rec = resample(s, t0, query, query.road.target_y);
      inst.initial.vehicles.push_back(rec.front());
      inst.initial.lanes.push_back(Lane::kTarget);
      inst.replay.push_back(std::move(rec));
    };
    for (int k = 0; k < query.leaders; ++k) add(*ahead[k].second);
    for (int k = 0; k < query.followers; ++k) add(*behind[k].second);

    std::vector<VehicleState> human;
    for (int k = 0; k <= query.steps; ++k) {
      const auto p = sample_at(ego, t0 + k * query.dt);
      if (!p) break;
      human.push_back({p->x, p->lane == query.target_lane ? query.road.target_y : ramp_y, p->v, 0.0});
    }
    set.scenarios.push_back(std::move(inst));
    set.ego_ids.push_back(ego.id);
    set.ego_recordings.push_back(std::move(human));
  }
  return set;
}

namespace {

json states_to_json(const std::vector<VehicleState>& states) {
  json out = json::array();
  for (const VehicleState& s : states) out.push_back({s.x, s.y, s.v, s.phi});
  return out;
}

std::vector<VehicleState> states_from_json(const json& j) {
  std::vector<VehicleState> out;
  for (const json& s : j) {
    if (!s.is_array() || s.size() != 4) throw FormatError("scenario file: a state is [x, y, v, phi]");
    out.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>(), s[3].get<double>()});
  }
  return out;
}

void write_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << doc.dump(1) << '\n';
}

json read_json(const std::string& path, const std::string& format) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != format || doc.value("version", 0) != 1) {
    throw FormatError(path + ": not a " + format + " version 1 file");
  }
  return doc;
}

}  // namespace

void save_tracks(const std::string& path, const std::vector<SmoothTrack>& tracks) {
  json list = json::array();
  for (const SmoothTrack& s : tracks) {
    list.push_back({{"id", s.id}, {"frames", s.frames}, {"t", s.t}, {"x", s.x}, {"y", s.y}, {"v", s.v},
                    {"lanes", s.lanes}});
  }
  write_json(path, {{"format", "mpgdrive-tracks"}, {"version", 1}, {"tracks", list}});
}

std::vector<SmoothTrack> load_tracks(const std::string& path) {
  const json doc = read_json(path, "mpgdrive-tracks");
  std::vector<SmoothTrack> out;
  try {
    for (const json& j : doc.at("tracks")) {
      SmoothTrack s;
      s.id = j.at("id").get<std::int64_t>();
      s.frames = j.at("frames").get<std::vector<std::int64_t>>();
      s.t = j.at("t").get<std::vector<double>>();
      s.x = j.at("x").get<std::vector<double>>();
      s.y = j.at("y").get<std::vector<double>>();
      s.v = j.at("v").get<std::vector<double>>();
      s.lanes = j.at("lanes").get<std::vector<int>>();
      const std::size_t n = s.frames.size();
      if (s.t.size() != n || s.x.size() != n || s.y.size() != n || s.v.size() != n || s.lanes.size() != n) {
        throw FormatError(path + ": track " + std::to_string(s.id) + " has ragged fields");
      }
      out.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return out;
}

void save_scenarios(const std::string& path, const ReplaySet& set) {
  json list = json::array();
  for (std::size_t m = 0; m < set.scenarios.size(); ++m) {
    const ScenarioInstance& inst = set.scenarios[m];
    json lanes = json::array();
    for (Lane l : inst.initial.lanes) lanes.push_back(l == Lane::kRamp ? "ramp" : "target");
    json replay = json::array();
    for (const auto& r : inst.replay) replay.push_back(states_to_json(r));
    json entry = {{"id", inst.id},
                  {"initial", states_to_json(inst.initial.vehicles)},
                  {"lanes", lanes},
                  {"replay", replay}};
    if (m < set.ego_ids.size()) entry["ego_id"] = set.ego_ids[m];
    if (m < set.ego_recordings.size()) entry["ego_recording"] = states_to_json(set.ego_recordings[m]);
    list.push_back(entry);
  }
  json skipped = json::array();
  for (const SkippedScenario& s : set.skipped) skipped.push_back({{"ego_id", s.ego_id}, {"reason", s.reason}});
  write_json(path, {{"format", "mpgdrive-scenarios"}, {"version", 1}, {"scenarios", list}, {"skipped", skipped}});
}

ReplaySet load_scenarios(const std::string& path) {
  const json doc = read_json(path, "mpgdrive-scenarios");
  ReplaySet set;
  try {
    for (const json& j : doc.at("scenarios")) {
      ScenarioInstance inst;
      inst.id = j.at("id").get<int>();
      inst.initial.vehicles = states_from_json(j.at("initial"));
      for (const json& l : j.at("lanes")) {
        const std::string name = l.get<std::string>();
        if (name != "ramp" && name != "target") throw FormatError(path + ": unknown lane '" + name + "'");
        inst.initial.lanes.push_back(name == "ramp" ? Lane::kRamp : Lane::kTarget);
      }
      for (const json& r : j.at("replay")) inst.replay.push_back(states_from_json(r));
      if (inst.initial.lanes.size() != inst.initial.vehicles.size() ||
          inst.replay.size() != inst.initial.vehicles.size()) {
        throw FormatError(path + ": scenario " + std::to_string(inst.id) + " has ragged vehicle lists");
      }
      set.ego_ids.push_back(j.value("ego_id", std::int64_t{-1}));
      set.ego_recordings.push_back(j.contains("ego_recording") ? states_from_json(j.at("ego_recording"))
                                                               : std::vector<VehicleState>{});
      set.scenarios.push_back(std::move(inst));
    }
    for (const json& s : doc.value("skipped", json::array())) {
      set.skipped.push_back({s.at("ego_id").get<std::int64_t>(), s.at("reason").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return set;
}

}  // namespace mpgdrive::ingest
