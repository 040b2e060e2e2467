#include "mpgdrive/experiment_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "mpgdrive/errors.hpp"

namespace mpgdrive {

using nlohmann::json;

const char* policy_kind_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kNetwork: return "network";
    case PolicyKind::kIdm: return "idm";
    case PolicyKind::kConstant: return "constant";
    case PolicyKind::kReplay: return "replay";
  }
  return "?";
}

PolicyKind parse_policy_kind(const std::string& name) {
  for (PolicyKind k : {PolicyKind::kNetwork, PolicyKind::kIdm, PolicyKind::kConstant, PolicyKind::kReplay}) {
    if (name == policy_kind_name(k)) return k;
  }
  throw ConfigError("unknown policy kind '" + name + "' (network, idm, constant, replay)");
}

ingest::ReplayQuery ExperimentConfig::replay_query() const {
  ingest::ReplayQuery q;
  q.ramp_lane = ingest.ramp_lane;
  q.target_lane = ingest.target_lane;
  q.leaders = env.scenario.leaders;
  q.followers = env.scenario.followers;
  q.dt = env.scenario.dt;
  q.steps = env.scenario.steps();
  q.conflict_x = ingest.conflict_x;
  q.road = env.scenario.road;
  return q;
}

void ExperimentConfig::validate() const {
  env.validate();
  trainer.validate();
  if (evaluation.scenarios < 0) throw ConfigError("evaluation: scenario count must be non-negative");
  if (evaluation.ego == PolicyKind::kReplay) throw ConfigError("evaluation: the ego cannot be replayed");
  const auto& sm = ingest.smoothing;
  if (sm.window < 1 || sm.window % 2 == 0 || sm.order < 0 || sm.order >= sm.window) {
    throw ConfigError("ingest: window must be odd and larger than the order");
  }
  for (std::size_t k = 1; k < sm.lane_boundaries.size(); ++k) {
    if (!(sm.lane_boundaries[k] > sm.lane_boundaries[k - 1])) {
      throw ConfigError("ingest: lane boundaries must increase strictly");
    }
  }
  if (!(ingest.columns.frame_rate > 0.0)) throw ConfigError("ingest: frame rate must be positive");
}

json to_json(const ExperimentConfig& c) {
  const ScenarioConfig& s = c.env.scenario;
  const MergeRewardSpec& r = c.env.reward;
  const IdmParams& idm = c.env.idm;
  const TrainerConfig& t = c.trainer;
  const ingest::ColumnMap& col = c.ingest.columns;
  json doc;
  doc["scenario"] = {{"leaders", s.leaders},
                     {"followers", s.followers},
                     {"dt", s.dt},
                     {"horizon", s.horizon},
                     {"gamma", s.gamma},
                     {"ego_x", {s.ego_x.lo, s.ego_x.hi}},
                     {"speed", {s.speed.lo, s.speed.hi}},
                     {"slot_length", s.slot_length},
                     {"min_headway", s.min_headway},
                     {"min_ttc", s.min_ttc},
                     {"rejection_cap", s.rejection_cap},
                     {"conflict_x", s.road.conflict_x},
                     {"lane_width", s.road.lane_width},
                     {"target_y", s.road.target_y},
                     {"vehicle",
                      {{"l_f", s.vehicle.l_f},
                       {"l_r", s.vehicle.l_r},
                       {"length", s.vehicle.body_length},
                       {"width", s.vehicle.body_width}}}};
  doc["reward"] = {{"w_speed", r.w_speed},
                   {"w_comfort", r.w_comfort},
                   {"w_ttc", r.w_ttc},
                   {"w_conflict", r.w_conflict},
                   {"desired_speed", r.desired_speed},
                   {"rel_speed_threshold", r.rel_speed_threshold},
                   {"eps", r.eps},
                   {"tau_s", r.tau_s},
                   {"signed_arrival_time", r.signed_arrival_time}};
  doc["idm"] = {{"desired_speed", idm.desired_speed},     {"time_headway", idm.time_headway},
                {"min_gap", idm.min_gap},                 {"max_accel", idm.max_accel},
                {"comfortable_decel", idm.comfortable_decel}, {"exponent", idm.exponent}};
  doc["environment"] = {{"feasibility", c.env.feasibility}, {"ramp_feasibility", c.env.ramp_feasibility}};
  doc["network"] = {{"hidden1", t.hidden1}, {"hidden2", t.hidden2}, {"negative_slope", t.negative_slope}};
  doc["trainer"] = {{"epochs", t.epochs},
                    {"batch_size", t.batch_size},
                    {"fresh_batch", t.fresh_batch},
                    {"frozen_batch_size", t.frozen_batch_size},
                    {"probe_states", t.probe_states},
                    {"learning_rate", t.learning_rate},
                    {"lr_decay_epochs", t.lr_decay_epochs},
                    {"grad_clip", t.grad_clip},
                    {"scenario_clip", t.scenario_clip},
                    {"workers", t.workers},
                    {"record_wall_time", t.record_wall_time}};
  doc["evaluation"] = {{"scenarios", c.evaluation.scenarios},
                       {"scenario_seed", c.evaluation.scenario_seed},
                       {"ego", policy_kind_name(c.evaluation.ego)},
                       {"others", policy_kind_name(c.evaluation.others)}};
  doc["ingest"] = {{"columns",
                    {{"vehicle_id", col.vehicle_id},
                     {"frame", col.frame},
                     {"x", col.x},
                     {"y", col.y},
                     {"delimiter", std::string(1, col.delimiter)},
                     {"feet", col.feet},
                     {"frame_rate", col.frame_rate}}},
                   {"window", c.ingest.smoothing.window},
                   {"order", c.ingest.smoothing.order},
                   {"lane_boundaries", c.ingest.smoothing.lane_boundaries},
                   {"ramp_lane", c.ingest.ramp_lane},
                   {"target_lane", c.ingest.target_lane},
                   {"conflict_x", c.ingest.conflict_x}};
  doc["seeds"] = t.seeds;
  return doc;
}

namespace {

// Reads known keys from one JSON object and remembers which ones it saw.
class Section {
 public:
  Section(const json* node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (node_ && !node_->is_object()) {
      errors_.push_back(label() + ": expected an object");
      node_ = nullptr;
    }
  }

  ~Section() {
    if (!node_) return;
    for (const auto& [key, value] : node_->items()) {
      if (!used_.count(key)) errors_.push_back("unknown key " + join(key));
    }
  }

  Section child(const std::string& key) { return Section(find(key), join(key), errors_); }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (v->is_number()) out = v->get<double>();
      else wrong(key, "a number");
    }
  }
  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (v->is_number_integer()) out = v->get<int>();
      else wrong(key, "an integer");
    }
  }
  void get(const std::string& key, std::uint64_t& out) {
    if (const json* v = find(key)) {
      if (v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0)) out = v->get<std::uint64_t>();
      else wrong(key, "a non-negative integer");
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (v->is_boolean()) out = v->get<bool>();
      else wrong(key, "true or false");
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (v->is_string()) out = v->get<std::string>();
      else wrong(key, "a string");
    }
  }
  void get(const std::string& key, Range& out) {
    if (const json* v = find(key)) {
      if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
        out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
      } else {
        wrong(key, "[lo, hi]");
      }
    }
  }
  void get(const std::string& key, std::vector<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& e) { return e.is_number(); })) {
        wrong(key, "an array of numbers");
      } else {
        out = v->get<std::vector<double>>();
      }
    }
  }
  void get(const std::string& key, std::vector<std::uint64_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || !std::all_of(v->begin(), v->end(), [](const json& e) {
            return e.is_number_unsigned() || (e.is_number_integer() && e.get<long long>() >= 0);
          })) {
        wrong(key, "an array of non-negative integers");
      } else {
        out = v->get<std::vector<std::uint64_t>>();
      }
    }
  }
  void get(const std::string& key, PolicyKind& out) {
    std::string name;
    if (!find(key)) return;
    get(key, name);
    try {
      if (!name.empty()) out = parse_policy_kind(name);
    } catch (const ConfigError&) {
      wrong(key, "one of network, idm, constant, replay");
    }
  }
  void get(const std::string& key, char& out) {
    std::string s;
    if (!find(key)) return;
    get(key, s);
    if (s.size() == 1) out = s[0];
    else wrong(key, "a single character");
  }

 private:
  const json* find(const std::string& key) {
    if (!node_) return nullptr;
    const auto it = node_->find(key);
    if (it == node_->end()) return nullptr;
    used_.insert(key);
    return &*it;
  }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "config" : path_; }
  void wrong(const std::string& key, const char* what) { errors_.push_back(join(key) + ": expected " + what); }

  const json* node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> used_;
};

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  std::vector<std::string> errors;
  {
    Section root(&doc, "", errors);
    {
      ScenarioConfig& s = c.env.scenario;
      Section sec = root.child("scenario");
      sec.get("leaders", s.leaders);
      sec.get("followers", s.followers);
      sec.get("dt", s.dt);
      sec.get("horizon", s.horizon);
      sec.get("gamma", s.gamma);
      sec.get("ego_x", s.ego_x);
      sec.get("speed", s.speed);
      sec.get("slot_length", s.slot_length);
      sec.get("min_headway", s.min_headway);
      sec.get("min_ttc", s.min_ttc);
      sec.get("rejection_cap", s.rejection_cap);
      sec.get("conflict_x", s.road.conflict_x);
      sec.get("lane_width", s.road.lane_width);
      sec.get("target_y", s.road.target_y);
      Section veh = sec.child("vehicle");
      veh.get("l_f", s.vehicle.l_f);
      veh.get("l_r", s.vehicle.l_r);
      veh.get("length", s.vehicle.body_length);
      veh.get("width", s.vehicle.body_width);
    }
    {
      MergeRewardSpec& r = c.env.reward;
      Section sec = root.child("reward");
      sec.get("w_speed", r.w_speed);
      sec.get("w_comfort", r.w_comfort);
      sec.get("w_ttc", r.w_ttc);
      sec.get("w_conflict", r.w_conflict);
      sec.get("desired_speed", r.desired_speed);
      sec.get("rel_speed_threshold", r.rel_speed_threshold);
      sec.get("eps", r.eps);
      sec.get("tau_s", r.tau_s);
      sec.get("signed_arrival_time", r.signed_arrival_time);
    }
    {
      IdmParams& p = c.env.idm;
      Section sec = root.child("idm");
      sec.get("desired_speed", p.desired_speed);
      sec.get("time_headway", p.time_headway);
      sec.get("min_gap", p.min_gap);
      sec.get("max_accel", p.max_accel);
      sec.get("comfortable_decel", p.comfortable_decel);
      sec.get("exponent", p.exponent);
    }
    {
      Section sec = root.child("environment");
      sec.get("feasibility", c.env.feasibility);
      sec.get("ramp_feasibility", c.env.ramp_feasibility);
    }
    {
      Section sec = root.child("network");
      sec.get("hidden1", c.trainer.hidden1);
      sec.get("hidden2", c.trainer.hidden2);
      sec.get("negative_slope", c.trainer.negative_slope);
    }
    {
      TrainerConfig& t = c.trainer;
      Section sec = root.child("trainer");
      sec.get("epochs", t.epochs);
      sec.get("batch_size", t.batch_size);
      sec.get("fresh_batch", t.fresh_batch);
      sec.get("frozen_batch_size", t.frozen_batch_size);
      sec.get("probe_states", t.probe_states);
      sec.get("learning_rate", t.learning_rate);
      sec.get("lr_decay_epochs", t.lr_decay_epochs);
      sec.get("grad_clip", t.grad_clip);
      sec.get("scenario_clip", t.scenario_clip);
      sec.get("workers", t.workers);
      sec.get("record_wall_time", t.record_wall_time);
    }
    {
      Section sec = root.child("evaluation");
      sec.get("scenarios", c.evaluation.scenarios);
      sec.get("scenario_seed", c.evaluation.scenario_seed);
      sec.get("ego", c.evaluation.ego);
      sec.get("others", c.evaluation.others);
    }
    {
      IngestSettings& in = c.ingest;
      Section sec = root.child("ingest");
      Section col = sec.child("columns");
      col.get("vehicle_id", in.columns.vehicle_id);
      col.get("frame", in.columns.frame);
      col.get("x", in.columns.x);
      col.get("y", in.columns.y);
      col.get("delimiter", in.columns.delimiter);
      col.get("feet", in.columns.feet);
      col.get("frame_rate", in.columns.frame_rate);
      sec.get("window", in.smoothing.window);
      sec.get("order", in.smoothing.order);
      sec.get("lane_boundaries", in.smoothing.lane_boundaries);
      sec.get("ramp_lane", in.ramp_lane);
      sec.get("target_lane", in.target_lane);
      sec.get("conflict_x", in.conflict_x);
    }
    root.get("seeds", c.trainer.seeds);
  }
  c.env.reward.conflict_x = c.env.scenario.road.conflict_x;
  if (!errors.empty()) {
    std::ostringstream msg;
    msg << "invalid configuration:";
    for (const std::string& e : errors) msg << "\n  " << e;
    throw ConfigError(msg.str());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(doc);
}

}  // namespace mpgdrive
