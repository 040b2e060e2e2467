#include "mpgdrive/policy_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "mpgdrive/errors.hpp"

namespace mpgdrive {

using nlohmann::json;

void ObservationSpec::validate() const {
  if (n_agents < 1) throw ConfigError("observation: n_agents must be at least 1");
  if (!(position_scale > 0.0 && speed_scale > 0.0 && max_distance > 0.0)) {
    throw ConfigError("observation: scales must be positive");
  }
}

ObservationResult build_observation(const GlobalState& state, int agent, const ObservationSpec& spec) {
  if (agent < 0 || agent >= state.size()) throw StructureError("build_observation: agent index out of range");
  if (agent >= spec.n_agents) throw StructureError("build_observation: agent index exceeds one-hot width");
  const VehicleState& me = state.vehicles[agent];
  const double px = 1.0 / spec.position_scale;
  const double pv = 1.0 / spec.speed_scale;

  ObservationResult out;
  Observation& o = out.raw;
  auto& sens = out.sensitivities;
  o.dist_to_conflict = me.x - spec.conflict_x;
  o.speed = me.v;
  sens.push_back({0, agent, false, px});
  sens.push_back({1, agent, true, pv});

  const NeighborPair nb = find_neighbors(state, agent, spec.scope);
  o.leader_dist = o.follower_dist = spec.max_distance;
  if (nb.leader) {
    const VehicleState& l = state.vehicles[*nb.leader];
    o.leader_flag = true;
    o.leader_rel_speed = l.v - me.v;
    sens.push_back({3, *nb.leader, true, pv});
    sens.push_back({3, agent, true, -pv});
    const double d = l.x - me.x;
    if (d < spec.max_distance) {
      o.leader_dist = d;
      sens.push_back({2, *nb.leader, false, px});
      sens.push_back({2, agent, false, -px});
    }
  }
  if (nb.follower) {
    const VehicleState& f = state.vehicles[*nb.follower];
    o.follower_flag = true;
    o.follower_rel_speed = f.v - me.v;
    sens.push_back({6, *nb.follower, true, pv});
    sens.push_back({6, agent, true, -pv});
    const double d = me.x - f.x;
    if (d < spec.max_distance) {
      o.follower_dist = d;
      sens.push_back({5, agent, false, px});
      sens.push_back({5, *nb.follower, false, -px});
    }
  }
  o.lane_flag = state.lanes[agent] == Lane::kRamp;
  o.agent_onehot.assign(spec.n_agents, 0.0);
  o.agent_onehot[agent] = 1.0;

  Eigen::VectorXd& f = out.features;
  f.setZero(spec.size());
  f(0) = o.dist_to_conflict * px;
  f(1) = o.speed * pv;
  f(2) = o.leader_dist * px;
  f(3) = o.leader_rel_speed * pv;
  f(4) = o.leader_flag ? 1.0 : 0.0;
  f(5) = o.follower_dist * px;
  f(6) = o.follower_rel_speed * pv;
  f(7) = o.follower_flag ? 1.0 : 0.0;
  f(8) = o.lane_flag ? 1.0 : 0.0;
  f(kObservationFeatures + agent) = 1.0;
  return out;
}

void observation_backward(const ObservationResult& obs, const Eigen::Ref<const Eigen::VectorXd>& grad_features,
                          std::span<double> grad_x, std::span<double> grad_v) {
  for (const FeatureSensitivity& s : obs.sensitivities) {
    const double g = grad_features(s.feature) * s.coeff;
    if (s.wrt_speed) {
      grad_v[s.vehicle] += g;
    } else {
      grad_x[s.vehicle] += g;
    }
  }
}

int NetworkShape::parameter_count() const {
  return hidden1 * inputs + hidden1 + hidden2 * hidden1 + hidden2 + hidden2 + 1;
}

void NetworkShape::validate() const {
  if (inputs < 1 || hidden1 < 1 || hidden2 < 1) throw StructureError("network: layer sizes must be positive");
  if (!(negative_slope >= 0.0 && negative_slope < 1.0)) throw StructureError("network: negative slope must lie in [0, 1)");
  if (!(output_scale > 0.0)) throw StructureError("network: output scale must be positive");
}

PolicyNetwork::PolicyNetwork(const NetworkShape& shape)
    : shape_(shape), params_(Eigen::VectorXd::Zero(shape.parameter_count())) {
  shape_.validate();
}

PolicyNetwork::PolicyNetwork(const NetworkShape& shape, Eigen::VectorXd params)
    : shape_(shape), params_(std::move(params)) {
  shape_.validate();
  if (params_.size() != shape_.parameter_count()) {
    throw StructureError("network: parameter vector has " + std::to_string(params_.size()) + " entries, expected " +
                         std::to_string(shape_.parameter_count()));
  }
  if (!params_.allFinite()) throw StructureError("network: non-finite parameters");
}

PolicyNetwork PolicyNetwork::initialize(const NetworkShape& shape, std::uint64_t seed) {
  PolicyNetwork net(shape);
  std::mt19937_64 rng(seed);
  const Offsets off = net.offsets();
  auto fill = [&](Eigen::Index begin, int fan_in, int fan_out, double gain) {
    const double limit = gain * std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(fan_in) * fan_out; ++k) net.params_(begin + k) = uni(rng);
  };
  fill(off.w1, shape.inputs, shape.hidden1, 1.0);
  fill(off.w2, shape.hidden1, shape.hidden2, 1.0);
  fill(off.w3, shape.hidden2, 1, 0.1);
  return net;
}

PolicyNetwork::Offsets PolicyNetwork::offsets() const {
  Offsets o{};
  o.w1 = 0;
  o.b1 = o.w1 + static_cast<Eigen::Index>(shape_.hidden1) * shape_.inputs;
  o.w2 = o.b1 + shape_.hidden1;
  o.b2 = o.w2 + static_cast<Eigen::Index>(shape_.hidden2) * shape_.hidden1;
  o.w3 = o.b2 + shape_.hidden2;
  o.b3 = o.w3 + shape_.hidden2;
  return o;
}

double PolicyNetwork::forward(const Eigen::VectorXd& obs) const {
  const Eigen::MatrixXd col = obs;
  return forward(col)(0);
}

Eigen::RowVectorXd PolicyNetwork::forward(const Eigen::MatrixXd& obs, ForwardCache* cache) const {
  if (obs.rows() != shape_.inputs) {
    throw StructureError("network: observation has " + std::to_string(obs.rows()) + " features, expected " +
                         std::to_string(shape_.inputs));
  }
  const Offsets off = offsets();
  const double* p = params_.data();
  ConstMap w1(p + off.w1, shape_.hidden1, shape_.inputs);
  Eigen::Map<const Eigen::VectorXd> b1(p + off.b1, shape_.hidden1);
  ConstMap w2(p + off.w2, shape_.hidden2, shape_.hidden1);
  Eigen::Map<const Eigen::VectorXd> b2(p + off.b2, shape_.hidden2);
  Eigen::Map<const Eigen::RowVectorXd> w3(p + off.w3, shape_.hidden2);
  const double b3 = p[off.b3];
  const double slope = shape_.negative_slope;
  auto lrelu = [slope](double z) { return z > 0.0 ? z : slope * z; };

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.input = obs;
  c.z1 = (w1 * obs).colwise() + b1;
  c.h1 = c.z1.unaryExpr(lrelu);
  c.z2 = (w2 * c.h1).colwise() + b2;
  c.h2 = c.z2.unaryExpr(lrelu);
  c.z3 = (w3 * c.h2).array() + b3;
  return shape_.output_scale * c.z3.array().tanh();
}

void PolicyNetwork::backward(const ForwardCache& c, const Eigen::RowVectorXd& upstream, Eigen::VectorXd& grad_params,
                             Eigen::MatrixXd* grad_obs) const {
  if (grad_params.size() != params_.size()) grad_params.setZero(params_.size());
  const Offsets off = offsets();
  const double* p = params_.data();
  ConstMap w1(p + off.w1, shape_.hidden1, shape_.inputs);
  ConstMap w2(p + off.w2, shape_.hidden2, shape_.hidden1);
  Eigen::Map<const Eigen::RowVectorXd> w3(p + off.w3, shape_.hidden2);
  const double slope = shape_.negative_slope;
  auto dlrelu = [slope](double z) { return z > 0.0 ? 1.0 : slope; };

  double* g = grad_params.data();
  const Eigen::RowVectorXd th = c.z3.array().tanh();
  const Eigen::RowVectorXd d3 = (upstream.array() * shape_.output_scale * (1.0 - th.array().square())).matrix();
  g[off.b3] += d3.sum();
  Eigen::Map<Eigen::RowVectorXd>(g + off.w3, shape_.hidden2) += d3 * c.h2.transpose();
  const Eigen::MatrixXd d2 = ((w3.transpose() * d3).array() * c.z2.unaryExpr(dlrelu).array()).matrix();
  Eigen::Map<Eigen::VectorXd>(g + off.b2, shape_.hidden2) += d2.rowwise().sum();
  Map(g + off.w2, shape_.hidden2, shape_.hidden1) += d2 * c.h1.transpose();
  const Eigen::MatrixXd d1 = ((w2.transpose() * d2).array() * c.z1.unaryExpr(dlrelu).array()).matrix();
  Eigen::Map<Eigen::VectorXd>(g + off.b1, shape_.hidden1) += d1.rowwise().sum();
  Map(g + off.w1, shape_.hidden1, shape_.inputs) += d1 * c.input.transpose();
  if (grad_obs) *grad_obs = w1.transpose() * d1;
}

ProjectedAction project_to_feasible(double u, const AccelInterval& interval) {
  ProjectedAction out;
  if (interval.fallback) {
    out.value = interval.lo;
    out.pass_through = 0.0;
    out.side = ProjectedAction::Side::kLower;
  } else if (u < interval.lo) {
    out.value = interval.lo;
    out.pass_through = 0.0;
    out.side = ProjectedAction::Side::kLower;
  } else if (u > interval.hi) {
    out.value = interval.hi;
    out.pass_through = 0.0;
    out.side = ProjectedAction::Side::kUpper;
  } else {
    out.value = u;
  }
  return out;
}

namespace {

const char* scope_name(NeighborScope s) { return s == NeighborScope::kCorridor ? "corridor" : "same_lane"; }

NeighborScope parse_scope(const std::string& s) {
  if (s == "corridor") return NeighborScope::kCorridor;
  if (s == "same_lane") return NeighborScope::kSameLane;
  throw FormatError("policy file: unknown neighbour scope '" + s + "'");
}

}  // namespace

void write_policy_bundle(std::ostream& os, const PolicyBundle& bundle) {
  if (bundle.members.size() != bundle.seeds.size()) throw StructureError("policy bundle: one seed per member required");
  json j;
  j["format"] = "mpgdrive-policy";
  j["version"] = 1;
  const ObservationSpec& o = bundle.observation;
  j["observation"] = {{"n_agents", o.n_agents},         {"conflict_x", o.conflict_x},
                      {"position_scale", o.position_scale}, {"speed_scale", o.speed_scale},
                      {"max_distance", o.max_distance},   {"scope", scope_name(o.scope)}};
  json members = json::array();
  for (std::size_t k = 0; k < bundle.members.size(); ++k) {
    const PolicyNetwork& net = bundle.members[k];
    const NetworkShape& s = net.shape();
    json m;
    m["seed"] = bundle.seeds[k];
    m["layers"] = {s.inputs, s.hidden1, s.hidden2, 1};
    m["negative_slope"] = s.negative_slope;
    m["output_scale"] = s.output_scale;
    m["params"] = std::vector<double>(net.params().data(), net.params().data() + net.params().size());
    members.push_back(std::move(m));
  }
  j["members"] = std::move(members);
  os << j.dump() << '\n';
}

PolicyBundle read_policy_bundle(std::istream& is) {
  PolicyBundle b;
  try {
    const json j = json::parse(is);
    if (j.at("format") != "mpgdrive-policy") throw FormatError("policy file: wrong format tag");
    if (j.at("version") != 1) throw FormatError("policy file: unsupported version");
    const json& o = j.at("observation");
    b.observation.n_agents = o.at("n_agents").get<int>();
    b.observation.conflict_x = o.at("conflict_x").get<double>();
    b.observation.position_scale = o.at("position_scale").get<double>();
    b.observation.speed_scale = o.at("speed_scale").get<double>();
    b.observation.max_distance = o.at("max_distance").get<double>();
    b.observation.scope = parse_scope(o.at("scope").get<std::string>());
    for (const json& m : j.at("members")) {
      const auto layers = m.at("layers").get<std::vector<int>>();
      if (layers.size() != 4 || layers[3] != 1) throw FormatError("policy file: expected layers [in, h1, h2, 1]");
      NetworkShape s{layers[0], layers[1], layers[2], m.at("negative_slope").get<double>(),
                     m.at("output_scale").get<double>()};
      const auto p = m.at("params").get<std::vector<double>>();
      b.seeds.push_back(m.at("seed").get<std::uint64_t>());
      b.members.emplace_back(s, Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("policy file: ") + e.what());
  } catch (const StructureError& e) {
    throw FormatError(std::string("policy file: ") + e.what());
  }
  if (b.members.empty()) throw FormatError("policy file: no members");
  if (b.members.front().shape().inputs != b.observation.size()) {
    throw FormatError("policy file: network input width does not match the observation layout");
  }
  return b;
}

void save_policy_bundle(const std::string& path, const PolicyBundle& bundle) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open '" + path + "' for writing");
  write_policy_bundle(os, bundle);
}

PolicyBundle load_policy_bundle(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open '" + path + "'");
  return read_policy_bundle(is);
}

}  // namespace mpgdrive
