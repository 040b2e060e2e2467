#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mpgdrive/dynamics.hpp"
#include "mpgdrive/merge_world.hpp"

namespace mpgdrive {

inline constexpr int kObservationFeatures = 9;

struct ObservationSpec {
  int n_agents = 9;
  double conflict_x = 180.0;
  double position_scale = 200.0;
  double speed_scale = 30.0;
  /// Distance reported for an absent neighbour; also the cap on present ones.
  double max_distance = 200.0;
  NeighborScope scope = NeighborScope::kCorridor;

  int size() const { return kObservationFeatures + n_agents; }
  void validate() const;
};

/// Local observation in physical units.
struct Observation {
  double dist_to_conflict = 0.0;  // x_i - x_c
  double speed = 0.0;
  double leader_dist = 0.0;
  double leader_rel_speed = 0.0;  // v_leader - v_i
  bool leader_flag = false;
  double follower_dist = 0.0;
  double follower_rel_speed = 0.0;  // v_follower - v_i
  bool follower_flag = false;
  bool lane_flag = false;  // true on the ramp
  std::vector<double> agent_onehot;
};

/// One nonzero entry of d(feature)/d(vehicle state).
struct FeatureSensitivity {
  int feature;
  int vehicle;
  bool wrt_speed;  // false: position x
  double coeff;
};

struct ObservationResult {
  Observation raw;
  Eigen::VectorXd features;  // normalized network input
  std::vector<FeatureSensitivity> sensitivities;
};

ObservationResult build_observation(const GlobalState& state, int agent, const ObservationSpec& spec);

/// Accumulates d/d(x, v) of every vehicle from the gradient with respect to the normalized features.
void observation_backward(const ObservationResult& obs, const Eigen::Ref<const Eigen::VectorXd>& grad_features,
                          std::span<double> grad_x, std::span<double> grad_v);

struct NetworkShape {
  int inputs = 18;
  int hidden1 = 64;
  int hidden2 = 64;
  double negative_slope = 0.01;
  double output_scale = kGravity;

  int parameter_count() const;
  void validate() const;
  bool operator==(const NetworkShape&) const = default;
};

/// Intermediate values of a forward pass over a batch of observation columns.
struct ForwardCache {
  Eigen::MatrixXd input, z1, h1, z2, h2;
  Eigen::RowVectorXd z3;
};

/// Shared deterministic policy: inputs -> hidden1 -> hidden2 -> 1, Leaky ReLU
/// hidden activations and a scaled tanh output. All weights live in one flat vector.
class PolicyNetwork {
 public:
  PolicyNetwork() = default;
  explicit PolicyNetwork(const NetworkShape& shape);
  PolicyNetwork(const NetworkShape& shape, Eigen::VectorXd params);

  /// Glorot-uniform hidden layers, output layer scaled down so initial actions are small.
  static PolicyNetwork initialize(const NetworkShape& shape, std::uint64_t seed);

  const NetworkShape& shape() const { return shape_; }
  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  double forward(const Eigen::VectorXd& obs) const;
  /// Columns of `obs` are observations; returns one action per column.
  Eigen::RowVectorXd forward(const Eigen::MatrixXd& obs, ForwardCache* cache = nullptr) const;

  /// Adds d(sum_k upstream_k * u_k)/d(params) into grad_params and, if given,
  /// writes the gradient with respect to each observation column into grad_obs.
  void backward(const ForwardCache& cache, const Eigen::RowVectorXd& upstream, Eigen::VectorXd& grad_params,
                Eigen::MatrixXd* grad_obs = nullptr) const;

 private:
  using ConstMap = Eigen::Map<const Eigen::MatrixXd>;
  using Map = Eigen::Map<Eigen::MatrixXd>;
  struct Offsets {
    Eigen::Index w1, b1, w2, b2, w3, b3;
  };
  Offsets offsets() const;

  NetworkShape shape_;
  Eigen::VectorXd params_;
};

struct ProjectedAction {
  double value = 0.0;
  /// d(value)/d(raw): 1 inside the interval (boundary included), 0 when clamped.
  double pass_through = 1.0;
  enum class Side { kInside, kLower, kUpper } side = Side::kInside;
};

ProjectedAction project_to_feasible(double u, const AccelInterval& interval);

/// A trained policy per seed plus the observation layout it expects.
struct PolicyBundle {
  ObservationSpec observation;
  std::vector<std::uint64_t> seeds;
  std::vector<PolicyNetwork> members;
};

void write_policy_bundle(std::ostream& os, const PolicyBundle& bundle);
PolicyBundle read_policy_bundle(std::istream& is);
void save_policy_bundle(const std::string& path, const PolicyBundle& bundle);
PolicyBundle load_policy_bundle(const std::string& path);

}  // namespace mpgdrive
