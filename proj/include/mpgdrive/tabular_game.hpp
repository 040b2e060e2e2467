#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mpgdrive::tabular {

/// Declared reward decomposition r_i = alpha * r_i^self + sum_j beta_ij * r_ij.
/// The potential builders check it against the full reward tensors.
struct RewardStructure {
  /// self[i] has shape local_states[i] x actions[i]; empty when not declared.
  std::vector<Eigen::MatrixXd> self;
  /// pair[i][j] (i != j) is the flattened r_ij(s_i, s_j, a_i, a_j), row-major
  /// with a_j fastest; empty when not declared.
  std::vector<std::vector<std::vector<double>>> pair;
  double alpha = 1.0;
  /// N x N interaction weights; an empty matrix means all ones.
  Eigen::MatrixXd beta;

  bool has_self() const { return !self.empty(); }
  bool has_pair() const { return !pair.empty(); }
};

/// A finite discounted Markov game with joint state and joint action indices.
///
/// Joint actions are row-major over agents (agent 0 most significant). When
/// `local_states` is non-empty the state space is the product of per-agent
/// local spaces, again row-major with agent 0 most significant.
struct TabularGame {
  int n_agents = 0;
  std::vector<int> actions;
  std::vector<int> local_states;
  int states = 0;
  /// P(s' | s, a) flattened as [s][a][s'].
  std::vector<double> transition;
  /// rewards[i] is states x joint_actions.
  std::vector<Eigen::MatrixXd> rewards;
  double gamma = 0.9;
  Eigen::VectorXd rho;
  RewardStructure structure;

  int joint_actions() const;
  bool factored() const { return !local_states.empty(); }

  double p(int s, int a, int s_next) const {
    const auto a_count = static_cast<std::size_t>(joint_actions());
    return transition[(static_cast<std::size_t>(s) * a_count + a) * states + s_next];
  }

  void decode_actions(int joint, std::span<int> out) const;
  int encode_actions(std::span<const int> per_agent) const;
  void decode_state(int s, std::span<int> out) const;
  int encode_state(std::span<const int> per_agent) const;

  /// Throws StructureError when shapes, stochasticity or discounting are invalid.
  void validate() const;
};

/// A state-action tensor over joint indices (states x joint_actions), e.g. a potential.
using StatePotential = Eigen::MatrixXd;

/// Direct parameterization: tables[i] is states x actions[i], rows on the simplex.
struct DirectPolicy {
  std::vector<Eigen::MatrixXd> tables;

  void validate(double tol = 1e-12) const;
};

/// Probability of each joint action in each state (states x joint_actions).
Eigen::MatrixXd joint_action_probabilities(const TabularGame& game, const DirectPolicy& pi);

/// State-to-state kernel under the policy.
Eigen::MatrixXd policy_transition(const TabularGame& game, const Eigen::MatrixXd& joint_probs);

/// V^pi for an arbitrary state-action tensor, by a direct linear solve.
Eigen::VectorXd value_function(const TabularGame& game, const DirectPolicy& pi,
                               const Eigen::MatrixXd& reward);

std::vector<Eigen::VectorXd> exact_value_functions(const TabularGame& game, const DirectPolicy& pi);

/// rho-weighted value of an arbitrary state-action tensor (J_i, or Phi for a potential).
double total_value(const TabularGame& game, const DirectPolicy& pi, const Eigen::MatrixXd& reward);

std::vector<double> total_reward(const TabularGame& game, const DirectPolicy& pi);

struct Visitation {
  Eigen::VectorXd state;         // d_theta
  Eigen::MatrixXd state_action;  // mu_theta over (state, joint action)
};

Visitation visitation_measure(const TabularGame& game, const DirectPolicy& pi);

StatePotential build_self_potential(const TabularGame& game);
StatePotential build_pairwise_potential(const TabularGame& game);
StatePotential build_mixed_potential(const TabularGame& game, double alpha,
                                     const Eigen::MatrixXd& beta);

/// True iff every agent's local-state marginal is unaffected by the other agents' actions.
bool verify_transition_independence(const TabularGame& game, double tol = 1e-12);

enum class ProfileClass {
  /// Non-deviating agents condition only on their own local state. This is the
  /// class in which the reward constructions are exact potentials.
  kLocal,
  /// Every agent conditions on the full joint state.
  kGlobal,
};

struct VerifyOptions {
  int samples = 200;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  ProfileClass profiles = ProfileClass::kLocal;
};

struct VerifyReport {
  bool is_mpg_on_samples = false;
  double max_violation = 0.0;
  int samples = 0;
  /// Index of the sample that produced max_violation.
  int worst_sample = -1;
};

/// Samples policy profiles and unilateral deviations and compares the change
/// in the deviator's value with the change in the potential's value, state by state.
VerifyReport verify_mpg(const TabularGame& game, const StatePotential& phi,
                        const VerifyOptions& options = {});

/// Euclidean projection onto the probability simplex.
Eigen::VectorXd simplex_projection(const Eigen::VectorXd& v);

/// Exact gradient of the rho-weighted value of `reward` with respect to agent i's table.
Eigen::MatrixXd policy_gradient(const TabularGame& game, const DirectPolicy& pi, int agent,
                                const Eigen::MatrixXd& reward);

DirectPolicy uniform_policy(const TabularGame& game);

/// Random profile with Dirichlet(1) rows; kLocal ties rows that share the agent's local state.
template <class Rng>
DirectPolicy random_policy(const TabularGame& game, Rng& rng, ProfileClass cls);

struct GradientPlayOptions {
  double eta = 0.05;
  int iterations = 10000;
  /// Halve the step until Phi does not decrease; requires `potential`.
  bool backtracking = false;
  ProfileClass policy_class = ProfileClass::kGlobal;
  /// Stop once the gradient mapping norm ||theta_{k+1} - theta_k|| / eta drops below this.
  double stationarity_tol = 1e-10;
  /// When set, Phi is logged and the gradient equivalence gap is measured at each iterate.
  std::optional<StatePotential> potential;
  std::optional<DirectPolicy> initial;
  /// Keep every n-th iterate in the trace (the final iterate is always kept).
  int record_every = 1;
};

struct GradientPlayResult {
  std::vector<DirectPolicy> trace;
  std::vector<double> potential;       // Phi at each iteration, when a potential was given
  std::vector<double> gradient_gap;    // max |grad J_i - grad Phi| along the simplex, per iteration
  double stationarity = 0.0;           // last gradient mapping norm
  int iterations = 0;
  bool stalled = false;                // backtracking found no ascent step
  DirectPolicy final_policy() const { return trace.back(); }
};

GradientPlayResult tabular_gradient_play(const TabularGame& game,
                                         const GradientPlayOptions& options = {});

struct ExploitabilityResult {
  double value = 0.0;
  std::vector<double> per_agent;
  bool converged = true;
  double residual = 0.0;
};

/// Largest gain any agent obtains by a best response, holding the others fixed.
ExploitabilityResult exploitability(const TabularGame& game, const DirectPolicy& pi,
                                    int max_iterations = 200000, double tol = 1e-13);

/// Every deterministic profile of the game, in lexicographic order.
std::vector<DirectPolicy> enumerate_deterministic_policies(const TabularGame& game);

}  // namespace mpgdrive::tabular

#include "mpgdrive/tabular_game_inl.hpp"
