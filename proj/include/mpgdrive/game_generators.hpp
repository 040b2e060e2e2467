#pragma once

#include <random>
#include <vector>

#include "mpgdrive/tabular_game.hpp"

namespace mpgdrive::tabular {

struct GameShape {
  std::vector<int> local_states;
  std::vector<int> actions;
  double gamma = 0.9;
};

/// Sets P = prod_i P_i(s_i' | s_i, a_i). kernels[i] is (L_i * A_i) x L_i with
/// row s_i * A_i + a_i.
void fill_product_transition(TabularGame& g, const std::vector<Eigen::MatrixXd>& kernels);

/// Fills g.rewards from g.structure; undeclared parts contribute zero.
void assemble_rewards(TabularGame& g);

/// 2-3 agents, at most 4 joint states and at most 3 actions per agent.
GameShape random_small_shape(std::mt19937_64& rng);

/// Self rewards only, product-form transitions.
TabularGame random_self_game(const GameShape& shape, std::mt19937_64& rng);

/// Symmetric pairwise rewards only, product-form transitions.
TabularGame random_pairwise_game(const GameShape& shape, std::mt19937_64& rng);

/// alpha * self + sum_j beta_ij r_ij with symmetric beta, product-form transitions.
/// An empty beta draws a random symmetric matrix.
TabularGame random_mixed_game(const GameShape& shape, double alpha, Eigen::MatrixXd beta,
                              std::mt19937_64& rng);

/// Common reward for every agent over arbitrary (non-factored) states.
TabularGame identical_interest_game(int states, std::vector<int> actions, double gamma,
                                    std::mt19937_64& rng);

/// Two agents, one state, r_2 = -r_1 with coupled stage payoffs.
TabularGame zero_sum_counterexample(std::mt19937_64& rng);

/// Self rewards, but agent 1's action drives agent 0's next local state.
TabularGame coupled_transition_game(std::mt19937_64& rng);

}  // namespace mpgdrive::tabular
