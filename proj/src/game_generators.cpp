#include "mpgdrive/game_generators.hpp"

#include <algorithm>
#include <numeric>

#include "mpgdrive/errors.hpp"

namespace mpgdrive::tabular {

namespace {

Eigen::VectorXd dirichlet(int n, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd row(n);
  for (int k = 0; k < n; ++k) row(k) = expo(rng);
  return row / row.sum();
}

double uniform(std::mt19937_64& rng, double scale) {
  return std::uniform_real_distribution<double>(-scale, scale)(rng);
}

// local[i] is (L_i * A_i) x L_i, row = s_i * A_i + a_i.
using LocalKernels = std::vector<Eigen::MatrixXd>;

LocalKernels random_local_kernels(const GameShape& shape, std::mt19937_64& rng) {
  LocalKernels out;
  for (std::size_t i = 0; i < shape.actions.size(); ++i) {
    const int l = shape.local_states[i];
    const int a = shape.actions[i];
    Eigen::MatrixXd k(l * a, l);
    for (int r = 0; r < l * a; ++r) k.row(r) = dirichlet(l, rng).transpose();
    out.push_back(std::move(k));
  }
  return out;
}

TabularGame skeleton(const GameShape& shape, std::mt19937_64& rng) {
  if (shape.local_states.size() != shape.actions.size() || shape.actions.empty()) {
    throw StructureError("game shape: one local state count and action count per agent");
  }
  TabularGame g;
  g.n_agents = static_cast<int>(shape.actions.size());
  g.actions = shape.actions;
  g.local_states = shape.local_states;
  g.states = std::accumulate(shape.local_states.begin(), shape.local_states.end(), 1, std::multiplies<>());
  g.gamma = shape.gamma;
  g.rho = dirichlet(g.states, rng);
  return g;
}

void random_self_tables(TabularGame& g, double scale, std::mt19937_64& rng) {
  g.structure.self.clear();
  for (int i = 0; i < g.n_agents; ++i) {
    Eigen::MatrixXd t(g.local_states[i], g.actions[i]);
    for (int r = 0; r < t.rows(); ++r)
      for (int c = 0; c < t.cols(); ++c) t(r, c) = uniform(rng, scale);
    g.structure.self.push_back(std::move(t));
  }
}

void random_pair_tables(TabularGame& g, double scale, std::mt19937_64& rng) {
  const int n = g.n_agents;
  auto& pair = g.structure.pair;
  pair.assign(n, std::vector<std::vector<double>>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      const int li = g.local_states[i], lj = g.local_states[j], ai = g.actions[i], aj = g.actions[j];
      pair[i][j].resize(static_cast<std::size_t>(li) * lj * ai * aj);
      pair[j][i].resize(pair[i][j].size());
      for (int si = 0; si < li; ++si)
        for (int sj = 0; sj < lj; ++sj)
          for (int xi = 0; xi < ai; ++xi)
            for (int xj = 0; xj < aj; ++xj) {
              const double value = uniform(rng, scale);
              pair[i][j][((static_cast<std::size_t>(si) * lj + sj) * ai + xi) * aj + xj] = value;
              pair[j][i][((static_cast<std::size_t>(sj) * li + si) * aj + xj) * ai + xi] = value;
            }
    }
  }
}

}  // namespace

void fill_product_transition(TabularGame& g, const std::vector<Eigen::MatrixXd>& kernels) {
  const int n = g.n_agents;
  const int a_count = g.joint_actions();
  g.transition.assign(static_cast<std::size_t>(g.states) * a_count * g.states, 0.0);
  std::vector<int> s_loc(n), a_loc(n), t_loc(n);
  for (int s = 0; s < g.states; ++s) {
    g.decode_state(s, s_loc);
    for (int a = 0; a < a_count; ++a) {
      g.decode_actions(a, a_loc);
      for (int t = 0; t < g.states; ++t) {
        g.decode_state(t, t_loc);
        double p = 1.0;
        for (int i = 0; i < n; ++i) p *= kernels[i](s_loc[i] * g.actions[i] + a_loc[i], t_loc[i]);
        g.transition[(static_cast<std::size_t>(s) * a_count + a) * g.states + t] = p;
      }
    }
  }
}

void assemble_rewards(TabularGame& g) {
  const int n = g.n_agents;
  const auto& st = g.structure;
  const Eigen::MatrixXd beta = st.beta.size() ? st.beta : Eigen::MatrixXd::Ones(n, n);
  g.rewards.assign(n, Eigen::MatrixXd::Zero(g.states, g.joint_actions()));
  std::vector<int> s_loc(n), a_loc(n);
  for (int s = 0; s < g.states; ++s) {
    g.decode_state(s, s_loc);
    for (int a = 0; a < g.joint_actions(); ++a) {
      g.decode_actions(a, a_loc);
      for (int i = 0; i < n; ++i) {
        double r = 0.0;
        if (st.has_self()) r += st.alpha * st.self[i](s_loc[i], a_loc[i]);
        if (st.has_pair()) {
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const std::size_t idx =
                ((static_cast<std::size_t>(s_loc[i]) * g.local_states[j] + s_loc[j]) * g.actions[i] + a_loc[i]) *
                    g.actions[j] +
                a_loc[j];
            r += beta(i, j) * st.pair[i][j][idx];
          }
        }
        g.rewards[i](s, a) = r;
      }
    }
  }
}


GameShape random_small_shape(std::mt19937_64& rng) {
  GameShape shape;
  std::uniform_int_distribution<int> agents(2, 3);
  std::uniform_int_distribution<int> acts(2, 3);
  const int n = agents(rng);
  if (n == 2) {
    shape.local_states = {2, 2};
  } else {
    shape.local_states = {2, 2, 1};
    std::shuffle(shape.local_states.begin(), shape.local_states.end(), rng);
  }
  for (int i = 0; i < n; ++i) shape.actions.push_back(acts(rng));
  shape.gamma = 0.9;
  return shape;
}

TabularGame random_self_game(const GameShape& shape, std::mt19937_64& rng) {
  TabularGame g = skeleton(shape, rng);
  fill_product_transition(g, random_local_kernels(shape, rng));
  random_self_tables(g, 1.0, rng);
  assemble_rewards(g);
  g.validate();
  return g;
}

TabularGame random_pairwise_game(const GameShape& shape, std::mt19937_64& rng) {
  TabularGame g = skeleton(shape, rng);
  fill_product_transition(g, random_local_kernels(shape, rng));
  // Each agent sums n - 1 pair terms; scale them so rewards stay within [-1, 1].
  random_pair_tables(g, 1.0 / std::max(1, g.n_agents - 1), rng);
  assemble_rewards(g);
  g.validate();
  return g;
}

TabularGame random_mixed_game(const GameShape& shape, double alpha, Eigen::MatrixXd beta,
                              std::mt19937_64& rng) {
  TabularGame g = skeleton(shape, rng);
  const int n = g.n_agents;
  fill_product_transition(g, random_local_kernels(shape, rng));
  if (beta.size() == 0) {
    beta = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) beta(i, j) = beta(j, i) = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
  double row_weight = 0.0;
  for (int i = 0; i < n; ++i) row_weight = std::max(row_weight, std::abs(alpha) + beta.row(i).cwiseAbs().sum());
  const double scale = row_weight > 0.0 ? 1.0 / row_weight : 1.0;
  random_self_tables(g, scale, rng);
  random_pair_tables(g, scale, rng);
  g.structure.alpha = alpha;
  g.structure.beta = beta;
  assemble_rewards(g);
  g.validate();
  return g;
}

TabularGame identical_interest_game(int states, std::vector<int> actions, double gamma, std::mt19937_64& rng) {
  TabularGame g;
  g.n_agents = static_cast<int>(actions.size());
  g.actions = std::move(actions);
  g.states = states;
  g.gamma = gamma;
  g.rho = dirichlet(states, rng);
  const int a_count = g.joint_actions();
  g.transition.resize(static_cast<std::size_t>(states) * a_count * states);
  for (int s = 0; s < states; ++s)
    for (int a = 0; a < a_count; ++a) {
      const Eigen::VectorXd row = dirichlet(states, rng);
      for (int t = 0; t < states; ++t) g.transition[(static_cast<std::size_t>(s) * a_count + a) * states + t] = row(t);
    }
  Eigen::MatrixXd common(states, a_count);
  for (int s = 0; s < states; ++s)
    for (int a = 0; a < a_count; ++a) common(s, a) = uniform(rng, 1.0);
  g.rewards.assign(g.n_agents, common);
  g.validate();
  return g;
}

TabularGame zero_sum_counterexample(std::mt19937_64& rng) {
  TabularGame g;
  g.n_agents = 2;
  g.actions = {2, 2};
  g.states = 1;
  g.local_states = {1, 1};
  g.gamma = 0.9;
  g.rho = Eigen::VectorXd::Ones(1);
  g.transition.assign(4, 1.0);
  // Matching-pennies core plus a random perturbation keeps the coupling strong.
  Eigen::MatrixXd r1(1, 4);
  r1 << 1.0, -1.0, -1.0, 1.0;
  for (int a = 0; a < 4; ++a) r1(0, a) += uniform(rng, 0.2);
  g.rewards = {r1, -r1};
  g.validate();
  return g;
}

TabularGame coupled_transition_game(std::mt19937_64& rng) {
  GameShape shape{{2, 2}, {2, 2}, 0.9};
  TabularGame g = skeleton(shape, rng);
  LocalKernels kernels = random_local_kernels(shape, rng);
  const int a_count = g.joint_actions();
  g.transition.assign(static_cast<std::size_t>(g.states) * a_count * g.states, 0.0);
  std::vector<int> s_loc(2), a_loc(2), t_loc(2);
  for (int s = 0; s < g.states; ++s) {
    g.decode_state(s, s_loc);
    for (int a = 0; a < a_count; ++a) {
      g.decode_actions(a, a_loc);
      for (int t = 0; t < g.states; ++t) {
        g.decode_state(t, t_loc);
        // Agent 1's action sends agent 0 to local state a_1 with probability 0.9.
        const double p0 = t_loc[0] == a_loc[1] ? 0.9 : 0.1;
        const double p1 = kernels[1](s_loc[1] * 2 + a_loc[1], t_loc[1]);
        g.transition[(static_cast<std::size_t>(s) * a_count + a) * g.states + t] = p0 * p1;
      }
    }
  }
  random_self_tables(g, 1.0, rng);
  // Agent 0 strongly prefers local state 1, so agent 1's choices move J_0.
  g.structure.self[0](0, 0) = g.structure.self[0](0, 1) = -1.0;
  g.structure.self[0](1, 0) = g.structure.self[0](1, 1) = 1.0;
  assemble_rewards(g);
  g.validate();
  return g;
}

}  // namespace mpgdrive::tabular
