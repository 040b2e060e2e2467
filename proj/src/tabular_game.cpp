#include "mpgdrive/tabular_game.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mpgdrive/errors.hpp"

namespace mpgdrive::tabular {

namespace {

// actions_of[a * n + i] = agent i's action inside joint action a.
std::vector<int> action_table(const TabularGame& game) {
  const int n = game.n_agents;
  const int a_count = game.joint_actions();
  std::vector<int> out(static_cast<std::size_t>(a_count) * n);
  for (int a = 0; a < a_count; ++a) {
    game.decode_actions(a, std::span<int>(out.data() + static_cast<std::size_t>(a) * n, n));
  }
  return out;
}

std::vector<int> state_table(const TabularGame& game) {
  const int n = game.n_agents;
  std::vector<int> out(static_cast<std::size_t>(game.states) * n);
  for (int s = 0; s < game.states; ++s) {
    game.decode_state(s, std::span<int>(out.data() + static_cast<std::size_t>(s) * n, n));
  }
  return out;
}

std::size_t pair_index(const TabularGame& game, int i, int j, int si, int sj, int ai, int aj) {
  const auto sj_count = static_cast<std::size_t>(game.local_states[j]);
  const auto ai_count = static_cast<std::size_t>(game.actions[i]);
  const auto aj_count = static_cast<std::size_t>(game.actions[j]);
  return ((si * sj_count + sj) * ai_count + ai) * aj_count + aj;
}

void require_factored(const TabularGame& game, const char* what) {
  if (!game.factored()) {
    throw StructureError(std::string(what) + ": game does not declare a per-agent state factorization");
  }
}

Eigen::MatrixXd expand_beta(const TabularGame& game, const Eigen::MatrixXd& beta) {
  if (beta.size() == 0) return Eigen::MatrixXd::Ones(game.n_agents, game.n_agents);
  if (beta.rows() != game.n_agents || beta.cols() != game.n_agents) {
    throw StructureError("beta must be n_agents x n_agents");
  }
  return beta;
}

// Evaluates alpha * sum_i self_i + sum_i sum_{j<i} beta_ij r_ij, and checks that each
// agent's reward tensor equals its declared decomposition.
StatePotential assemble_potential(const TabularGame& game, double alpha, const Eigen::MatrixXd& beta,
                                  bool use_self, bool use_pair, const char* what) {
  const int n = game.n_agents;
  const auto acts = action_table(game);
  const auto locs = state_table(game);
  const auto& st = game.structure;
  StatePotential phi = StatePotential::Zero(game.states, game.joint_actions());
  double worst = 0.0;
  for (int s = 0; s < game.states; ++s) {
    const int* sl = locs.data() + static_cast<std::size_t>(s) * n;
    for (int a = 0; a < game.joint_actions(); ++a) {
      const int* al = acts.data() + static_cast<std::size_t>(a) * n;
      double value = 0.0;
      for (int i = 0; i < n; ++i) {
        double ri = 0.0;
        if (use_self) {
          const double self = st.self[i](sl[i], al[i]);
          ri += alpha * self;
          value += alpha * self;
        }
        if (use_pair) {
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double rij = st.pair[i][j][pair_index(game, i, j, sl[i], sl[j], al[i], al[j])];
            ri += beta(i, j) * rij;
            if (j < i) value += beta(i, j) * rij;
          }
        }
        worst = std::max(worst, std::abs(ri - game.rewards[i](s, a)));
      }
      phi(s, a) = value;
    }
  }
  if (worst > 1e-12) {
    throw StructureError(std::string(what) + ": declared reward decomposition does not match the reward tensor (max deviation " +
                         std::to_string(worst) + ")");
  }
  return phi;
}

void check_self_shapes(const TabularGame& game) {
  const auto& st = game.structure;
  if (static_cast<int>(st.self.size()) != game.n_agents) {
    throw StructureError("self rewards must be declared for every agent");
  }
  for (int i = 0; i < game.n_agents; ++i) {
    if (st.self[i].rows() != game.local_states[i] || st.self[i].cols() != game.actions[i]) {
      throw StructureError("self reward table has the wrong shape for agent " + std::to_string(i));
    }
  }
}

void check_pair_symmetry(const TabularGame& game) {
  const auto& st = game.structure;
  const int n = game.n_agents;
  if (static_cast<int>(st.pair.size()) != n) {
    throw StructureError("pairwise rewards must be declared as an n_agents x n_agents grid");
  }
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(st.pair[i].size()) != n) {
      throw StructureError("pairwise rewards must be declared as an n_agents x n_agents grid");
    }
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::size_t expected = static_cast<std::size_t>(game.local_states[i]) * game.local_states[j] *
                                   game.actions[i] * game.actions[j];
      if (st.pair[i][j].size() != expected) {
        throw StructureError("pair table r_" + std::to_string(i) + std::to_string(j) + " has the wrong size");
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      for (int si = 0; si < game.local_states[i]; ++si)
        for (int sj = 0; sj < game.local_states[j]; ++sj)
          for (int ai = 0; ai < game.actions[i]; ++ai)
            for (int aj = 0; aj < game.actions[j]; ++aj) {
              const double a = st.pair[i][j][pair_index(game, i, j, si, sj, ai, aj)];
              const double b = st.pair[j][i][pair_index(game, j, i, sj, si, aj, ai)];
              if (std::abs(a - b) > 1e-12) {
                throw StructureError("pairwise rewards are not symmetric for agents " + std::to_string(i) +
                                     " and " + std::to_string(j));
              }
            }
    }
  }
}

Eigen::MatrixXd others_probability(const TabularGame& game, const DirectPolicy& pi, int agent,
                                   const std::vector<int>& acts) {
  const int n = game.n_agents;
  Eigen::MatrixXd out = Eigen::MatrixXd::Ones(game.states, game.joint_actions());
  for (int a = 0; a < game.joint_actions(); ++a) {
    for (int j = 0; j < n; ++j) {
      if (j == agent) continue;
      out.col(a).array() *= pi.tables[j].col(acts[static_cast<std::size_t>(a) * n + j]).array();
    }
  }
  return out;
}

// Sum of the global-row gradient over the states sharing each local state of agent i.
Eigen::MatrixXd to_local(const TabularGame& game, int agent, const Eigen::MatrixXd& global,
                         const std::vector<int>& locs) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(game.local_states[agent], global.cols());
  for (int s = 0; s < game.states; ++s) {
    out.row(locs[static_cast<std::size_t>(s) * game.n_agents + agent]) += global.row(s);
  }
  return out;
}

Eigen::MatrixXd to_global(const TabularGame& game, int agent, const Eigen::MatrixXd& local,
                          const std::vector<int>& locs) {
  Eigen::MatrixXd out(game.states, local.cols());
  for (int s = 0; s < game.states; ++s) {
    out.row(s) = local.row(locs[static_cast<std::size_t>(s) * game.n_agents + agent]);
  }
  return out;
}

Eigen::MatrixXd project_rows(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (int r = 0; r < m.rows(); ++r) out.row(r) = simplex_projection(m.row(r).transpose()).transpose();
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// TabularGame

int TabularGame::joint_actions() const {
  int count = 1;
  for (int a : actions) count *= a;
  return count;
}

void TabularGame::decode_actions(int joint, std::span<int> out) const {
  for (int i = n_agents - 1; i >= 0; --i) {
    out[i] = joint % actions[i];
    joint /= actions[i];
  }
}

int TabularGame::encode_actions(std::span<const int> per_agent) const {
  int joint = 0;
  for (int i = 0; i < n_agents; ++i) joint = joint * actions[i] + per_agent[i];
  return joint;
}

void TabularGame::decode_state(int s, std::span<int> out) const {
  if (!factored()) {
    std::fill(out.begin(), out.end(), s);
    return;
  }
  for (int i = n_agents - 1; i >= 0; --i) {
    out[i] = s % local_states[i];
    s /= local_states[i];
  }
}

int TabularGame::encode_state(std::span<const int> per_agent) const {
  int s = 0;
  for (int i = 0; i < n_agents; ++i) s = s * local_states[i] + per_agent[i];
  return s;
}

void TabularGame::validate() const {
  if (n_agents < 1) throw StructureError("game needs at least one agent");
  if (static_cast<int>(actions.size()) != n_agents) throw StructureError("one action count per agent required");
  for (int a : actions)
    if (a < 1) throw StructureError("action counts must be positive");
  if (states < 1) throw StructureError("game needs at least one state");
  if (factored()) {
    if (static_cast<int>(local_states.size()) != n_agents) {
      throw StructureError("one local state count per agent required");
    }
    const int product = std::accumulate(local_states.begin(), local_states.end(), 1, std::multiplies<>());
    if (product != states) throw StructureError("local state counts do not multiply to the state count");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw StructureError("gamma must lie in [0, 1)");
  const int a_count = joint_actions();
  if (transition.size() != static_cast<std::size_t>(states) * a_count * states) {
    throw StructureError("transition tensor has the wrong size");
  }
  for (int s = 0; s < states; ++s) {
    for (int a = 0; a < a_count; ++a) {
      double sum = 0.0;
      for (int t = 0; t < states; ++t) {
        const double prob = p(s, a, t);
        if (!(prob >= 0.0)) throw StructureError("transition probabilities must be non-negative");
        sum += prob;
      }
      if (std::abs(sum - 1.0) > 1e-12) throw StructureError("transition rows must sum to one");
    }
  }
  if (static_cast<int>(rewards.size()) != n_agents) throw StructureError("one reward tensor per agent required");
  for (const auto& r : rewards) {
    if (r.rows() != states || r.cols() != a_count) throw StructureError("reward tensor has the wrong shape");
    if (!r.allFinite()) throw StructureError("reward tensor must be finite");
  }
  if (rho.size() != states) throw StructureError("rho has the wrong size");
  if ((rho.array() < 0.0).any() || std::abs(rho.sum() - 1.0) > 1e-12) {
    throw StructureError("rho must be a probability distribution");
  }
}

void DirectPolicy::validate(double tol) const {
  for (const auto& t : tables) {
    if ((t.array() < -tol).any()) throw StructureError("policy rows must be non-negative");
    for (int s = 0; s < t.rows(); ++s) {
      if (std::abs(t.row(s).sum() - 1.0) > tol) throw StructureError("policy rows must sum to one");
    }
  }
}

// ---------------------------------------------------------------------------
// Values

Eigen::MatrixXd joint_action_probabilities(const TabularGame& game, const DirectPolicy& pi) {
  const auto acts = action_table(game);
  return others_probability(game, pi, -1, acts);
}

Eigen::MatrixXd policy_transition(const TabularGame& game, const Eigen::MatrixXd& joint_probs) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(game.states, game.states);
  for (int s = 0; s < game.states; ++s) {
    for (int a = 0; a < game.joint_actions(); ++a) {
      const double w = joint_probs(s, a);
      if (w == 0.0) continue;
      for (int t = 0; t < game.states; ++t) out(s, t) += w * game.p(s, a, t);
    }
  }
  return out;
}

Eigen::VectorXd value_function(const TabularGame& game, const DirectPolicy& pi,
                               const Eigen::MatrixXd& reward) {
  const Eigen::MatrixXd joint = joint_action_probabilities(game, pi);
  const Eigen::MatrixXd kernel = policy_transition(game, joint);
  const Eigen::VectorXd r_pi = joint.cwiseProduct(reward).rowwise().sum();
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(game.states, game.states) - game.gamma * kernel;
  Eigen::VectorXd v = system.partialPivLu().solve(r_pi);
  if (!v.allFinite()) throw NumericalError("value_function: singular policy evaluation system");
  return v;
}

std::vector<Eigen::VectorXd> exact_value_functions(const TabularGame& game, const DirectPolicy& pi) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(game.n_agents);
  for (int i = 0; i < game.n_agents; ++i) out.push_back(value_function(game, pi, game.rewards[i]));
  return out;
}

double total_value(const TabularGame& game, const DirectPolicy& pi, const Eigen::MatrixXd& reward) {
  return game.rho.dot(value_function(game, pi, reward));
}

std::vector<double> total_reward(const TabularGame& game, const DirectPolicy& pi) {
  std::vector<double> out;
  for (const auto& v : exact_value_functions(game, pi)) out.push_back(game.rho.dot(v));
  return out;
}

Visitation visitation_measure(const TabularGame& game, const DirectPolicy& pi) {
  const Eigen::MatrixXd joint = joint_action_probabilities(game, pi);
  const Eigen::MatrixXd kernel = policy_transition(game, joint);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(game.states, game.states) - game.gamma * kernel;
  Visitation out;
  out.state = (1.0 - game.gamma) * system.transpose().partialPivLu().solve(game.rho);
  out.state /= out.state.sum();
  out.state_action = joint.array().colwise() * out.state.array();
  return out;
}

// ---------------------------------------------------------------------------
// Potentials

StatePotential build_self_potential(const TabularGame& game) {
  require_factored(game, "build_self_potential");
  if (!game.structure.has_self()) throw StructureError("build_self_potential: no self rewards declared");
  check_self_shapes(game);
  return assemble_potential(game, 1.0, expand_beta(game, {}), true, false, "build_self_potential");
}

StatePotential build_pairwise_potential(const TabularGame& game) {
  require_factored(game, "build_pairwise_potential");
  if (!game.structure.has_pair()) throw StructureError("build_pairwise_potential: no pairwise rewards declared");
  check_pair_symmetry(game);
  return assemble_potential(game, 1.0, expand_beta(game, {}), false, true, "build_pairwise_potential");
}

StatePotential build_mixed_potential(const TabularGame& game, double alpha, const Eigen::MatrixXd& beta) {
  require_factored(game, "build_mixed_potential");
  const Eigen::MatrixXd b = expand_beta(game, beta);
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw StructureError("build_mixed_potential: beta must be symmetric");
  }
  const auto& st = game.structure;
  if (!st.has_self() && !st.has_pair()) {
    throw StructureError("build_mixed_potential: no reward decomposition declared");
  }
  if (st.has_self()) check_self_shapes(game);
  if (st.has_pair()) check_pair_symmetry(game);
  return assemble_potential(game, alpha, b, st.has_self(), st.has_pair(), "build_mixed_potential");
}

// ---------------------------------------------------------------------------
// Verification

bool verify_transition_independence(const TabularGame& game, double tol) {
  require_factored(game, "verify_transition_independence");
  const int n = game.n_agents;
  const auto acts = action_table(game);
  const auto locs = state_table(game);
  const int a_count = game.joint_actions();
  for (int i = 0; i < n; ++i) {
    const int li = game.local_states[i];
    for (int s = 0; s < game.states; ++s) {
      // reference[a_i] holds the marginal of s'_i under the first joint action with that a_i.
      std::vector<Eigen::VectorXd> reference(game.actions[i]);
      for (int a = 0; a < a_count; ++a) {
        Eigen::VectorXd marginal = Eigen::VectorXd::Zero(li);
        for (int t = 0; t < game.states; ++t) {
          marginal(locs[static_cast<std::size_t>(t) * n + i]) += game.p(s, a, t);
        }
        const int ai = acts[static_cast<std::size_t>(a) * n + i];
        if (reference[ai].size() == 0) {
          reference[ai] = marginal;
        } else if ((reference[ai] - marginal).cwiseAbs().maxCoeff() >= tol) {
          return false;
        }
      }
    }
  }
  return true;
}

VerifyReport verify_mpg(const TabularGame& game, const StatePotential& phi, const VerifyOptions& options) {
  if (phi.rows() != game.states || phi.cols() != game.joint_actions()) {
    throw StructureError("verify_mpg: potential must be shaped like the reward tensors");
  }
  VerifyReport report;
  report.samples = options.samples;
  for (int k = 0; k < options.samples; ++k) {
    // Each sample owns its RNG stream so results do not depend on evaluation order.
    std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    DirectPolicy base = random_policy(game, rng, options.profiles);
    std::uniform_int_distribution<int> pick(0, game.n_agents - 1);
    const int agent = pick(rng);
    DirectPolicy deviated = base;
    deviated.tables[agent] = random_policy(game, rng, ProfileClass::kGlobal).tables[agent];

    const Eigen::VectorXd dj = value_function(game, deviated, game.rewards[agent]) -
                               value_function(game, base, game.rewards[agent]);
    const Eigen::VectorXd dphi = value_function(game, deviated, phi) - value_function(game, base, phi);
    const double violation = (dj - dphi).cwiseAbs().maxCoeff();
    if (violation > report.max_violation || report.worst_sample < 0) {
      report.max_violation = violation;
      report.worst_sample = k;
    }
  }
  report.is_mpg_on_samples = report.max_violation < options.tol;
  return report;
}

Eigen::VectorXd simplex_projection(const Eigen::VectorXd& v) {
  if (!v.allFinite()) throw DomainError("simplex_projection: non-finite entries");
  const int n = static_cast<int>(v.size());
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (int k = 0; k < n; ++k) {
    cumulative += u[k];
    const double candidate = (cumulative - 1.0) / (k + 1);
    if (u[k] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Eigen::MatrixXd policy_gradient(const TabularGame& game, const DirectPolicy& pi, int agent,
                                const Eigen::MatrixXd& reward) {
  const int n = game.n_agents;
  const auto acts = action_table(game);
  const Eigen::MatrixXd joint = joint_action_probabilities(game, pi);
  const Eigen::MatrixXd kernel = policy_transition(game, joint);
  const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(game.states, game.states) - game.gamma * kernel;
  const auto lu = system.partialPivLu();
  const Eigen::VectorXd r_pi = joint.cwiseProduct(reward).rowwise().sum();
  const Eigen::VectorXd v = lu.solve(r_pi);
  // Unnormalized discounted occupancy: d_theta / (1 - gamma).
  const Eigen::VectorXd occupancy = system.transpose().partialPivLu().solve(game.rho);
  const Eigen::MatrixXd others = others_probability(game, pi, agent, acts);

  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(game.states, game.actions[agent]);
  for (int s = 0; s < game.states; ++s) {
    for (int a = 0; a < game.joint_actions(); ++a) {
      double q = reward(s, a);
      for (int t = 0; t < game.states; ++t) q += game.gamma * game.p(s, a, t) * v(t);
      grad(s, acts[static_cast<std::size_t>(a) * n + agent]) += occupancy(s) * others(s, a) * q;
    }
  }
  return grad;
}

DirectPolicy uniform_policy(const TabularGame& game) {
  DirectPolicy pi;
  for (int i = 0; i < game.n_agents; ++i) {
    pi.tables.push_back(Eigen::MatrixXd::Constant(game.states, game.actions[i], 1.0 / game.actions[i]));
  }
  return pi;
}

GradientPlayResult tabular_gradient_play(const TabularGame& game, const GradientPlayOptions& options) {
  if (!(options.eta > 0.0)) throw DomainError("tabular_gradient_play: eta must be positive");
  if (options.backtracking && !options.potential) {
    throw DomainError("tabular_gradient_play: backtracking needs a potential");
  }
  const bool local = options.policy_class == ProfileClass::kLocal;
  if (local) require_factored(game, "tabular_gradient_play");
  const int n = game.n_agents;
  const auto locs = state_table(game);

  // Parameters live in the chosen class; `expand` maps them to global tables.
  std::vector<Eigen::MatrixXd> params;
  const DirectPolicy start = options.initial ? *options.initial : uniform_policy(game);
  for (int i = 0; i < n; ++i) {
    if (local) {
      Eigen::MatrixXd rows(game.local_states[i], game.actions[i]);
      for (int s = game.states - 1; s >= 0; --s) {
        rows.row(locs[static_cast<std::size_t>(s) * n + i]) = start.tables[i].row(s);
      }
      params.push_back(rows);
    } else {
      params.push_back(start.tables[i]);
    }
  }
  auto expand = [&](const std::vector<Eigen::MatrixXd>& p) {
    DirectPolicy pi;
    for (int i = 0; i < n; ++i) pi.tables.push_back(local ? to_global(game, i, p[i], locs) : p[i]);
    return pi;
  };
  auto gradient = [&](const DirectPolicy& pi, int i, const Eigen::MatrixXd& reward) {
    Eigen::MatrixXd g = policy_gradient(game, pi, i, reward);
    return local ? to_local(game, i, g, locs) : g;
  };

  GradientPlayResult result;
  DirectPolicy current = expand(params);
  double phi_current = options.potential ? total_value(game, current, *options.potential) : 0.0;
  result.trace.push_back(current);
  if (options.potential) result.potential.push_back(phi_current);

  for (int k = 0; k < options.iterations; ++k) {
    std::vector<Eigen::MatrixXd> grads(n);
    double gap = 0.0;
    for (int i = 0; i < n; ++i) {
      grads[i] = gradient(current, i, game.rewards[i]);
      if (options.potential) {
        // Per-state shifts leave the projected step unchanged, so compare tangent components.
        Eigen::MatrixXd diff = grads[i] - gradient(current, i, *options.potential);
        diff.colwise() -= diff.rowwise().mean();
        gap = std::max(gap, diff.cwiseAbs().maxCoeff());
      }
    }
    if (options.potential) result.gradient_gap.push_back(gap);

    double eta = options.eta;
    std::vector<Eigen::MatrixXd> next(n);
    DirectPolicy candidate;
    double phi_next = phi_current;
    bool accepted = false;
    for (int halving = 0; halving <= (options.backtracking ? 60 : 0); ++halving) {
      for (int i = 0; i < n; ++i) next[i] = project_rows(params[i] + eta * grads[i]);
      candidate = expand(next);
      if (!options.backtracking) {
        accepted = true;
        break;
      }
      phi_next = total_value(game, candidate, *options.potential);
      if (phi_next >= phi_current) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }

    double step_sq = 0.0;
    for (int i = 0; i < n; ++i) step_sq += (next[i] - params[i]).squaredNorm();
    result.stationarity = std::sqrt(step_sq) / eta;
    result.iterations = k + 1;
    if (!accepted) {
      result.stalled = true;
      break;
    }
    params = std::move(next);
    current = std::move(candidate);
    if (options.potential) {
      phi_current = options.backtracking ? phi_next : total_value(game, current, *options.potential);
      result.potential.push_back(phi_current);
    }
    const bool done = result.stationarity < options.stationarity_tol;
    if ((k + 1) % std::max(options.record_every, 1) == 0 || done || k + 1 == options.iterations) {
      result.trace.push_back(current);
    }
    if (done) break;
  }
  return result;
}

ExploitabilityResult exploitability(const TabularGame& game, const DirectPolicy& pi, int max_iterations,
                                    double tol) {
  const int n = game.n_agents;
  const auto acts = action_table(game);
  const std::vector<double> current = total_reward(game, pi);
  ExploitabilityResult out;
  out.per_agent.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd others = others_probability(game, pi, i, acts);
    // Expected one-step reward and kernel for agent i's own action, marginalizing the others.
    Eigen::MatrixXd reward = Eigen::MatrixXd::Zero(game.states, game.actions[i]);
    std::vector<Eigen::MatrixXd> kernel(game.actions[i], Eigen::MatrixXd::Zero(game.states, game.states));
    for (int s = 0; s < game.states; ++s) {
      for (int a = 0; a < game.joint_actions(); ++a) {
        const double w = others(s, a);
        if (w == 0.0) continue;
        const int ai = acts[static_cast<std::size_t>(a) * n + i];
        reward(s, ai) += w * game.rewards[i](s, a);
        for (int t = 0; t < game.states; ++t) kernel[ai](s, t) += w * game.p(s, a, t);
      }
    }
    Eigen::VectorXd v = Eigen::VectorXd::Zero(game.states);
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < max_iterations && residual > tol; ++it) {
      Eigen::VectorXd next = Eigen::VectorXd::Constant(game.states, -std::numeric_limits<double>::infinity());
      for (int ai = 0; ai < game.actions[i]; ++ai) {
        next = next.cwiseMax(reward.col(ai) + game.gamma * kernel[ai] * v);
      }
      residual = (next - v).cwiseAbs().maxCoeff();
      v = std::move(next);
    }
    if (residual > tol) out.converged = false;
    out.residual = std::max(out.residual, residual);
    out.per_agent[i] = game.rho.dot(v) - current[i];
    out.value = std::max(out.value, out.per_agent[i]);
  }
  // A best response is never worse than the current policy; clip solver noise.
  out.value = std::max(out.value, 0.0);
  return out;
}

std::vector<DirectPolicy> enumerate_deterministic_policies(const TabularGame& game) {
  // One digit per (agent, state), mixed radix by action count.
  std::vector<int> radix;
  double total = 1.0;
  for (int i = 0; i < game.n_agents; ++i) {
    for (int s = 0; s < game.states; ++s) {
      radix.push_back(game.actions[i]);
      total *= game.actions[i];
    }
  }
  if (total > 1e6) throw StructureError("enumerate_deterministic_policies: too many profiles");
  std::vector<DirectPolicy> out;
  std::vector<int> digits(radix.size(), 0);
  for (long long index = 0; index < static_cast<long long>(total); ++index) {
    DirectPolicy pi;
    std::size_t d = 0;
    for (int i = 0; i < game.n_agents; ++i) {
      Eigen::MatrixXd table = Eigen::MatrixXd::Zero(game.states, game.actions[i]);
      for (int s = 0; s < game.states; ++s) table(s, digits[d++]) = 1.0;
      pi.tables.push_back(std::move(table));
    }
    out.push_back(std::move(pi));
    for (std::size_t k = digits.size(); k-- > 0;) {
      if (++digits[k] < radix[k]) break;
      digits[k] = 0;
    }
  }
  return out;
}

}  // namespace mpgdrive::tabular
