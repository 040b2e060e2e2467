#pragma once

#include <random>

namespace mpgdrive::tabular {

namespace detail {

template <class Rng>
Eigen::VectorXd dirichlet_row(int n, Rng& rng) {
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd row(n);
  for (int k = 0; k < n; ++k) row(k) = expo(rng);
  return row / row.sum();
}

}  // namespace detail

template <class Rng>
DirectPolicy random_policy(const TabularGame& game, Rng& rng, ProfileClass cls) {
  DirectPolicy pi;
  std::vector<int> local(game.n_agents);
  for (int i = 0; i < game.n_agents; ++i) {
    Eigen::MatrixXd table(game.states, game.actions[i]);
    if (cls == ProfileClass::kLocal && game.factored()) {
      Eigen::MatrixXd rows(game.local_states[i], game.actions[i]);
      for (int ls = 0; ls < game.local_states[i]; ++ls) {
        rows.row(ls) = detail::dirichlet_row(game.actions[i], rng).transpose();
      }
      for (int s = 0; s < game.states; ++s) {
        game.decode_state(s, local);
        table.row(s) = rows.row(local[i]);
      }
    } else {
      for (int s = 0; s < game.states; ++s) {
        table.row(s) = detail::dirichlet_row(game.actions[i], rng).transpose();
      }
    }
    pi.tables.push_back(std::move(table));
  }
  return pi;
}

}  // namespace mpgdrive::tabular
