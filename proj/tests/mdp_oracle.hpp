#pragma once

// Small deterministic MDPs and a value-iteration reference for checking the
// tabular learner.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "autonet/rl.hpp"

namespace oracle {

struct Mdp {
  std::size_t states = 0;
  std::size_t actions = 0;
  std::vector<std::vector<std::size_t>> next;  // [s][a]
  std::vector<std::vector<double>> reward;     // [s][a]
  double gamma = 0.9;
};

using QTable = std::vector<std::vector<double>>;

// Q* by repeated Bellman backups until the largest change is below tol.
inline QTable value_iteration(const Mdp& m, double tol = 1e-14) {
  QTable q(m.states, std::vector<double>(m.actions, 0.0));
  for (int iter = 0; iter < 100000; ++iter) {
    double delta = 0;
    QTable fresh = q;
    for (std::size_t s = 0; s < m.states; ++s)
      for (std::size_t a = 0; a < m.actions; ++a) {
        const auto& row = q[m.next[s][a]];
        fresh[s][a] = m.reward[s][a] + m.gamma * *std::max_element(row.begin(), row.end());
        delta = std::max(delta, std::abs(fresh[s][a] - q[s][a]));
      }
    q = std::move(fresh);
    if (delta < tol) break;
  }
  return q;
}

inline autonet::ObsBin state_bin(std::size_t s) { return autonet::ObsBin{1, s}; }

// Sweeps every (s, a) pair in order, applying the learner's update.
inline void sweep(const Mdp& m, autonet::Policy& policy, std::size_t sweeps, double reward_scale = 1.0) {
  for (std::size_t k = 0; k < sweeps; ++k)
    for (std::size_t s = 0; s < m.states; ++s)
      for (std::size_t a = 0; a < m.actions; ++a)
        policy.update(state_bin(s), a, reward_scale * m.reward[s][a], state_bin(m.next[s][a]));
}

inline double max_error(const Mdp& m, const autonet::Policy& policy, const QTable& expect) {
  double err = 0;
  for (std::size_t s = 0; s < m.states; ++s)
    for (std::size_t a = 0; a < m.actions; ++a)
      err = std::max(err, std::abs(policy.q(state_bin(s), a) - expect[s][a]));
  return err;
}

// Action space with `n` distinct configs so the learner has n actions.
inline autonet::ActionSpace n_actions(std::size_t n) {
  auto all = autonet::ActionSpace::default_choices();
  return autonet::ActionSpace(std::vector<autonet::MacConfig>(all.begin(), all.begin() + static_cast<long>(n)), 1);
}

// Two states; action 0 stays, action 1 switches. Staying in state 1 pays 1.
inline Mdp two_state_chain() {
  return Mdp{2, 2, {{0, 1}, {1, 0}}, {{0.0, 0.0}, {1.0, 0.0}}, 0.9};
}

// Three-state ring: action 0 advances, action 1 returns to the start.
inline Mdp three_state_ring() {
  return Mdp{3, 2, {{1, 0}, {2, 0}, {0, 0}}, {{0.1, 0.3}, {0.0, 0.2}, {1.0, 0.5}}, 0.8};
}

// Four states and four actions with a fixed, irregular transition table.
inline Mdp four_by_four() {
  return Mdp{4,
             4,
             {{1, 2, 3, 0}, {0, 3, 1, 2}, {3, 3, 0, 1}, {2, 0, 1, 3}},
             {{0.0, 0.5, 0.2, 0.1}, {0.7, 0.0, 0.3, 0.9}, {0.4, 0.6, 0.0, 0.2}, {1.0, 0.1, 0.8, 0.0}},
             0.75};
}

}  // namespace oracle
