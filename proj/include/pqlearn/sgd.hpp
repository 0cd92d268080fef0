// Copyright 2026 The pqlearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "pqlearn/bellman.hpp"
#include "pqlearn/mdp.hpp"
#include "pqlearn/sampler.hpp"

namespace pqlearn {

namespace detail {
inline void require_subproblem_shapes(const QTable& q, const QTable& q_target,
                                      const TabularMdp& mdp,
                                      const SamplingDistribution& d,
                                      const char* what) {
  require_shape(q, mdp, what);
  require_shape(q_target, mdp, what);
  if (!shapes_match(mdp, d)) {
    throw std::invalid_argument(std::string(what) +
                                ": distribution shape does not match MDP");
  }
}
}  // namespace detail

/// Mean-squared Bellman error of the subproblem with frozen target Q_k:
///   F(Q) = 1/2 sum_{s,a} d_a(s) ((TQ_k)(s, a) - Q(s, a))^2.
inline double loss(const QTable& q, const QTable& q_target,
                   const TabularMdp& mdp, const SamplingDistribution& d) {
  detail::require_subproblem_shapes(q, q_target, mdp, d, "loss");
  const QTable target = apply_bellman(q_target, mdp);
  double total = 0.0;
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      const double diff = target(s, a) - q(s, a);
      total += d(s, a) * diff * diff;
    }
  }
  return 0.5 * total;
}

/// grad F(Q) = -D (TQ_k - Q). The Hessian is the constant diagonal D.
inline QTable exact_gradient(const QTable& q, const QTable& q_target,
                             const TabularMdp& mdp,
                             const SamplingDistribution& d) {
  detail::require_subproblem_shapes(q, q_target, mdp, d, "exact_gradient");
  QTable g = apply_bellman(q_target, mdp);
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      g(s, a) = -d(s, a) * (g(s, a) - q(s, a));
    }
  }
  return g;
}

/// One-hot stochastic gradient: magnitude `g` at (s, a), zero elsewhere.
struct SparseGradient {
  std::size_t s = 0;
  std::size_t a = 0;
  double g = 0.0;
};

/// g = -(r + gamma max_{a'} Q_k(s', a') - Q(s, a)) at coordinate (s, a).
/// An unbiased estimate of exact_gradient() when (s, a, s') is drawn from
/// d and P.
inline SparseGradient stochastic_gradient(const TransitionSample& sample,
                                          const QTable& q,
                                          const QTable& q_target,
                                          double gamma) {
  const double td = sample.reward +
                    gamma * q_target.max_value(sample.s_next) -
                    q(sample.s, sample.a);
  return {sample.s, sample.a, -td};
}

/// ||x||^2_{D^{-1}} = sum x(s, a)^2 / d_a(s).
inline double inverse_d_norm_sq(const QTable& x,
                                const SamplingDistribution& d) {
  double total = 0.0;
  for (std::size_t s = 0; s < x.num_states(); ++s) {
    for (std::size_t a = 0; a < x.num_actions(); ++a) {
      total += x(s, a) * x(s, a) / d(s, a);
    }
  }
  return total;
}

/// Upper envelope on E||g||^2 at (Q, Q_k):
///   12 gamma^2 |S||A| ||Q* - Q_k||_inf^2 + 8 ||grad F(Q)||^2_{D^{-1}}
///     + 18 |S||A| / (1 - gamma)^2.
inline double gradient_second_moment_bound(const QTable& q,
                                           const QTable& q_target,
                                           const QTable& q_star,
                                           const TabularMdp& mdp,
                                           const SamplingDistribution& d) {
  const double pairs = static_cast<double>(mdp.num_pairs());
  const double gamma = mdp.gamma;
  double target_gap = 0.0;
  for (std::size_t i = 0; i < q_star.size(); ++i) {
    target_gap = std::max(
        target_gap, std::abs(q_star.values()[i] - q_target.values()[i]));
  }
  const QTable grad = exact_gradient(q, q_target, mdp, d);
  return 12.0 * gamma * gamma * pairs * target_gap * target_gap +
         8.0 * inverse_d_norm_sq(grad, d) +
         18.0 * pairs / ((1.0 - gamma) * (1.0 - gamma));
}

}  // namespace pqlearn
