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

#include "pqlearn/bellman.hpp"
#include "pqlearn/mdp.hpp"

namespace pqlearn {

/// Error functionals of one realization. Expectations are seed averages
/// taken by the caller.
struct ErrorReport {
  /// ||Q - Q*||_inf
  double q_inf_error = 0.0;
  /// ||Q - Q*||_2
  double q_l2_error = 0.0;
  /// ||Q - Q*||_D^2
  double d_norm_error = 0.0;
  /// ||V^{pi_Q} - V*||_inf
  double v_gap = 0.0;
  /// ||Q_{k+1} - TQ_k||_2^2
  double epsilon_k = 0.0;
};

/// Errors of q against ref in the norms listed in ErrorReport.
inline ErrorReport norms(const QTable& q, const QTable& ref,
                         const SamplingDistribution& d) {
  if (!q.same_shape(ref) || q.num_states() != d.num_states() ||
      q.num_actions() != d.num_actions()) {
    throw std::invalid_argument("norms: shape mismatch");
  }
  ErrorReport out;
  double l2_sq = 0.0;
  for (std::size_t s = 0; s < q.num_states(); ++s) {
    for (std::size_t a = 0; a < q.num_actions(); ++a) {
      const double diff = q(s, a) - ref(s, a);
      out.q_inf_error = std::max(out.q_inf_error, std::abs(diff));
      l2_sq += diff * diff;
      out.d_norm_error += d(s, a) * diff * diff;
    }
  }
  out.q_l2_error = std::sqrt(l2_sq);
  return out;
}

inline double sq_distance(const QTable& x, const QTable& y) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x.values()[i] - y.values()[i];
    total += diff * diff;
  }
  return total;
}

/// ||V^{pi_Q} - V*||_inf where pi_Q is greedy in q and V* = max_a q_star.
inline double policy_gap(const TabularMdp& mdp, const QTable& q,
                         const QTable& q_star) {
  detail::require_shape(q, mdp, "policy_gap");
  detail::require_shape(q_star, mdp, "policy_gap");
  const PolicyEvaluation eval = policy_evaluation(mdp, greedy_policy(q));
  double gap = 0.0;
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    gap = std::max(gap, std::abs(eval.v[s] - q_star.max_value(s)));
  }
  return gap;
}

/// ||q_new - T q_target||_2^2.
inline double inner_residual(const QTable& q_new, const QTable& q_target,
                             const TabularMdp& mdp) {
  detail::require_shape(q_new, mdp, "inner_residual");
  return sq_distance(q_new, apply_bellman(q_target, mdp));
}

}  // namespace pqlearn
