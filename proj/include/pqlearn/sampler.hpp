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
#include <cstddef>
#include <vector>

#include "pqlearn/mdp.hpp"
#include "pqlearn/rng.hpp"

namespace pqlearn {

/// One i.i.d. draw: (s, a) ~ d, s' ~ P_a(s, .), reward r(s, a).
struct TransitionSample {
  std::size_t s = 0;
  std::size_t a = 0;
  std::size_t s_next = 0;
  double reward = 0.0;
};

/// Inverse-CDF sampler over the flattened state-action pairs and over each
/// transition row. Tables are built once; draws are O(log n).
class TransitionSampler {
 public:
  TransitionSampler(const TabularMdp& mdp, const SamplingDistribution& d)
      : mdp_(&mdp),
        pair_cdf_(cumulative(d.probs())),
        row_cdf_(mdp.transitions.size()) {
    const std::size_t n = mdp.num_states;
    for (std::size_t row = 0; row < mdp.num_actions * n; ++row) {
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += mdp.transitions[row * n + j];
        row_cdf_[row * n + j] = acc;
      }
      // Zero-probability tail entries stay below 1 so they are never chosen.
      for (std::size_t j = n; j-- > 0;) {
        if (mdp.transitions[row * n + j] > 0.0) {
          row_cdf_[row * n + j] = 1.0;
          for (std::size_t k = j + 1; k < n; ++k) row_cdf_[row * n + k] = 2.0;
          break;
        }
      }
    }
  }

  TransitionSample draw(Rng& rng) const {
    const std::size_t n = mdp_->num_states;
    const std::size_t m = mdp_->num_actions;
    const std::size_t pair = pick(pair_cdf_.begin(), pair_cdf_.end(), rng);
    TransitionSample out;
    out.s = pair / m;
    out.a = pair % m;
    const auto first = row_cdf_.begin() + (out.a * n + out.s) * n;
    out.s_next = pick(first, first + n, rng);
    out.reward = mdp_->r(out.s, out.a);
    return out;
  }

 private:
  static std::vector<double> cumulative(const std::vector<double>& p) {
    std::vector<double> c(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) c[i] = acc += p[i];
    c.back() = 1.0;
    return c;
  }

  template <typename It>
  static std::size_t pick(It first, It last, Rng& rng) {
    const double u = rng.uniform();
    const auto it = std::upper_bound(first, last, u);
    return static_cast<std::size_t>(std::min(it, last - 1) - first);
  }

  const TabularMdp* mdp_;
  std::vector<double> pair_cdf_;
  std::vector<double> row_cdf_;
};

}  // namespace pqlearn
