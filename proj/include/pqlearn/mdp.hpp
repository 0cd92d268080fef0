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
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pqlearn/rng.hpp"

namespace pqlearn {

/// Tabular discounted MDP with deterministic rewards.
///
/// Storage is dense: `transitions` is laid out [a][s][s'] and `rewards` is
/// laid out [s][a]. Construction does not validate; call validate_mdp() on
/// anything that comes from outside the library. The operators accept
/// gamma in [0, 1) so the discount-free case can be exercised directly.
struct TabularMdp {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> transitions;
  std::vector<double> rewards;
  double gamma = 0.0;

  TabularMdp() = default;
  TabularMdp(std::size_t states, std::size_t actions, double discount)
      : num_states(states),
        num_actions(actions),
        transitions(actions * states * states, 0.0),
        rewards(states * actions, 0.0),
        gamma(discount) {}

  double& p(std::size_t a, std::size_t s, std::size_t s_next) {
    return transitions[(a * num_states + s) * num_states + s_next];
  }
  double p(std::size_t a, std::size_t s, std::size_t s_next) const {
    return transitions[(a * num_states + s) * num_states + s_next];
  }
  /// Row P_a(s, .) as a contiguous range.
  const double* row(std::size_t a, std::size_t s) const {
    return transitions.data() + (a * num_states + s) * num_states;
  }

  double& r(std::size_t s, std::size_t a) { return rewards[s * num_actions + a]; }
  double r(std::size_t s, std::size_t a) const {
    return rewards[s * num_actions + a];
  }

  std::size_t num_pairs() const { return num_states * num_actions; }

  friend bool operator==(const TabularMdp&, const TabularMdp&) = default;
};

inline constexpr double kStochasticTolerance = 1e-12;

/// First invariant violation found by validate_mdp().
struct MdpViolation {
  enum class Kind {
    kShape,
    kGamma,
    kNegativeProbability,
    kRowSum,
    kRewardBound,
    kNonFinite,
  };
  Kind kind;
  std::size_t action = 0;
  std::size_t state = 0;
  std::size_t next_state = 0;
  double value = 0.0;
  std::string message;
};

inline std::optional<MdpViolation> validate_mdp(const TabularMdp& mdp) {
  using Kind = MdpViolation::Kind;
  auto fail = [](Kind kind, std::size_t a, std::size_t s, std::size_t s2,
                 double value, std::string msg) {
    return std::optional<MdpViolation>(
        MdpViolation{kind, a, s, s2, value, std::move(msg)});
  };
  const std::size_t n = mdp.num_states;
  const std::size_t m = mdp.num_actions;
  if (n == 0 || m == 0 || mdp.transitions.size() != m * n * n ||
      mdp.rewards.size() != n * m) {
    return fail(Kind::kShape, 0, 0, 0, 0.0,
                "shape: tensors do not match num_states/num_actions");
  }
  if (!(mdp.gamma > 0.0 && mdp.gamma < 1.0)) {
    return fail(Kind::kGamma, 0, 0, 0, mdp.gamma,
                "gamma: must lie in (0, 1), got " + std::to_string(mdp.gamma));
  }
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t s = 0; s < n; ++s) {
      double sum = 0.0;
      for (std::size_t s2 = 0; s2 < n; ++s2) {
        const double v = mdp.p(a, s, s2);
        if (!std::isfinite(v)) {
          return fail(Kind::kNonFinite, a, s, s2, v,
                      "non-finite transition probability");
        }
        if (v < 0.0) {
          std::ostringstream os;
          os << "negative probability P[" << a << "][" << s << "][" << s2
             << "] = " << v;
          return fail(Kind::kNegativeProbability, a, s, s2, v, os.str());
        }
        sum += v;
      }
      if (std::abs(sum - 1.0) > kStochasticTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << "row sum: P[" << a << "][" << s << "] sums to " << sum;
        return fail(Kind::kRowSum, a, s, 0, sum, os.str());
      }
    }
  }
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < m; ++a) {
      const double v = mdp.r(s, a);
      if (!std::isfinite(v)) {
        return fail(Kind::kNonFinite, a, s, 0, v, "non-finite reward");
      }
      if (v < -1.0 || v > 1.0) {
        std::ostringstream os;
        os << "reward bound: r[" << s << "][" << a << "] = " << v
           << " outside [-1, 1]";
        return fail(Kind::kRewardBound, a, s, 0, v, os.str());
      }
    }
  }
  return std::nullopt;
}

/// Throws std::invalid_argument carrying the violation message.
inline void require_valid(const TabularMdp& mdp) {
  if (auto v = validate_mdp(mdp)) throw std::invalid_argument(v->message);
}

/// Garnet-style random MDP. Each row P_a(s, .) has exactly `branching`
/// nonzero entries at distinct states, weighted by a normalized vector of
/// uniform (0, 1] draws. Rewards are uniform on [-1, 1).
inline TabularMdp random_mdp(std::uint64_t seed, std::size_t num_states,
                             std::size_t num_actions, double gamma,
                             std::size_t branching) {
  if (num_states == 0 || num_actions == 0) {
    throw std::invalid_argument("random_mdp: sizes must be positive");
  }
  if (branching == 0 || branching > num_states) {
    throw std::invalid_argument("random_mdp: branching must be in [1, |S|]");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("random_mdp: gamma must lie in (0, 1)");
  }
  Rng rng(seed, Stream::kGenerator);
  TabularMdp mdp(num_states, num_actions, gamma);
  std::vector<std::size_t> states(num_states);
  std::vector<double> weights(branching);
  for (std::size_t a = 0; a < num_actions; ++a) {
    for (std::size_t s = 0; s < num_states; ++s) {
      for (std::size_t i = 0; i < num_states; ++i) states[i] = i;
      // Partial Fisher-Yates: first `branching` entries are the support.
      for (std::size_t i = 0; i < branching; ++i) {
        const std::size_t j = i + rng.below(num_states - i);
        std::swap(states[i], states[j]);
      }
      double total = 0.0;
      for (auto& w : weights) {
        w = rng.uniform_pos();
        total += w;
      }
      for (std::size_t i = 0; i < branching; ++i) {
        mdp.p(a, s, states[i]) = weights[i] / total;
      }
    }
  }
  for (auto& r : mdp.rewards) r = rng.uniform(-1.0, 1.0);
  return mdp;
}

/// Fixed state-action sampling distribution d_a(s), laid out [s][a].
class SamplingDistribution {
 public:
  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  const std::vector<double>& probs() const { return probs_; }
  double operator()(std::size_t s, std::size_t a) const {
    return probs_[s * num_actions_ + a];
  }
  /// c: smallest state-action probability.
  double c_min() const { return c_min_; }
  /// L: largest state-action probability.
  double l_max() const { return l_max_; }

  friend bool operator==(const SamplingDistribution&,
                         const SamplingDistribution&) = default;

 private:
  friend SamplingDistribution make_distribution(std::size_t, std::size_t,
                                                std::vector<double>);
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> probs_;
  double c_min_ = 0.0;
  double l_max_ = 0.0;
};

inline constexpr double kDistributionSumTolerance = 1e-9;

/// Checks positivity and normalization (within 1e-9), then renormalizes by
/// exact division and records c and L. Vectors whose sum is already 1 up to
/// rounding are stored unchanged, so a saved distribution loads bit for bit.
inline SamplingDistribution make_distribution(std::size_t num_states,
                                              std::size_t num_actions,
                                              std::vector<double> probs) {
  if (num_states == 0 || num_actions == 0 ||
      probs.size() != num_states * num_actions) {
    throw std::invalid_argument("distribution: shape mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!std::isfinite(probs[i]) || probs[i] <= 0.0) {
      std::ostringstream os;
      os << "distribution: entry [" << i / num_actions << "]["
         << i % num_actions << "] = " << probs[i] << " is not positive";
      throw std::invalid_argument(os.str());
    }
    total += probs[i];
  }
  if (std::abs(total - 1.0) > kDistributionSumTolerance) {
    std::ostringstream os;
    os.precision(17);
    os << "distribution: entries sum to " << total << ", expected 1";
    throw std::invalid_argument(os.str());
  }
  const double rounding = std::numeric_limits<double>::epsilon() *
                          static_cast<double>(probs.size());
  if (std::abs(total - 1.0) > rounding) {
    for (auto& p : probs) p /= total;
  }

  SamplingDistribution d;
  d.num_states_ = num_states;
  d.num_actions_ = num_actions;
  const auto [lo, hi] = std::minmax_element(probs.begin(), probs.end());
  d.c_min_ = *lo;
  d.l_max_ = *hi;
  d.probs_ = std::move(probs);
  return d;
}

inline SamplingDistribution uniform_distribution(std::size_t num_states,
                                                 std::size_t num_actions) {
  const double p = 1.0 / static_cast<double>(num_states * num_actions);
  return make_distribution(num_states, num_actions,
                           std::vector<double>(num_states * num_actions, p));
}

inline bool shapes_match(const TabularMdp& mdp, const SamplingDistribution& d) {
  return mdp.num_states == d.num_states() && mdp.num_actions == d.num_actions();
}

}  // namespace pqlearn
