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
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pqlearn/bellman.hpp"
#include "pqlearn/mdp.hpp"
#include "pqlearn/metrics.hpp"
#include "pqlearn/rng.hpp"
#include "pqlearn/sampler.hpp"
#include "pqlearn/sgd.hpp"

namespace pqlearn {

// ---------------------------------------------------------------------------
// Step sizes and bound formulas
// ---------------------------------------------------------------------------

/// beta_t = beta / (lambda + t).
struct StepSchedule {
  double beta = 1.0;
  double lambda = 1.0;

  double step(std::uint64_t t) const {
    return beta / (lambda + static_cast<double>(t));
  }
  double initial() const { return beta / lambda; }

  friend bool operator==(const StepSchedule&, const StepSchedule&) = default;
};

/// beta = 2 / c, lambda = 16 L / c^2, hence beta_0 = c / (8 L).
inline StepSchedule theory_schedule(double c, double l) {
  if (!(c > 0.0) || !(l >= c)) {
    throw std::invalid_argument("theory_schedule: need 0 < c <= L");
  }
  return {2.0 / c, 16.0 * l / (c * c)};
}

inline StepSchedule theory_schedule(const SamplingDistribution& d) {
  return theory_schedule(d.c_min(), d.l_max());
}

/// beta_0 <= c / (8 L), the step-size cap the inner convergence rate needs.
inline bool is_theory_compliant(const StepSchedule& schedule,
                                const SamplingDistribution& d) {
  return schedule.beta > 0.0 && schedule.lambda > 0.0 &&
         schedule.initial() <=
             d.c_min() / (8.0 * d.l_max()) * (1.0 + 1e-12);
}

namespace detail {
inline void require_accuracy(double epsilon, double gamma) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("gamma must lie in (0, 1)");
  }
}

/// Ceiling that treats values within 1e-12 (relative) of an integer as that
/// integer, so rounding noise in c^3 and friends does not add a sample.
inline std::uint64_t checked_ceil(double x, const char* what) {
  const double nearest = std::round(x);
  const double c = std::abs(x - nearest) <= 1e-12 * std::max(1.0, std::abs(x))
                       ? nearest
                       : std::ceil(x);
  if (!(c < 0x1.0p63)) {
    throw std::overflow_error(std::string(what) + ": value exceeds 2^63");
  }
  return static_cast<std::uint64_t>(c);
}
}  // namespace detail

/// Real-valued inner budget 2048 |S||A| L / (eps^2 (1 - gamma)^4 c^3).
inline double inner_steps_bound(double epsilon, double gamma,
                                std::size_t num_states,
                                std::size_t num_actions, double c, double l) {
  detail::require_accuracy(epsilon, gamma);
  const double pairs = static_cast<double>(num_states * num_actions);
  const double one_minus = 1.0 - gamma;
  return 2048.0 * pairs / (epsilon * epsilon * std::pow(one_minus, 4)) *
         (l / (c * c * c));
}

/// Inner steps per outer iteration sufficient for E||Q_T - Q*||_inf <= eps.
inline std::uint64_t required_inner_steps(double epsilon, double gamma,
                                          std::size_t num_states,
                                          std::size_t num_actions, double c,
                                          double l) {
  return detail::checked_ceil(
      inner_steps_bound(epsilon, gamma, num_states, num_actions, c, l),
      "required_inner_steps");
}

/// Real-valued outer budget ln(4 / ((1 - gamma) eps)) / ln(1 / gamma),
/// clamped at zero once eps >= 4 / (1 - gamma).
inline double outer_iters_bound(double epsilon, double gamma) {
  detail::require_accuracy(epsilon, gamma);
  const double ratio = 4.0 / ((1.0 - gamma) * epsilon);
  if (ratio <= 1.0) return 0.0;
  return std::log(ratio) / std::log(1.0 / gamma);
}

inline std::uint64_t required_outer_iters(double epsilon, double gamma) {
  return detail::checked_ceil(outer_iters_bound(epsilon, gamma),
                              "required_outer_iters");
}

/// Total samples for an eps-optimal Q-function: the product of the two
/// un-rounded budgets.
inline double sample_complexity_q(double epsilon, double gamma,
                                  std::size_t num_states,
                                  std::size_t num_actions, double c, double l) {
  return inner_steps_bound(epsilon, gamma, num_states, num_actions, c, l) *
         outer_iters_bound(epsilon, gamma);
}

/// Total samples for an eps-optimal greedy policy (eps <= 1):
///   8192 |S||A| L / (eps^2 (1-gamma)^6 ln(1/gamma) c^3)
///     * ln(8 / ((1-gamma)^2 eps)).
inline double sample_complexity_policy(double epsilon, double gamma,
                                       std::size_t num_states,
                                       std::size_t num_actions, double c,
                                       double l) {
  detail::require_accuracy(epsilon, gamma);
  if (epsilon > 1.0) {
    throw std::invalid_argument("sample_complexity_policy: epsilon must be <= 1");
  }
  const double pairs = static_cast<double>(num_states * num_actions);
  const double one_minus = 1.0 - gamma;
  return 8192.0 * pairs /
         (epsilon * epsilon * std::pow(one_minus, 6) * std::log(1.0 / gamma)) *
         (l / (c * c * c)) *
         std::log(8.0 / (one_minus * one_minus * epsilon));
}

/// Envelope on E||TQ_k - Q_{k,t}||_D^2 under the theory schedule:
///   512 |S||A| L / ((1 - gamma)^2 c^3) / (lambda + t).
inline double inner_error_bound(std::uint64_t t, double gamma,
                                std::size_t num_states,
                                std::size_t num_actions, double c, double l) {
  const double pairs = static_cast<double>(num_states * num_actions);
  const double lambda = theory_schedule(c, l).lambda;
  return 512.0 * pairs / ((1.0 - gamma) * (1.0 - gamma)) * (l / (c * c * c)) /
         (lambda + static_cast<double>(t));
}

/// sum_{k=1}^T gamma^{T-k} sqrt(eps_k) + gamma^T e_0 for per-iteration
/// residual levels eps_1..eps_T.
inline double outer_error_bound(std::span<const double> epsilons,
                                double initial_error, double gamma) {
  double bound = initial_error;
  for (double eps : epsilons) bound = gamma * bound + std::sqrt(eps);
  return bound;
}

/// Whether eps <= (1 - gamma)^2, the regime in which the iterates stay
/// bounded in mean square. The boundary is accepted up to a few ulps, so
/// eps = 0.01 counts as inside for gamma = 0.9.
inline bool epsilon_in_bounded_regime(double epsilon, double gamma) {
  const double edge = (1.0 - gamma) * (1.0 - gamma);
  return epsilon <= edge * (1.0 + 8.0 * std::numeric_limits<double>::epsilon());
}

// ---------------------------------------------------------------------------
// Runs
// ---------------------------------------------------------------------------

enum class InitKind { kZeros, kConstant, kCustom };

struct PqConfig {
  std::size_t outer_iters = 1;
  /// One entry per outer iteration, or a single entry broadcast to all.
  std::vector<std::uint64_t> inner_steps{1};
  StepSchedule schedule;
  InitKind init = InitKind::kZeros;
  double init_value = 0.0;
  QTable init_table;
  std::uint64_t seed = 0;
  /// Record cadence in samples.
  std::uint64_t eval_every = 1000;
  /// Index beta_t by total samples instead of restarting t at each outer
  /// iteration.
  bool global_step_index = false;
  /// Emit a trace row at every outer boundary and per-iteration records.
  bool outer_records = true;
  /// Also evaluate the greedy policy at outer boundaries (final row always
  /// carries v_gap when an oracle is supplied).
  bool boundary_v_gap = false;

  std::uint64_t steps_at(std::size_t k) const {
    return inner_steps.size() == 1 ? inner_steps.front() : inner_steps.at(k);
  }
  std::uint64_t total_samples() const {
    std::uint64_t total = 0;
    for (std::size_t k = 0; k < outer_iters; ++k) total += steps_at(k);
    return total;
  }
};

inline QTable initial_table(const PqConfig& cfg, const TabularMdp& mdp) {
  switch (cfg.init) {
    case InitKind::kZeros:
      return QTable::like(mdp);
    case InitKind::kConstant:
      return QTable::like(mdp, cfg.init_value);
    case InitKind::kCustom:
      return cfg.init_table;
  }
  return QTable::like(mdp);
}

inline void validate_config(const PqConfig& cfg, const TabularMdp& mdp,
                            const SamplingDistribution& d) {
  require_valid(mdp);
  if (!shapes_match(mdp, d)) {
    throw std::invalid_argument("config: distribution shape does not match MDP");
  }
  if (cfg.outer_iters == 0) throw std::invalid_argument("config: T must be >= 1");
  if (cfg.inner_steps.size() != 1 && cfg.inner_steps.size() != cfg.outer_iters) {
    throw std::invalid_argument("config: inner_steps must have 1 or T entries");
  }
  for (auto n : cfg.inner_steps) {
    if (n == 0) throw std::invalid_argument("config: inner steps must be >= 1");
  }
  if (!(cfg.schedule.beta > 0.0) || !(cfg.schedule.lambda > 0.0)) {
    throw std::invalid_argument("config: beta and lambda must be positive");
  }
  if (cfg.eval_every == 0) {
    throw std::invalid_argument("config: eval_every must be >= 1");
  }
  const QTable q0 = initial_table(cfg, mdp);
  if (!q0.same_shape(QTable::like(mdp))) {
    throw std::invalid_argument("config: initial table shape does not match MDP");
  }
  const double bound = 1.0 / (1.0 - mdp.gamma);
  for (double v : q0.values()) {
    if (!std::isfinite(v) || std::abs(v) > bound) {
      throw std::invalid_argument(
          "config: initial Q entries must lie in [-1/(1-gamma), 1/(1-gamma)]");
    }
  }
}

/// Exact optimum used to score runs.
struct Oracle {
  QTable q_star;
  std::vector<double> v_star;
  double tolerance = kOracleTolerance;
};

inline Oracle make_oracle(const TabularMdp& mdp,
                          double tol = kOracleTolerance) {
  Oracle o;
  o.q_star = value_iteration(mdp, tol).q;
  o.v_star = state_values(o.q_star);
  o.tolerance = tol;
  return o;
}

inline constexpr double kNotComputed = std::numeric_limits<double>::quiet_NaN();

/// One checkpoint of a run. Error columns are NaN without an oracle;
/// v_gap is NaN where not evaluated.
struct TraceRecord {
  std::uint64_t samples_used = 0;
  std::size_t outer_k = 0;
  std::uint64_t inner_t = 0;
  double q_inf_error = kNotComputed;
  double q_l2_sq_error = kNotComputed;
  double d_norm_sq_error = kNotComputed;
  /// F(Q_{k,t}) = 1/2 ||TQ_k - Q_{k,t}||_D^2
  double loss = 0.0;
  double v_gap = kNotComputed;
};

/// State of the synchronized target Q_k.
struct OuterRecord {
  std::size_t k = 0;
  /// ||Q_k - Q*||_inf (NaN without oracle)
  double q_inf_error = kNotComputed;
  /// ||Q_k - TQ_{k-1}||_2^2, NaN for k = 0
  double epsilon = kNotComputed;
};

struct RunTrace {
  std::vector<TraceRecord> records;
  std::vector<OuterRecord> outer;
  QTable final_q;
  Policy final_policy;
  std::uint64_t samples_used = 0;
};

/// Periodic Q-learning.
///
/// For k = 0..T-1 the target Q_k is frozen and N_k single-sample SGD steps
///   Q(s, a) += beta_t (r(s, a) + gamma max_{a'} Q_k(s', a') - Q(s, a))
/// are applied to the online table, which starts from Q_k. Then
/// Q_{k+1} = Q_{k, N_k}. The step index t restarts at every outer
/// iteration unless cfg.global_step_index is set.
inline RunTrace run_pq(const TabularMdp& mdp, const SamplingDistribution& d,
                       const PqConfig& cfg, const Oracle* oracle = nullptr) {
  validate_config(cfg, mdp, d);
  const std::size_t n = mdp.num_states;
  const double gamma = mdp.gamma;
  const TransitionSampler sampler(mdp, d);
  Rng rng(cfg.seed, Stream::kSampling);

  RunTrace trace;
  QTable q = initial_table(cfg, mdp);
  std::uint64_t samples = 0;

  auto make_record = [&](std::size_t k, std::uint64_t t,
                         const QTable& bellman_target, bool with_v_gap) {
    TraceRecord rec;
    rec.samples_used = samples;
    rec.outer_k = k;
    rec.inner_t = t;
    double loss_sum = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double diff = bellman_target.values()[i] - q.values()[i];
      loss_sum += d.probs()[i] * diff * diff;
    }
    rec.loss = 0.5 * loss_sum;
    if (oracle != nullptr) {
      const ErrorReport e = norms(q, oracle->q_star, d);
      rec.q_inf_error = e.q_inf_error;
      rec.q_l2_sq_error = e.q_l2_error * e.q_l2_error;
      rec.d_norm_sq_error = e.d_norm_error;
      if (with_v_gap) rec.v_gap = policy_gap(mdp, q, oracle->q_star);
    }
    return rec;
  };
  auto outer_record = [&](std::size_t k, double epsilon) {
    OuterRecord rec;
    rec.k = k;
    rec.epsilon = epsilon;
    if (oracle != nullptr) {
      rec.q_inf_error = norms(q, oracle->q_star, d).q_inf_error;
    }
    return rec;
  };

  if (cfg.outer_records) trace.outer.push_back(outer_record(0, kNotComputed));

  std::vector<double> target_values(n);
  std::optional<QTable> bellman_target;
  for (std::size_t k = 0; k < cfg.outer_iters; ++k) {
    const QTable target = q;
    for (std::size_t s = 0; s < n; ++s) target_values[s] = target.max_value(s);
    bellman_target.reset();
    auto tq = [&]() -> const QTable& {
      if (!bellman_target) bellman_target = apply_bellman(target, mdp);
      return *bellman_target;
    };
    if (k == 0) trace.records.push_back(make_record(0, 0, tq(), false));

    const std::uint64_t steps = cfg.steps_at(k);
    bool last_recorded = false;
    for (std::uint64_t t = 0; t < steps; ++t) {
      const TransitionSample x = sampler.draw(rng);
      const double beta =
          cfg.schedule.step(cfg.global_step_index ? samples : t);
      double& cell = q(x.s, x.a);
      cell += beta * (x.reward + gamma * target_values[x.s_next] - cell);
      ++samples;
      last_recorded = samples % cfg.eval_every == 0;
      if (last_recorded) {
        trace.records.push_back(
            make_record(k, t + 1, tq(), cfg.boundary_v_gap && t + 1 == steps));
      }
    }
    const bool final_iteration = k + 1 == cfg.outer_iters;
    if (cfg.outer_records || final_iteration) {
      if (!last_recorded) {
        trace.records.push_back(
            make_record(k, steps, tq(), cfg.boundary_v_gap || final_iteration));
      } else if (final_iteration && oracle != nullptr &&
                 std::isnan(trace.records.back().v_gap)) {
        trace.records.back().v_gap = policy_gap(mdp, q, oracle->q_star);
      }
    }
    if (cfg.outer_records) {
      trace.outer.push_back(outer_record(k + 1, sq_distance(q, tq())));
    }
  }

  trace.samples_used = samples;
  trace.final_policy = greedy_policy(q);
  trace.final_q = std::move(q);
  return trace;
}

/// Standard Q-learning: the target is resynchronized after every sample and
/// the step index advances globally.
struct StandardQConfig {
  std::uint64_t total_steps = 1;
  StepSchedule schedule;
  InitKind init = InitKind::kZeros;
  double init_value = 0.0;
  QTable init_table;
  std::uint64_t seed = 0;
  std::uint64_t eval_every = 1000;
};

/// The PQ configuration run_standard_q() executes: T = M, N_k = 1, global
/// step index, no per-iteration boundary rows.
inline PqConfig as_pq_config(const StandardQConfig& cfg) {
  PqConfig pq;
  pq.outer_iters = static_cast<std::size_t>(cfg.total_steps);
  pq.inner_steps = {1};
  pq.schedule = cfg.schedule;
  pq.init = cfg.init;
  pq.init_value = cfg.init_value;
  pq.init_table = cfg.init_table;
  pq.seed = cfg.seed;
  pq.eval_every = cfg.eval_every;
  pq.global_step_index = true;
  pq.outer_records = false;
  return pq;
}

inline RunTrace run_standard_q(const TabularMdp& mdp,
                               const SamplingDistribution& d,
                               const StandardQConfig& cfg,
                               const Oracle* oracle = nullptr) {
  if (cfg.total_steps == 0) {
    throw std::invalid_argument("run_standard_q: total_steps must be >= 1");
  }
  return run_pq(mdp, d, as_pq_config(cfg), oracle);
}

}  // namespace pqlearn
