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
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pqlearn/mdp.hpp"

namespace pqlearn {

/// Dense |S| x |A| table of action values, laid out [s][a].
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t num_states, std::size_t num_actions, double fill = 0.0)
      : num_states_(num_states),
        num_actions_(num_actions),
        values_(num_states * num_actions, fill) {}
  QTable(std::size_t num_states, std::size_t num_actions,
         std::vector<double> values)
      : num_states_(num_states),
        num_actions_(num_actions),
        values_(std::move(values)) {
    if (values_.size() != num_states * num_actions) {
      throw std::invalid_argument("QTable: value count does not match shape");
    }
  }

  static QTable like(const TabularMdp& mdp, double fill = 0.0) {
    return QTable(mdp.num_states, mdp.num_actions, fill);
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t s, std::size_t a) {
    return values_[s * num_actions_ + a];
  }
  double operator()(std::size_t s, std::size_t a) const {
    return values_[s * num_actions_ + a];
  }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  /// max_a Q(s, a).
  double max_value(std::size_t s) const {
    const double* row = values_.data() + s * num_actions_;
    return *std::max_element(row, row + num_actions_);
  }

  /// Lowest-index argmax over actions.
  std::size_t argmax(std::size_t s) const {
    const double* row = values_.data() + s * num_actions_;
    return static_cast<std::size_t>(std::max_element(row, row + num_actions_) -
                                    row);
  }

  double inf_norm() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
  }

  bool same_shape(const QTable& o) const {
    return num_states_ == o.num_states_ && num_actions_ == o.num_actions_;
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> values_;
};

/// Deterministic stationary policy: one action per state.
struct Policy {
  std::vector<std::size_t> action;
  friend bool operator==(const Policy&, const Policy&) = default;
};

namespace detail {
inline void require_shape(const QTable& q, const TabularMdp& mdp,
                          const char* what) {
  if (q.num_states() != mdp.num_states || q.num_actions() != mdp.num_actions) {
    throw std::invalid_argument(std::string(what) +
                                ": QTable shape does not match MDP");
  }
}
}  // namespace detail

/// (TQ)(s, a) = sum_{s'} P_a(s, s') (r(s, a) + gamma max_{a'} Q(s', a')).
/// Rows are stochastic, so the reward term is taken outside the sum.
inline QTable apply_bellman(const QTable& q, const TabularMdp& mdp) {
  detail::require_shape(q, mdp, "apply_bellman");
  const std::size_t n = mdp.num_states;
  std::vector<double> next_value(n);
  for (std::size_t s = 0; s < n; ++s) next_value[s] = q.max_value(s);
  QTable out = QTable::like(mdp);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      const double* row = mdp.row(a, s);
      double expected = 0.0;
      for (std::size_t s2 = 0; s2 < n; ++s2) expected += row[s2] * next_value[s2];
      out(s, a) = mdp.r(s, a) + mdp.gamma * expected;
    }
  }
  return out;
}

inline Policy greedy_policy(const QTable& q) {
  Policy pi;
  pi.action.resize(q.num_states());
  for (std::size_t s = 0; s < q.num_states(); ++s) pi.action[s] = q.argmax(s);
  return pi;
}

/// V(s) = max_a Q(s, a).
inline std::vector<double> state_values(const QTable& q) {
  std::vector<double> v(q.num_states());
  for (std::size_t s = 0; s < q.num_states(); ++s) v[s] = q.max_value(s);
  return v;
}

struct ValueIterationResult {
  QTable q;
  std::size_t iterations = 0;
  /// ||TQ - Q||_inf of the returned table.
  double residual = 0.0;
};

inline constexpr double kOracleTolerance = 1e-10;

/// Value iteration with a certified stopping rule.
///
/// Iterates Q <- TQ until ||TQ_n - Q_n||_inf <= tol (1 - gamma) / (2 gamma)
/// and returns Q_{n+1} = TQ_n. Then ||Q_{n+1} - Q*||_inf <= tol / 2 and the
/// residual of the returned table is below the same threshold. When the
/// threshold falls under the rounding floor of the iterates (tiny tol or
/// gamma close to 1), iteration stops at that floor instead.
inline ValueIterationResult value_iteration(const TabularMdp& mdp,
                                            double tol = kOracleTolerance) {
  if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol <= 0");
  const double gamma = mdp.gamma;
  ValueIterationResult result;
  QTable q = QTable::like(mdp);
  if (gamma == 0.0) {
    result.q = apply_bellman(q, mdp);
    result.iterations = 1;
    return result;
  }
  const double threshold = tol * (1.0 - gamma) / (2.0 * gamma);
  constexpr std::size_t kMaxIterations = 10'000'000;
  for (std::size_t it = 1; it <= kMaxIterations; ++it) {
    QTable next = apply_bellman(q, mdp);
    double residual = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      residual = std::max(residual, std::abs(next.values()[i] - q.values()[i]));
    }
    const double floor =
        8.0 * std::numeric_limits<double>::epsilon() * next.inf_norm();
    q = std::move(next);
    if (residual <= std::max(threshold, floor)) {
      result.iterations = it;
      break;
    }
  }
  QTable tq = apply_bellman(q, mdp);
  double residual = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    residual = std::max(residual, std::abs(tq.values()[i] - q.values()[i]));
  }
  result.q = std::move(q);
  result.residual = residual;
  return result;
}

struct PolicyEvaluation {
  QTable q;
  std::vector<double> v;
};

/// Exact Q^pi and V^pi.
///
/// Solves the |S| system (I - gamma P_pi) V = r_pi by LU with iterative
/// refinement, then sets Q^pi = R + gamma P V^pi, which satisfies
/// Q^pi = R + gamma P Pi_pi Q^pi. The |S||A| residual is driven below 1e-10.
inline PolicyEvaluation policy_evaluation(const TabularMdp& mdp,
                                          const Policy& pi) {
  const std::size_t n = mdp.num_states;
  const std::size_t m = mdp.num_actions;
  if (pi.action.size() != n) {
    throw std::invalid_argument("policy_evaluation: policy length != |S|");
  }
  for (std::size_t a : pi.action) {
    if (a >= m) throw std::invalid_argument("policy_evaluation: bad action");
  }
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(size, size);
  Eigen::VectorXd rhs(size);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t a = pi.action[s];
    const double* row = mdp.row(a, s);
    for (std::size_t s2 = 0; s2 < n; ++s2) {
      system(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s2)) -=
          mdp.gamma * row[s2];
    }
    rhs(static_cast<Eigen::Index>(s)) = mdp.r(s, a);
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  Eigen::VectorXd v = lu.solve(rhs);

  auto q_from_v = [&](const Eigen::VectorXd& values) {
    QTable q = QTable::like(mdp);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t a = 0; a < m; ++a) {
        const double* row = mdp.row(a, s);
        double expected = 0.0;
        for (std::size_t s2 = 0; s2 < n; ++s2) {
          expected += row[s2] * values(static_cast<Eigen::Index>(s2));
        }
        q(s, a) = mdp.r(s, a) + mdp.gamma * expected;
      }
    }
    return q;
  };
  // Residual of Q = R + gamma P Pi_pi Q over all |S||A| coordinates.
  auto full_residual = [&](const QTable& q) {
    double worst = 0.0;
    std::vector<double> follow(n);
    for (std::size_t s = 0; s < n; ++s) follow[s] = q(s, pi.action[s]);
    for (std::size_t s = 0; s < n; ++s) {
      for (std::size_t a = 0; a < m; ++a) {
        const double* row = mdp.row(a, s);
        double expected = 0.0;
        for (std::size_t s2 = 0; s2 < n; ++s2) expected += row[s2] * follow[s2];
        worst = std::max(
            worst, std::abs(mdp.r(s, a) + mdp.gamma * expected - q(s, a)));
      }
    }
    return worst;
  };

  QTable q = q_from_v(v);
  for (int refine = 0; refine < 4 && full_residual(q) > 1e-10; ++refine) {
    const Eigen::VectorXd correction = lu.solve(rhs - system * v);
    v += correction;
    q = q_from_v(v);
  }
  PolicyEvaluation out;
  out.v.resize(n);
  for (std::size_t s = 0; s < n; ++s) out.v[s] = q(s, pi.action[s]);
  out.q = std::move(q);
  return out;
}

/// Stacked action-major forms: coordinate index is a * |S| + s.
struct MatrixForms {
  /// |S||A| x |S|, block a is P_a.
  Eigen::MatrixXd P;
  /// |S||A|, block a is R_a = r(., a).
  Eigen::VectorXd R;
  /// Diagonal of D, block a is d_a(.).
  Eigen::VectorXd D;
  /// |S| x |S||A|, row s is e_{pi(s)}^T (x) e_s^T.
  Eigen::MatrixXd Pi;
};

inline Eigen::Index stacked_index(std::size_t num_states, std::size_t s,
                                  std::size_t a) {
  return static_cast<Eigen::Index>(a * num_states + s);
}

inline Eigen::VectorXd to_stacked(const QTable& q) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(q.size()));
  for (std::size_t s = 0; s < q.num_states(); ++s) {
    for (std::size_t a = 0; a < q.num_actions(); ++a) {
      x(stacked_index(q.num_states(), s, a)) = q(s, a);
    }
  }
  return x;
}

inline QTable from_stacked(const Eigen::VectorXd& x, std::size_t num_states,
                           std::size_t num_actions) {
  QTable q(num_states, num_actions);
  for (std::size_t s = 0; s < num_states; ++s) {
    for (std::size_t a = 0; a < num_actions; ++a) {
      q(s, a) = x(stacked_index(num_states, s, a));
    }
  }
  return q;
}

inline MatrixForms matrix_forms(const TabularMdp& mdp,
                                const SamplingDistribution& d,
                                const Policy& pi) {
  if (!shapes_match(mdp, d) || pi.action.size() != mdp.num_states) {
    throw std::invalid_argument("matrix_forms: inconsistent shapes");
  }
  const std::size_t n = mdp.num_states;
  const std::size_t m = mdp.num_actions;
  const auto rows = static_cast<Eigen::Index>(n * m);
  MatrixForms f;
  f.P = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(n));
  f.R.resize(rows);
  f.D.resize(rows);
  f.Pi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), rows);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t s = 0; s < n; ++s) {
      const Eigen::Index i = stacked_index(n, s, a);
      for (std::size_t s2 = 0; s2 < n; ++s2) {
        f.P(i, static_cast<Eigen::Index>(s2)) = mdp.p(a, s, s2);
      }
      f.R(i) = mdp.r(s, a);
      f.D(i) = d(s, a);
    }
  }
  for (std::size_t s = 0; s < n; ++s) {
    f.Pi(static_cast<Eigen::Index>(s), stacked_index(n, s, pi.action[s])) = 1.0;
  }
  return f;
}

}  // namespace pqlearn
