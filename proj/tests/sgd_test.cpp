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


#include "pqlearn/sgd.hpp"

#include <gtest/gtest.h>

#include "support/oracles.hpp"

namespace pqlearn {
namespace {

struct Instance {
  TabularMdp mdp;
  SamplingDistribution d;
};

Instance random_instance(std::uint64_t seed, std::size_t n, std::size_t m) {
  Rng rng(seed, Stream::kInit);
  return {random_mdp(seed, n, m, 0.3 + 0.6 * rng.uniform(),
                     1 + rng.below(n)),
          testing::random_distribution(rng, n, m)};
}

TEST(Loss, ZeroAtBellmanImage) {
  const auto [mdp, d] = random_instance(1, 4, 3);
  Rng rng(1);
  const QTable target = testing::random_table(rng, 4, 3, -3, 3);
  EXPECT_NEAR(loss(apply_bellman(target, mdp), target, mdp, d), 0.0, 1e-30);
}

TEST(Loss, DiscountFreeCollapsesToRewards) {
  auto [mdp, d] = random_instance(2, 3, 2);
  mdp.gamma = 0.0;
  Rng rng(2);
  const QTable target = testing::random_table(rng, 3, 2, -3, 3);
  double expected = 0.0;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      expected += d(s, a) * mdp.r(s, a) * mdp.r(s, a);
    }
  }
  EXPECT_NEAR(loss(QTable(3, 2), target, mdp, d), 0.5 * expected, 1e-15);
}

TEST(Loss, MatchesNestedLoopOracle) {
  Rng rng(3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [mdp, d] = random_instance(seed, 2, 2);
    const QTable q = testing::random_table(rng, 2, 2, -4, 4);
    const QTable target = testing::random_table(rng, 2, 2, -4, 4);
    EXPECT_NEAR(loss(q, target, mdp, d),
                testing::naive_loss(mdp, d, q.values(), target.values()),
                1e-13);
  }
}

TEST(Loss, MatchesStackedQuadraticForm) {
  const auto [mdp, d] = random_instance(4, 4, 2);
  Rng rng(4);
  const QTable q = testing::random_table(rng, 4, 2, -4, 4);
  const QTable target = testing::random_table(rng, 4, 2, -4, 4);
  const auto f = matrix_forms(mdp, d, greedy_policy(target));
  const Eigen::VectorXd r =
      f.R + mdp.gamma * f.P * f.Pi * to_stacked(target) - to_stacked(q);
  EXPECT_NEAR(loss(q, target, mdp, d), 0.5 * r.dot(f.D.asDiagonal() * r),
              1e-12);
}

TEST(ExactGradient, VanishesAtBellmanImage) {
  const auto [mdp, d] = random_instance(5, 3, 3);
  Rng rng(5);
  const QTable target = testing::random_table(rng, 3, 3, -3, 3);
  const QTable g = exact_gradient(apply_bellman(target, mdp), target, mdp, d);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(ExactGradient, MatchesCentralDifferences) {
  Rng rng(6);
  constexpr double h = 1e-6;
  for (int point = 0; point < 50; ++point) {
    const auto [mdp, d] = random_instance(100 + point, 3, 2);
    QTable q = testing::random_table(rng, 3, 2, -5, 5);
    const QTable target = testing::random_table(rng, 3, 2, -5, 5);
    const QTable g = exact_gradient(q, target, mdp, d);
    for (std::size_t i = 0; i < q.size(); ++i) {
      const double saved = q.values()[i];
      q.values()[i] = saved + h;
      const double up = loss(q, target, mdp, d);
      q.values()[i] = saved - h;
      const double down = loss(q, target, mdp, d);
      q.values()[i] = saved;
      const double fd = (up - down) / (2 * h);
      EXPECT_LE(std::abs(fd - g.values()[i]),
                1e-6 * std::max(1.0, std::abs(g.values()[i])));
    }
  }
}

TEST(ExactGradient, AffineWithDiagonalHessian) {
  const auto [mdp, d] = random_instance(7, 4, 3);
  Rng rng(7);
  const QTable target = testing::random_table(rng, 4, 3, -3, 3);
  for (int trial = 0; trial < 20; ++trial) {
    const QTable q1 = testing::random_table(rng, 4, 3, -3, 3);
    const QTable q2 = testing::random_table(rng, 4, 3, -3, 3);
    const QTable g1 = exact_gradient(q1, target, mdp, d);
    const QTable g2 = exact_gradient(q2, target, mdp, d);
    for (std::size_t i = 0; i < q1.size(); ++i) {
      const double secant = (g1.values()[i] - g2.values()[i]) /
                            (q1.values()[i] - q2.values()[i]);
      EXPECT_NEAR(secant, d.probs()[i], 1e-12);
      EXPECT_GE(secant, d.c_min() - 1e-12);
      EXPECT_LE(secant, d.l_max() + 1e-12);
    }
  }
}

TEST(ExactGradient, RejectsShapeMismatch) {
  const auto [mdp, d] = random_instance(8, 3, 2);
  EXPECT_THROW(exact_gradient(QTable(2, 2), QTable(3, 2), mdp, d),
               std::invalid_argument);
  EXPECT_THROW(loss(QTable(3, 2), QTable(3, 2), mdp, uniform_distribution(3, 3)),
               std::invalid_argument);
}

TEST(StochasticGradient, ZeroForZeroTdError) {
  QTable target(3, 2);
  target(2, 0) = 1.0;
  target(2, 1) = 4.0;
  QTable q(3, 2);
  q(0, 1) = 0.5 + 0.9 * 4.0;
  const auto g = stochastic_gradient({0, 1, 2, 0.5}, q, target, 0.9);
  EXPECT_EQ(g.s, 0u);
  EXPECT_EQ(g.a, 1u);
  EXPECT_EQ(g.g, 0.0);
}

TEST(StochasticGradient, DiscountFreeIsNegativeReward) {
  const auto g =
      stochastic_gradient({1, 0, 0, -0.75}, QTable(2, 1), QTable(2, 1, 3.0), 0.0);
  EXPECT_EQ(g.g, 0.75);
}

TEST(StochasticGradient, EnumeratedMeanEqualsExactGradient) {
  Rng rng(9);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [mdp, d] = random_instance(seed, 3, 2);
    const QTable q = testing::random_table(rng, 3, 2, -5, 5);
    const QTable target = testing::random_table(rng, 3, 2, -5, 5);
    std::vector<double> mean(6, 0.0);
    for (std::size_t s = 0; s < 3; ++s) {
      for (std::size_t a = 0; a < 2; ++a) {
        for (std::size_t s2 = 0; s2 < 3; ++s2) {
          const auto g = stochastic_gradient({s, a, s2, mdp.r(s, a)}, q,
                                             target, mdp.gamma);
          mean[g.s * 2 + g.a] += d(s, a) * mdp.p(a, s, s2) * g.g;
        }
      }
    }
    const QTable exact = exact_gradient(q, target, mdp, d);
    for (std::size_t i = 0; i < 6; ++i) {
      EXPECT_NEAR(mean[i], exact.values()[i], 1e-12);
    }
  }
}

TEST(StochasticGradient, SecondMomentWithinEnvelope) {
  Rng rng(10);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const std::size_t n = 2 + seed % 5;
    const std::size_t m = 1 + seed % 3;
    const auto [mdp, d] = random_instance(seed, n, m);
    const QTable q_star = value_iteration(mdp).q;
    const double scale = 1.0 / (1.0 - mdp.gamma);
    const QTable q = testing::random_table(rng, n, m, -3 * scale, 3 * scale);
    const QTable target = testing::random_table(rng, n, m, -scale, scale);
    const auto e = testing::enumerate_stochastic_gradient(mdp, d, q.values(),
                                                          target.values());
    EXPECT_LE(e.second_moment,
              gradient_second_moment_bound(q, target, q_star, mdp, d));
  }
}

}  // namespace
}  // namespace pqlearn
