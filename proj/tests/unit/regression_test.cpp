// Copyright 2026 The xfer-tune Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "xfer/regression.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "xfer/error.hpp"

namespace xfer {
namespace {

std::vector<ThroughputSample> grid(double (*f)(double, double, double)) {
  std::vector<ThroughputSample> s;
  for (double p : {1, 2, 4, 8})
    for (double cc : {1, 3, 5, 9})
      for (double pp : {1, 2, 6, 16}) s.push_back({p, cc, pp, f(p, cc, pp)});
  return s;
}

TEST(Regression, TermCounts) {
  EXPECT_EQ(regression_terms(RegressionKind::kConstant).size(), 1u);
  EXPECT_EQ(regression_terms(RegressionKind::kQuadratic).size(), 10u);
  EXPECT_EQ(regression_terms(RegressionKind::kCubic).size(), 20u);
}

TEST(Regression, RecoversExactQuadratic) {
  auto f = [](double p, double cc, double pp) { return 5 + 2 * p - cc + 0.5 * p * pp - 0.1 * cc * cc; };
  const auto s = grid(f);
  const RegressionModel m = fit_regression(s, RegressionKind::kQuadratic);
  EXPECT_NEAR(m.r_squared, 1.0, 1e-9);
  EXPECT_NEAR(m.eval(3, 4, 5), f(3, 4, 5), 1e-8);
}

TEST(Regression, CubicContainsQuadratic) {
  auto f = [](double p, double cc, double pp) { return p * cc * pp + 0.01 * p * p * p - cc; };
  const auto s = grid(f);
  const RegressionModel c = fit_regression(s, RegressionKind::kCubic);
  const RegressionModel q = fit_regression(s, RegressionKind::kQuadratic);
  EXPECT_NEAR(c.eval(5, 2, 3), f(5, 2, 3), 1e-7);
  EXPECT_GE(c.r_squared, q.r_squared);
}

TEST(Regression, TooFewPointsIsPrecondition) {
  std::vector<ThroughputSample> s{{1, 1, 1, 1}, {2, 2, 2, 2}};
  EXPECT_THROW(fit_regression(s, RegressionKind::kQuadratic), PreconditionError);
}

TEST(Regression, RankDeficientNamesTerms) {
  // pp never varies, so every pp term is unidentifiable.
  std::vector<ThroughputSample> s;
  for (double p = 1; p <= 5; ++p)
    for (double cc = 1; cc <= 5; ++cc) s.push_back({p, cc, 4, p + cc});
  EXPECT_THROW(fit_regression(s, RegressionKind::kQuadratic), DataError);
}

}  // namespace
}  // namespace xfer
