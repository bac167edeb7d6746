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

#include "xfer/spline.hpp"

#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "xfer/error.hpp"

namespace xfer {
namespace {

// Independent oracle: assemble the dense 4(N-1) system in monomial form
// (interpolation, C1 and C2 at interior knots, zero second derivative at
// both ends) and solve with partial pivoting.
std::vector<double> dense_spline_coefficients(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t pieces = x.size() - 1, n = 4 * pieces;
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  std::size_t row = 0;
  auto put = [&](std::size_t piece, double at, int deriv, double sign) {
    const double c[4][4] = {{1, at, at * at, at * at * at},
                            {0, 1, 2 * at, 3 * at * at},
                            {0, 0, 2, 6 * at},
                            {0, 0, 0, 6}};
    for (int k = 0; k < 4; ++k) a[row][4 * piece + k] += sign * c[deriv][k];
  };
  for (std::size_t i = 0; i < pieces; ++i) {
    put(i, x[i], 0, 1.0);
    a[row++][n] = y[i];
    put(i, x[i + 1], 0, 1.0);
    a[row++][n] = y[i + 1];
  }
  for (std::size_t i = 1; i < pieces; ++i)
    for (int d = 1; d <= 2; ++d) {
      put(i - 1, x[i], d, 1.0);
      put(i, x[i], d, -1.0);
      ++row;
    }
  put(0, x.front(), 2, 1.0);
  ++row;
  put(pieces - 1, x.back(), 2, 1.0);
  ++row;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= n; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i][n] / a[i][i];
  return out;
}

double monomial_eval(const std::vector<double>& coef, std::size_t piece, double at) {
  return coef[4 * piece] + at * (coef[4 * piece + 1] + at * (coef[4 * piece + 2] + at * coef[4 * piece + 3]));
}

TEST(Spline1D, ThreePointHandSolution) {
  const std::vector<std::pair<double, double>> pts{{1, 1}, {2, 3}, {3, 2}};
  const CubicSpline1D s = fit_spline_1d(pts);
  ASSERT_EQ(s.pieces().size(), 2u);
  EXPECT_EQ(s.unknown_count(), 8u);
  const SplinePiece& a = s.pieces()[0];
  const SplinePiece& b = s.pieces()[1];
  EXPECT_NEAR(a.c0, 1.0, 1e-12);
  EXPECT_NEAR(a.c1, 2.75, 1e-12);
  EXPECT_NEAR(a.c2, 0.0, 1e-12);
  EXPECT_NEAR(a.c3, -0.75, 1e-12);
  EXPECT_NEAR(b.c0, 3.0, 1e-12);
  EXPECT_NEAR(b.c1, 0.5, 1e-12);
  EXPECT_NEAR(b.c2, -2.25, 1e-12);
  EXPECT_NEAR(b.c3, 0.75, 1e-12);
  EXPECT_NEAR(s(1.5), 1.0 + 2.75 * 0.5 - 0.75 * 0.125, 1e-12);
}

TEST(Spline1D, MatchesDenseMonomialSystem) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> gap(0.3, 2.0), val(-50.0, 50.0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 3 + trial % 9;
    std::vector<double> x{0.0}, y;
    while (x.size() < n) x.push_back(x.back() + gap(rng));
    std::vector<std::pair<double, double>> pts;
    for (double xi : x) {
      y.push_back(val(rng));
      pts.emplace_back(xi, y.back());
    }
    const CubicSpline1D s = fit_spline_1d(pts);
    const auto coef = dense_spline_coefficients(x, y);
    for (std::size_t i = 0; i + 1 < n; ++i)
      for (double f : {0.0, 0.25, 0.5, 0.9}) {
        const double at = x[i] + f * (x[i + 1] - x[i]);
        // The monomial basis is poorly conditioned far from the origin.
        EXPECT_NEAR(s(at), monomial_eval(coef, i, at), 1e-6);
      }
  }
}

TEST(Spline1D, UnsortedAndDuplicateKnots) {
  const std::vector<std::pair<double, double>> pts{{3, 2}, {1, 0}, {2, 3}, {1, 2}};
  const CubicSpline1D s = fit_spline_1d(pts);
  ASSERT_EQ(s.knots().size(), 3u);
  EXPECT_DOUBLE_EQ(s(1.0), 1.0);
  EXPECT_DOUBLE_EQ(s(2.0), 3.0);
}

TEST(Spline1D, LinearFallbackForTwoKnots) {
  const std::vector<std::pair<double, double>> pts{{0, 1}, {2, 5}};
  const CubicSpline1D s = fit_spline_1d(pts);
  EXPECT_TRUE(s.linear_fallback());
  EXPECT_NEAR(s(1.0), 3.0, 1e-12);
}

TEST(Spline1D, RoundTripThroughPieces) {
  const std::vector<std::pair<double, double>> pts{{1, 1}, {2, 3}, {4, 2}, {8, 7}};
  const CubicSpline1D s = fit_spline_1d(pts);
  const CubicSpline1D r = CubicSpline1D::from_pieces(s.knots(), s.values(),
                                                     {s.pieces().begin(), s.pieces().end()});
  for (double x = 1.0; x <= 8.0; x += 0.37) EXPECT_EQ(s(x), r(x));
}

TEST(Surface2D, ReproducesBilinearAndSeparableData) {
  const std::vector<double> xs{1, 2, 4, 8}, ys{1, 3, 4, 9, 16};
  std::vector<double> v, sep;
  for (double x : xs)
    for (double y : ys) {
      v.push_back(3.0 + 2.0 * x - y + 0.5 * x * y);
      sep.push_back(std::sin(x) * std::cos(y / 4.0));
    }
  const BicubicGridSurface g = fit_surface_2d(xs, ys, v);
  for (double x = 1.0; x <= 8.0; x += 0.31)
    for (double y = 1.0; y <= 16.0; y += 0.77)
      EXPECT_NEAR(g(x, y), 3.0 + 2.0 * x - y + 0.5 * x * y, 1e-9);

  // Tensor product of the 1-D splines through each factor.
  std::vector<std::pair<double, double>> fx, fy;
  for (double x : xs) fx.emplace_back(x, std::sin(x));
  for (double y : ys) fy.emplace_back(y, std::cos(y / 4.0));
  const CubicSpline1D sx = fit_spline_1d(fx), sy = fit_spline_1d(fy);
  const BicubicGridSurface gs = fit_surface_2d(xs, ys, sep);
  for (double x = 1.0; x <= 8.0; x += 0.43)
    for (double y = 1.0; y <= 16.0; y += 0.91) EXPECT_NEAR(gs(x, y), sx(x) * sy(y), 1e-10);
}

TEST(Surface2D, RejectsTooFewGridLines) {
  const std::vector<double> xs{1, 2}, ys{1, 2, 3};
  const std::vector<double> v(6, 1.0);
  EXPECT_THROW(fit_surface_2d(xs, ys, v), Error);
}

}  // namespace
}  // namespace xfer
