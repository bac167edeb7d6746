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

#include "xfer/surface.hpp"

#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "xfer/error.hpp"

namespace xfer {
namespace {

using Fn = double (*)(double, double, double);

std::vector<NodeStats> lattice(const std::vector<int>& ps, const std::vector<int>& ccs,
                               const std::vector<int>& pps, Fn f, double sigma = 0.0) {
  std::vector<NodeStats> out;
  for (int p : ps)
    for (int cc : ccs)
      for (int pp : pps) out.push_back({{cc, p, pp}, 3, f(p, cc, pp), sigma});
  return out;
}

double plane(double p, double cc, double pp) { return 100.0 + 2.0 * p + 3.0 * cc + 5.0 * pp; }
double gentle(double p, double cc, double) { return 500.0 + 40.0 * std::sin(p / 8.0) + 30.0 * std::cos(cc / 10.0); }
double wavy(double p, double cc, double pp) {
  return 400.0 + 80.0 * std::sin(p / 3.0) * std::cos(cc / 5.0) + 20.0 * std::log(pp);
}

TEST(ThroughputSurface, ReproducesAffineData) {
  const auto nodes = lattice({1, 2, 4, 8, 16}, {1, 3, 6, 16}, {1, 4, 8, 32}, plane);
  const ThroughputSurface s = fit_throughput_surface(nodes);
  EXPECT_EQ(s.kind, SurfaceKind::kSpline);
  EXPECT_FALSE(s.low_confidence);
  for (int p = 1; p <= 16; ++p)
    for (int cc = 1; cc <= 16; cc += 3)
      for (int pp = 1; pp <= 32; pp += 5) EXPECT_NEAR(eval(s, {cc, p, pp}), plane(p, cc, pp), 1e-8);
}

TEST(ThroughputSurface, InterpolatesNodesAndUsesPureSheets) {
  const auto nodes = lattice({1, 2, 4, 8, 16}, {1, 3, 6, 16}, {1, 4, 8, 32}, wavy);
  const ThroughputSurface s = fit_throughput_surface(nodes);
  for (const auto& n : nodes) EXPECT_NEAR(eval(s, n.params), n.mean, 1e-9 * n.mean);
  // On a sheet key the answer is that sheet alone.
  const auto& knots = s.pp_knots();
  for (std::size_t k = 0; k < knots.size(); ++k)
    EXPECT_DOUBLE_EQ(eval_point(s, {5.5, 7.25, knots[k]}).value, s.sheets[k](5.5, 7.25));
}

TEST(ThroughputSurface, MidCellMatchesSheetBlend) {
  const auto nodes = lattice({1, 2, 4, 8, 16}, {1, 3, 6, 16}, {1, 4, 8, 32}, wavy);
  const ThroughputSurface s = fit_throughput_surface(nodes);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> up(1.0, 16.0), upp(1.0, 32.0);
  const auto& knots = s.pp_knots();
  for (int i = 0; i < 200; ++i) {
    const Point3 x{up(rng), up(rng), upp(rng)};
    std::size_t k = 0;
    while (k + 2 < knots.size() && x.pp >= knots[k + 1]) ++k;
    const double w = blend_weight(s.pp_curve, k, x.pp).w;
    const double expect = (1.0 - w) * s.sheets[k](x.p, x.cc) + w * s.sheets[k + 1](x.p, x.cc);
    EXPECT_NEAR(eval_point(s, x).value, std::max(0.0, expect), 1e-9 * std::abs(expect));
  }
}

TEST(ThroughputSurface, ClampsOutsideHullAndAtZero) {
  auto dip = [](double p, double cc, double) { return (p - 8.0) * (p - 8.0) + (cc - 8.0) * (cc - 8.0) - 20.0; };
  const auto nodes = lattice({2, 4, 8, 12}, {2, 4, 8, 12}, {1, 8}, +dip);
  const ThroughputSurface s = fit_throughput_surface(nodes);
  for (double p = 2.0; p <= 12.0; p += 0.25)
    for (double cc = 2.0; cc <= 12.0; cc += 0.25)
      for (double pp : {1.0, 3.3, 8.0}) EXPECT_GE(eval_point(s, {p, cc, pp}).value, 0.0);
  const EvalResult out = eval_point(s, {16.0, 1.0, 32.0});
  EXPECT_TRUE(out.clamped);
  EXPECT_EQ(out.value, eval_point(s, {12.0, 2.0, 8.0}).value);
}

TEST(ThroughputSurface, RegressionFallbackForNarrowAxes) {
  const auto nodes = lattice({1, 8}, {1, 4, 8, 16}, {1, 4, 8, 32}, plane);
  const ThroughputSurface s = fit_throughput_surface(nodes);
  EXPECT_EQ(s.kind, SurfaceKind::kRegression);
  EXPECT_TRUE(s.low_confidence);
  ASSERT_TRUE(s.regression.has_value());
  // Two p values leave every p^2 term unidentifiable, so both polynomial
  // kinds are rank deficient and the intercept-only model remains.
  EXPECT_EQ(s.regression->kind, RegressionKind::kConstant);
  double mean = 0.0;
  for (const auto& n : nodes) mean += n.mean / double(nodes.size());
  EXPECT_NEAR(eval(s, {4, 4, 4}), mean, 1e-9);
}

TEST(BuildGrid, CompleteGridHasNoHoles) {
  const auto nodes = lattice({1, 2, 4}, {1, 2, 4}, {1, 2}, plane);
  const LatticeGrid g = build_grid(nodes);
  EXPECT_EQ(g.holes, 0u);
  EXPECT_EQ(g.fill_fraction, 0.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      EXPECT_EQ(g.values[g.index(i, j, 1)], plane(g.ps[i], g.ccs[j], 2.0));
}

TEST(BuildGrid, InteriorHoleOnPlaneIsExact) {
  auto nodes = lattice({1, 2, 4, 8}, {1, 3, 5, 9}, {2}, plane);
  std::erase_if(nodes, [](const NodeStats& n) { return n.params.p == 4 && n.params.cc == 3; });
  const LatticeGrid g = build_grid(nodes);
  EXPECT_EQ(g.holes, 1u);
  EXPECT_NEAR(g.values[g.index(2, 1, 0)], plane(4, 3, 2), 1e-9);
}

TEST(BuildGrid, SmoothDataHolesWithinTenPercent) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    auto nodes = lattice({1, 4, 8, 12, 16}, {1, 4, 8, 12, 16}, {4}, gentle);
    std::vector<ParamTriple> removed;
    while (removed.size() < 3) {
      const auto& n = nodes[rng() % nodes.size()];
      removed.push_back(n.params);
      nodes.erase(std::find_if(nodes.begin(), nodes.end(),
                               [&](const NodeStats& x) { return x.params == removed.back(); }));
    }
    const LatticeGrid g = build_grid(nodes);
    for (const auto& t : removed) {
      std::size_t i = 0, j = 0;
      while (g.ps[i] != t.p) ++i;
      while (g.ccs[j] != t.cc) ++j;
      const double truth = gentle(t.p, t.cc, t.pp);
      EXPECT_NEAR(g.values[g.index(i, j, 0)], truth, 0.1 * truth);
    }
  }
}

TEST(BuildGrid, SparseDataIsLowConfidence) {
  std::vector<NodeStats> nodes{{{1, 1, 1}, 1, 10, 0}, {{4, 4, 1}, 1, 20, 0}, {{8, 8, 1}, 1, 30, 0}};
  const ThroughputSurface s = fit_throughput_surface(nodes);
  EXPECT_GT(s.fill_fraction, 0.5);
  EXPECT_TRUE(s.low_confidence);
}

TEST(Confidence, EmptyAndPassThrough) {
  EXPECT_TRUE(confidence_envelope({}).empty());
  ObservationGroup g;
  g.params = {2, 3, 4};
  g.samples = {4.0, 6.0};
  g.mean = 5.0;
  g.stddev = 1.0;
  const std::vector<ObservationGroup> groups{g};
  const ConfidenceMap m = confidence_envelope(groups);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.at({2, 3, 4}).mean, 5.0);
  EXPECT_EQ(m.at({2, 3, 4}).stddev, 1.0);
  EXPECT_FALSE(m.at({2, 3, 4}).synthetic);
}

TEST(Confidence, HoleSigmaIsFaceNeighbourMean) {
  std::vector<NodeStats> nodes;
  for (int p : {1, 2, 3})
    for (int cc : {1, 2, 3}) {
      if (p == 2 && cc == 2) continue;
      nodes.push_back({{cc, p, 1}, 2, 50.0, double(p * 10 + cc)});
    }
  const ThroughputSurface s = fit_throughput_surface(nodes);
  const Confidence& c = s.confidence.at({2, 2, 1});
  EXPECT_TRUE(c.synthetic);
  // Face neighbours: (p,cc) = (1,2), (3,2), (2,1), (2,3).
  EXPECT_DOUBLE_EQ(c.stddev, (12.0 + 32.0 + 21.0 + 23.0) / 4.0);
}

TEST(WithinConfidence, Examples) {
  auto flat = [](double, double, double) { return 100.0; };
  const auto nodes = lattice({1, 2, 3}, {1, 2, 3}, {1}, +flat, 20.0);
  const ThroughputSurface s = fit_throughput_surface(nodes);
  EXPECT_TRUE(within_confidence(s, {2, 2, 1}, 100.0, 0.5));
  EXPECT_FALSE(within_confidence(s, {2, 2, 1}, 160.0));
  EXPECT_TRUE(within_confidence(s, {2, 2, 1}, 130.0));
  EXPECT_THROW(within_confidence(s, {2, 2, 1}, 100.0, 0.0), PreconditionError);
  // With sigma 0 the floor of 5% of mu applies.
  const ThroughputSurface tight = fit_throughput_surface(lattice({1, 2, 3}, {1, 2, 3}, {1}, +flat));
  EXPECT_TRUE(within_confidence(tight, {2, 2, 1}, 109.0));
  EXPECT_FALSE(within_confidence(tight, {2, 2, 1}, 111.0));
}

TEST(NodeStats, MergeMatchesPooled) {
  std::vector<ThroughputSample> a{{1, 1, 1, 4}, {1, 1, 1, 6}, {2, 1, 1, 9}};
  std::vector<ThroughputSample> b{{1, 1, 1, 8}, {2, 2, 1, 3}};
  std::vector<ThroughputSample> all = a;
  all.insert(all.end(), b.begin(), b.end());
  const auto na = node_stats(a), nb = node_stats(b), pooled = node_stats(all);
  const auto merged = merge_node_stats(na, nb);
  ASSERT_EQ(merged.size(), pooled.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    EXPECT_EQ(merged[i].params, pooled[i].params);
    EXPECT_EQ(merged[i].count, pooled[i].count);
    EXPECT_NEAR(merged[i].mean, pooled[i].mean, 1e-12);
    EXPECT_NEAR(merged[i].stddev, pooled[i].stddev, 1e-12);
  }
}

}  // namespace
}  // namespace xfer
