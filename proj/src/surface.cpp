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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "xfer/error.hpp"

namespace xfer {
namespace {

// Running (n, mean, M2) moments; merge() is the pairwise update of Chan et al.
struct Moments {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  void merge(const Moments& o) {
    if (o.n == 0.0) return;
    const double total = n + o.n;
    const double d = o.mean - mean;
    mean += d * o.n / total;
    m2 += o.m2 + d * d * n * o.n / total;
    n = total;
  }
  double stddev() const { return n > 0.0 ? std::sqrt(std::max(m2, 0.0) / n) : 0.0; }
};

std::vector<double> distinct_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::size_t axis_index(const std::vector<double>& axis, double v) {
  return static_cast<std::size_t>(std::lower_bound(axis.begin(), axis.end(), v) - axis.begin());
}

ParamTriple node_params(const LatticeGrid& g, std::size_t i, std::size_t j, std::size_t k) {
  return {static_cast<int>(std::lround(g.ccs[j])), static_cast<int>(std::lround(g.ps[i])),
          static_cast<int>(std::lround(g.pps[k]))};
}

double ipow(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

// d^order/dx^order of x^n.
double dpow(double x, int n, int order) {
  if (order > n) return 0.0;
  double c = 1.0;
  for (int i = 0; i < order; ++i) c *= n - i;
  return c * ipow(x, n - order);
}

SurfaceDerivatives regression_derivatives(const RegressionModel& model, const Point3& x) {
  SurfaceDerivatives d;
  const auto terms = regression_terms(model.kind);
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const Monomial& m = terms[t];
    const double c = model.coefficients[t];
    const int e[3] = {m.p, m.cc, m.pp};
    const double v[3] = {x.p, x.cc, x.pp};
    auto part = [&](int a, int b) {
      // Mixed partial with order a on one axis and b on another (axes may coincide).
      double r = c;
      for (int ax = 0; ax < 3; ++ax) {
        const int order = (ax == a) + (ax == b);
        r *= dpow(v[ax], e[ax], order);
      }
      return r;
    };
    d.value += part(-1, -1);
    for (int a = 0; a < 3; ++a) {
      d.gradient[a] += part(a, -1);
      for (int b = 0; b < 3; ++b) d.hessian[a][b] += part(a, b);
    }
  }
  return d;
}

}  // namespace

bool ParamHull::contains(const Point3& x) const {
  return x.p >= p_lo && x.p <= p_hi && x.cc >= cc_lo && x.cc <= cc_hi && x.pp >= pp_lo &&
         x.pp <= pp_hi;
}

Point3 ParamHull::clamp(const Point3& x) const {
  return {std::clamp(x.p, p_lo, p_hi), std::clamp(x.cc, cc_lo, cc_hi),
          std::clamp(x.pp, pp_lo, pp_hi)};
}

std::vector<NodeStats> node_stats(std::span<const ThroughputSample> samples) {
  std::map<ParamTriple, Moments> acc;
  for (const auto& s : samples)
    acc[{static_cast<int>(std::lround(s.cc)), static_cast<int>(std::lround(s.p)),
         static_cast<int>(std::lround(s.pp))}]
        .add(s.throughput);
  std::vector<NodeStats> out;
  for (const auto& [t, m] : acc) out.push_back({t, static_cast<std::size_t>(m.n), m.mean, m.stddev()});
  return out;
}

std::vector<NodeStats> merge_node_stats(std::span<const NodeStats> a, std::span<const NodeStats> b) {
  std::map<ParamTriple, Moments> acc;
  for (auto part : {a, b})
    for (const auto& n : part) {
      const double c = static_cast<double>(n.count);
      acc[n.params].merge({c, n.mean, n.stddev * n.stddev * c});
    }
  std::vector<NodeStats> out;
  for (const auto& [t, m] : acc) out.push_back({t, static_cast<std::size_t>(m.n), m.mean, m.stddev()});
  return out;
}

LatticeGrid build_grid(std::span<const ThroughputSample> samples) {
  const auto nodes = node_stats(samples);
  return build_grid(std::span<const NodeStats>(nodes));
}

LatticeGrid build_grid(std::span<const NodeStats> nodes) {
  LatticeGrid g;
  std::vector<double> ps, ccs, pps;
  for (const auto& n : nodes) {
    ps.push_back(n.params.p);
    ccs.push_back(n.params.cc);
    pps.push_back(n.params.pp);
  }
  g.ps = distinct_sorted(std::move(ps));
  g.ccs = distinct_sorted(std::move(ccs));
  g.pps = distinct_sorted(std::move(pps));
  const std::size_t total = g.ps.size() * g.ccs.size() * g.pps.size();
  g.values.assign(total, std::numeric_limits<double>::quiet_NaN());
  g.stddevs.assign(total, 0.0);
  g.counts.assign(total, 0);
  for (const auto& node : nodes) {
    const std::size_t n = g.index(axis_index(g.ps, node.params.p), axis_index(g.ccs, node.params.cc),
                                  axis_index(g.pps, node.params.pp));
    g.values[n] = node.mean;
    g.stddevs[n] = node.stddev;
    g.counts[n] = node.count;
  }
  g.holes = total - nodes.size();
  g.fill_fraction = total ? static_cast<double>(g.holes) / static_cast<double>(total) : 0.0;
  if (g.holes == 0) return g;

  const std::size_t dims[3] = {g.ps.size(), g.ccs.size(), g.pps.size()};
  const std::vector<double>* axes[3] = {&g.ps, &g.ccs, &g.pps};
  std::vector<bool> known(total);
  double scale = 0.0;
  for (std::size_t n = 0; n < total; ++n) {
    known[n] = g.observed(n);
    if (known[n]) scale = std::max(scale, std::abs(g.values[n]));
  }

  // Gauss-Seidel sweeps; each hole takes the average of its axis-wise
  // linear interpolants, which leaves affine data unchanged.
  for (int sweep = 0; sweep < 10000; ++sweep) {
    double change = 0.0;
    for (std::size_t i = 0; i < dims[0]; ++i)
      for (std::size_t j = 0; j < dims[1]; ++j)
        for (std::size_t k = 0; k < dims[2]; ++k) {
          const std::size_t n = g.index(i, j, k);
          if (g.observed(n)) continue;
          const std::size_t at[3] = {i, j, k};
          double interp = 0.0, near = 0.0;
          int n_interp = 0, n_near = 0;
          for (int a = 0; a < 3; ++a) {
            const std::vector<double>& ax = *axes[a];
            auto neighbour = [&](std::size_t pos) {
              std::size_t c[3] = {at[0], at[1], at[2]};
              c[a] = pos;
              return g.index(c[0], c[1], c[2]);
            };
            const bool has_lo = at[a] > 0 && known[neighbour(at[a] - 1)];
            const bool has_hi = at[a] + 1 < dims[a] && known[neighbour(at[a] + 1)];
            if (has_lo) {
              near += g.values[neighbour(at[a] - 1)];
              ++n_near;
            }
            if (has_hi) {
              near += g.values[neighbour(at[a] + 1)];
              ++n_near;
            }
            if (has_lo && has_hi) {
              const double x0 = ax[at[a] - 1], x1 = ax[at[a] + 1];
              const double v0 = g.values[neighbour(at[a] - 1)];
              const double v1 = g.values[neighbour(at[a] + 1)];
              interp += v0 + (ax[at[a]] - x0) / (x1 - x0) * (v1 - v0);
              ++n_interp;
            }
          }
          double estimate;
          if (n_interp > 0)
            estimate = interp / n_interp;
          else if (n_near > 0)
            estimate = near / n_near;
          else
            continue;
          if (!known[n]) {
            known[n] = true;
            change = std::numeric_limits<double>::infinity();
          } else {
            change = std::max(change, std::abs(estimate - g.values[n]));
          }
          g.values[n] = estimate;
        }
    if (change <= 1e-12 * std::max(scale, 1.0)) break;
  }
  return g;
}

ConfidenceMap confidence_envelope(std::span<const ObservationGroup> groups) {
  std::map<ParamTriple, Moments> pooled;
  for (const auto& grp : groups) {
    const double n = static_cast<double>(grp.samples.size());
    pooled[grp.params].merge({n, grp.mean, grp.stddev * grp.stddev * n});
  }
  ConfidenceMap out;
  for (const auto& [params, m] : pooled)
    out[params] = {m.mean, m.stddev(), static_cast<std::size_t>(m.n), false};
  return out;
}

void fill_confidence_holes(ConfidenceMap& confidence, const LatticeGrid& grid) {
  const std::size_t dims[3] = {grid.ps.size(), grid.ccs.size(), grid.pps.size()};
  double sigma_sum = 0.0;
  std::size_t sigma_n = 0;
  for (std::size_t n = 0; n < grid.values.size(); ++n)
    if (grid.observed(n)) {
      sigma_sum += grid.stddevs[n];
      ++sigma_n;
    }
  const double global = sigma_n ? sigma_sum / static_cast<double>(sigma_n) : 0.0;

  for (std::size_t i = 0; i < dims[0]; ++i)
    for (std::size_t j = 0; j < dims[1]; ++j)
      for (std::size_t k = 0; k < dims[2]; ++k) {
        const std::size_t n = grid.index(i, j, k);
        if (grid.observed(n)) continue;
        const ParamTriple key = node_params(grid, i, j, k);
        if (confidence.count(key)) continue;
        const std::size_t at[3] = {i, j, k};
        double sum = 0.0;
        int count = 0;
        for (int a = 0; a < 3; ++a)
          for (int step : {-1, 1}) {
            if ((step < 0 && at[a] == 0) || (step > 0 && at[a] + 1 == dims[a])) continue;
            std::size_t c[3] = {at[0], at[1], at[2]};
            c[a] = static_cast<std::size_t>(static_cast<long>(c[a]) + step);
            const std::size_t m = grid.index(c[0], c[1], c[2]);
            if (grid.observed(m)) {
              sum += grid.stddevs[m];
              ++count;
            }
          }
        confidence[key] = {grid.values[n], count ? sum / count : global, 0, true};
      }
}

CubicSpline1D pp_curve_from_sheets(const std::vector<double>& pp_knots,
                                   const std::vector<BicubicGridSurface>& sheets) {
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < sheets.size(); ++k) {
    double sum = 0.0;
    for (const auto& node : sheets[k].nodes()) sum += node.f;
    pts.emplace_back(pp_knots[k], sum / static_cast<double>(sheets[k].nodes().size()));
  }
  return fit_spline_1d(pts);
}

ThroughputSurface fit_throughput_surface(std::span<const ThroughputSample> samples,
                                         const SurfaceOptions& options) {
  const auto nodes = node_stats(samples);
  return fit_throughput_surface(std::span<const NodeStats>(nodes), options);
}

std::vector<NodeStats> observed_nodes(const ThroughputSurface& s) {
  std::vector<NodeStats> out;
  for (const auto& [t, c] : s.confidence)
    if (!c.synthetic) out.push_back({t, c.count, c.mean, c.stddev});
  return out;
}

ThroughputSurface fit_throughput_surface(std::span<const NodeStats> nodes,
                                         const SurfaceOptions& options) {
  if (nodes.empty()) throw PreconditionError("cannot fit a surface to zero samples");
  const LatticeGrid grid = build_grid(nodes);

  ThroughputSurface s;
  for (const auto& n : nodes) s.sample_count += n.count;
  s.fill_fraction = grid.fill_fraction;
  s.hull = {grid.ps.front(),  grid.ps.back(),  grid.ccs.front(),
            grid.ccs.back(), grid.pps.front(), grid.pps.back()};

  if (grid.ps.size() >= 3 && grid.ccs.size() >= 3) {
    const std::size_t n = grid.ps.size(), m = grid.ccs.size();
    std::vector<double> slice(n * m);
    for (std::size_t k = 0; k < grid.pps.size(); ++k) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) slice[i * m + j] = grid.values[grid.index(i, j, k)];
      s.sheets.push_back(fit_surface_2d(grid.ps, grid.ccs, slice));
    }
    s.pp_curve = pp_curve_from_sheets(grid.pps, s.sheets);
    s.kind = SurfaceKind::kSpline;
  } else {
    s.kind = SurfaceKind::kRegression;
    std::vector<ThroughputSample> means;
    for (const auto& n : nodes)
      means.push_back({double(n.params.p), double(n.params.cc), double(n.params.pp), n.mean});
    for (auto kind : {RegressionKind::kCubic, RegressionKind::kQuadratic, RegressionKind::kConstant}) {
      try {
        s.regression = fit_regression(means, kind);
        break;
      } catch (const DataError&) {
      } catch (const PreconditionError&) {
      }
    }
  }
  s.low_confidence = s.kind == SurfaceKind::kRegression || grid.fill_fraction > options.max_fill_fraction;

  for (std::size_t i = 0; i < grid.ps.size(); ++i)
    for (std::size_t j = 0; j < grid.ccs.size(); ++j)
      for (std::size_t k = 0; k < grid.pps.size(); ++k) {
        const std::size_t n = grid.index(i, j, k);
        if (grid.observed(n))
          s.confidence[node_params(grid, i, j, k)] = {grid.values[n], grid.stddevs[n],
                                                       grid.counts[n], false};
      }
  fill_confidence_holes(s.confidence, grid);
  return s;
}

BlendWeight blend_weight(const CubicSpline1D& curve, std::size_t piece, double pp) {
  const auto& knots = curve.knots();
  if (knots.size() < 2) return {};
  const double h = knots[piece + 1] - knots[piece];
  const double t = pp - knots[piece];
  const double g0 = curve.values()[piece];
  const double dg = curve.values()[piece + 1] - g0;
  const SplinePiece& c = curve.pieces()[piece];

  // The curve's shape is only usable as a weight when it moves monotonically
  // from one sheet's level to the other's; otherwise blend linearly.
  auto slope = [&](double u) { return c.c1 + u * (2.0 * c.c2 + 3.0 * u * c.c3); };
  double lo = std::min(slope(0.0), slope(h));
  double hi = std::max(slope(0.0), slope(h));
  if (c.c3 != 0.0) {
    const double v = -c.c2 / (3.0 * c.c3);
    if (v > 0.0 && v < h) {
      lo = std::min(lo, slope(v));
      hi = std::max(hi, slope(v));
    }
  }
  const bool degenerate = std::abs(dg) <= 1e-6 * std::max(std::abs(g0), std::abs(g0 + dg)) || dg == 0.0;
  const bool monotone = (dg > 0.0 && lo >= 0.0) || (dg < 0.0 && hi <= 0.0);
  if (degenerate || !monotone) return {t / h, 1.0 / h, 0.0};
  const double g = c.c1 * t + t * t * (c.c2 + t * c.c3);
  return {g / dg, slope(t) / dg, (2.0 * c.c2 + 6.0 * c.c3 * t) / dg};
}

EvalResult eval_point(const ThroughputSurface& s, const Point3& x) {
  const Point3 xc = s.hull.clamp(x);
  EvalResult r;
  r.clamped = xc.p != x.p || xc.cc != x.cc || xc.pp != x.pp;
  double v;
  if (s.kind == SurfaceKind::kRegression) {
    v = s.regression ? s.regression->eval(xc.p, xc.cc, xc.pp) : 0.0;
  } else if (s.sheets.size() == 1 || xc.pp >= s.pp_knots().back()) {
    v = s.sheets.back()(xc.p, xc.cc);
  } else {
    const std::size_t k = s.pp_curve.piece_index(xc.pp);
    const double a = s.sheets[k](xc.p, xc.cc);
    if (xc.pp == s.pp_knots()[k]) {
      v = a;
    } else {
      const double w = blend_weight(s.pp_curve, k, xc.pp).w;
      v = a + w * (s.sheets[k + 1](xc.p, xc.cc) - a);
    }
  }
  r.value = std::max(v, 0.0);
  return r;
}

double eval(const ThroughputSurface& s, const ParamTriple& params) {
  return eval_point(s, to_point(params)).value;
}

SurfaceCell locate_cell(const ThroughputSurface& s, const Point3& x) {
  SurfaceCell c;
  if (s.kind == SurfaceKind::kRegression || s.sheets.empty()) return c;
  const Point3 xc = s.hull.clamp(x);
  c.ip = s.sheets.front().cell_x(xc.p);
  c.jc = s.sheets.front().cell_y(xc.cc);
  c.kp = s.sheets.size() > 1 ? s.pp_curve.piece_index(xc.pp) : 0;
  return c;
}

SurfaceDerivatives derivatives(const ThroughputSurface& s, const Point3& x) {
  return derivatives_in_cell(s, locate_cell(s, x), x);
}

SurfaceDerivatives derivatives_in_cell(const ThroughputSurface& s, const SurfaceCell& cell,
                                       const Point3& x) {
  if (s.kind == SurfaceKind::kRegression)
    return s.regression ? regression_derivatives(*s.regression, x) : SurfaceDerivatives{};
  const Partials2D a = s.sheets[cell.kp].partials_in_cell(cell.ip, cell.jc, x.p, x.cc);
  SurfaceDerivatives d;
  if (s.sheets.size() == 1) {
    d.value = a.f;
    d.gradient = {a.fx, a.fy, 0.0};
    d.hessian = {{{a.fxx, a.fxy, 0.0}, {a.fxy, a.fyy, 0.0}, {0.0, 0.0, 0.0}}};
    return d;
  }
  const Partials2D b = s.sheets[cell.kp + 1].partials_in_cell(cell.ip, cell.jc, x.p, x.cc);
  const BlendWeight bw = blend_weight(s.pp_curve, cell.kp, x.pp);
  // Written as a + w (b - a) so equal sheets blend to exactly their value.
  auto mix = [w = bw.w](double x, double y) { return x + w * (y - x); };
  d.value = mix(a.f, b.f);
  d.gradient = {mix(a.fx, b.fx), mix(a.fy, b.fy), bw.dw * (b.f - a.f)};
  const double hpp_p = bw.dw * (b.fx - a.fx);
  const double hpp_cc = bw.dw * (b.fy - a.fy);
  d.hessian = {{{mix(a.fxx, b.fxx), mix(a.fxy, b.fxy), hpp_p},
                {mix(a.fxy, b.fxy), mix(a.fyy, b.fyy), hpp_cc},
                {hpp_p, hpp_cc, bw.d2w * (b.f - a.f)}}};
  return d;
}

double confidence_sigma(const ThroughputSurface& s, const Point3& x) {
  double best = std::numeric_limits<double>::infinity();
  double sigma = 0.0;
  for (const auto& [t, c] : s.confidence) {
    const double dp = t.p - x.p, dc = t.cc - x.cc, dq = t.pp - x.pp;
    const double d = dp * dp + dc * dc + dq * dq;
    if (d < best) {
      best = d;
      sigma = c.stddev;
    }
  }
  return sigma;
}

bool within_confidence(const ThroughputSurface& s, const ParamTriple& params, double observed,
                       double z) {
  if (!(z > 0.0)) throw PreconditionError("confidence multiplier z must be positive");
  const double mu = eval(s, params);
  const double sigma = std::max(confidence_sigma(s, to_point(params)), kSigmaFloorFraction * mu);
  return std::abs(observed - mu) <= z * sigma;
}

}  // namespace xfer
