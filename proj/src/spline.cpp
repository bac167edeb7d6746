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

#include <algorithm>
#include <cassert>
#include <cmath>

#include "xfer/error.hpp"

namespace xfer {
namespace {

// Sorted, de-duplicated copy of the input; duplicate abscissae are averaged.
std::vector<std::pair<double, double>> merge_duplicates(
    std::span<const std::pair<double, double>> points) {
  std::vector<std::pair<double, double>> sorted(points.begin(), points.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) sum += sorted[j++].second;
    out.emplace_back(sorted[i].first, sum / static_cast<double>(j - i));
    i = j;
  }
  return out;
}

// Thomas algorithm for the symmetric tridiagonal system of interior second
// derivatives. `lower`/`upper` are the off-diagonals (size n - 1).
std::vector<double> solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                                      std::vector<double> upper, std::vector<double> rhs) {
  const std::size_t n = diag.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = lower[i - 1] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs[i] -= w * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
  return x;
}

std::size_t locate(const std::vector<double>& axis, double x) {
  // Left-closed intervals; the last knot belongs to the last interval.
  const auto it = std::upper_bound(axis.begin(), axis.end(), x);
  std::size_t i = it == axis.begin() ? 0 : static_cast<std::size_t>(it - axis.begin()) - 1;
  return std::min(i, axis.size() - 2);
}

}  // namespace

CubicSpline1D CubicSpline1D::from_pieces(std::vector<double> knots, std::vector<double> values,
                                         std::vector<SplinePiece> pieces) {
  if (knots.size() != values.size() || (!knots.empty() && pieces.size() + 1 != knots.size()))
    throw DataError("spline", "inconsistent knot/piece counts");
  CubicSpline1D s;
  s.knots_ = std::move(knots);
  s.values_ = std::move(values);
  s.pieces_ = std::move(pieces);
  return s;
}

std::size_t CubicSpline1D::piece_index(double x) const { return locate(knots_, x); }

Jet CubicSpline1D::jet(double x) const {
  if (knots_.empty()) return {};
  if (knots_.size() == 1) return {values_[0], 0.0, 0.0, 0.0};
  x = std::clamp(x, knots_.front(), knots_.back());
  const std::size_t i = piece_index(x);
  const SplinePiece& c = pieces_[i];
  const double t = x - knots_[i];
  return {c.c0 + t * (c.c1 + t * (c.c2 + t * c.c3)), c.c1 + t * (2.0 * c.c2 + 3.0 * t * c.c3),
          2.0 * c.c2 + 6.0 * t * c.c3, 6.0 * c.c3};
}

double CubicSpline1D::knot_slope(std::size_t i) const {
  if (pieces_.empty()) return 0.0;
  if (i < pieces_.size()) return pieces_[i].c1;
  const SplinePiece& c = pieces_.back();
  const double h = knots_.back() - knots_[knots_.size() - 2];
  return c.c1 + h * (2.0 * c.c2 + 3.0 * h * c.c3);
}

CubicSpline1D fit_spline_1d(std::span<const std::pair<double, double>> points) {
  const auto merged = merge_duplicates(points);
  CubicSpline1D s;
  const std::size_t n = merged.size();
  for (const auto& [x, y] : merged) {
    if (!std::isfinite(x) || !std::isfinite(y)) throw DataError("spline", "non-finite point");
    s.knots_.push_back(x);
    s.values_.push_back(y);
  }
  if (n < 2) return s;

  std::vector<double> h(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) h[i] = s.knots_[i + 1] - s.knots_[i];

  // Second derivatives at the knots; the relaxed ends pin m[0] = m[n-1] = 0.
  std::vector<double> m(n, 0.0);
  if (n >= 3) {
    const std::size_t k = n - 2;
    std::vector<double> lower(k - 1), diag(k), upper(k - 1), rhs(k);
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t i = r + 1;
      diag[r] = 2.0 * (h[i - 1] + h[i]);
      rhs[r] = 6.0 * ((s.values_[i + 1] - s.values_[i]) / h[i] -
                      (s.values_[i] - s.values_[i - 1]) / h[i - 1]);
      if (r + 1 < k) {
        upper[r] = h[i];
        lower[r] = h[i];
      }
    }
    const auto interior = solve_tridiagonal(lower, diag, upper, rhs);
    std::copy(interior.begin(), interior.end(), m.begin() + 1);
  }

  s.pieces_.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double dy = s.values_[i + 1] - s.values_[i];
    s.pieces_[i] = {s.values_[i], dy / h[i] - h[i] * (2.0 * m[i] + m[i + 1]) / 6.0, m[i] / 2.0,
                    (m[i + 1] - m[i]) / (6.0 * h[i])};
  }
  assert(s.unknown_count() == 4 * (n - 1));
  return s;
}

// --- bicubic ---------------------------------------------------------------

BicubicGridSurface BicubicGridSurface::from_nodes(std::vector<double> xs, std::vector<double> ys,
                                                  std::vector<HermiteNode> nodes) {
  const std::size_t n = xs.size();
  const std::size_t m = ys.size();
  if (n < 2 || m < 2) throw PreconditionError("bicubic grid needs at least 2 lines per axis");
  if (nodes.size() != n * m) throw DataError("sheet", "node count does not match grid");

  BicubicGridSurface s;
  s.blocks_.resize((n - 1) * (m - 1));
  // Hermite basis in monomial form for data order (p(0), p(1), p'(0), p'(1)).
  static constexpr double kC[4][4] = {{1, 0, 0, 0}, {0, 0, 1, 0}, {-3, 3, -2, -1}, {2, -2, 1, 1}};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double hx = xs[i + 1] - xs[i];
    for (std::size_t j = 0; j + 1 < m; ++j) {
      const double hy = ys[j + 1] - ys[j];
      const HermiteNode& n00 = nodes[i * m + j];
      const HermiteNode& n01 = nodes[i * m + j + 1];
      const HermiteNode& n10 = nodes[(i + 1) * m + j];
      const HermiteNode& n11 = nodes[(i + 1) * m + j + 1];
      const double f[4][4] = {
          {n00.f, n01.f, n00.fy * hy, n01.fy * hy},
          {n10.f, n11.f, n10.fy * hy, n11.fy * hy},
          {n00.fx * hx, n01.fx * hx, n00.fxy * hx * hy, n01.fxy * hx * hy},
          {n10.fx * hx, n11.fx * hx, n10.fxy * hx * hy, n11.fxy * hx * hy}};
      double cf[4][4] = {};
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
          for (int k = 0; k < 4; ++k) cf[r][c] += kC[r][k] * f[k][c];
      Block& a = s.blocks_[i * (m - 1) + j];
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
          double v = 0.0;
          for (int k = 0; k < 4; ++k) v += cf[r][k] * kC[c][k];
          a[r * 4 + c] = v;
        }
    }
  }
  s.xs_ = std::move(xs);
  s.ys_ = std::move(ys);
  s.nodes_ = std::move(nodes);
  return s;
}

std::size_t BicubicGridSurface::cell_x(double x) const { return locate(xs_, x); }
std::size_t BicubicGridSurface::cell_y(double y) const { return locate(ys_, y); }

double BicubicGridSurface::operator()(double x, double y) const { return partials(x, y).f; }

Partials2D BicubicGridSurface::partials(double x, double y) const {
  x = std::clamp(x, xs_.front(), xs_.back());
  y = std::clamp(y, ys_.front(), ys_.back());
  return partials_in_cell(cell_x(x), cell_y(y), x, y);
}

Partials2D BicubicGridSurface::partials_in_cell(std::size_t i, std::size_t j, double x,
                                                double y) const {
  const double hx = xs_[i + 1] - xs_[i];
  const double hy = ys_[j + 1] - ys_[j];
  const double s = (x - xs_[i]) / hx;
  const double t = (y - ys_[j]) / hy;
  const Block& a = block(i, j);

  const double sp[4] = {1.0, s, s * s, s * s * s};
  const double tp[4] = {1.0, t, t * t, t * t * t};
  const double dsp[4] = {0.0, 1.0, 2.0 * s, 3.0 * s * s};
  const double dtp[4] = {0.0, 1.0, 2.0 * t, 3.0 * t * t};
  const double d2sp[4] = {0.0, 0.0, 2.0, 6.0 * s};
  const double d2tp[4] = {0.0, 0.0, 2.0, 6.0 * t};

  Partials2D out;
  for (int k = 0; k < 4; ++k)
    for (int l = 0; l < 4; ++l) {
      const double c = a[k * 4 + l];
      out.f += c * sp[k] * tp[l];
      out.fx += c * dsp[k] * tp[l];
      out.fy += c * sp[k] * dtp[l];
      out.fxx += c * d2sp[k] * tp[l];
      out.fxy += c * dsp[k] * dtp[l];
      out.fyy += c * sp[k] * d2tp[l];
    }
  out.fx /= hx;
  out.fy /= hy;
  out.fxx /= hx * hx;
  out.fxy /= hx * hy;
  out.fyy /= hy * hy;
  return out;
}

BicubicGridSurface fit_surface_2d(std::span<const double> xs, std::span<const double> ys,
                                  std::span<const double> values) {
  const std::size_t n = xs.size();
  const std::size_t m = ys.size();
  if (n < 3 || m < 3) throw PreconditionError("bicubic fit needs a grid of at least 3 x 3");
  if (values.size() != n * m) throw DataError("grid", "value count does not match axes");
  for (std::size_t i = 1; i < n; ++i)
    if (!(xs[i] > xs[i - 1])) throw DataError("grid", "x axis must be strictly increasing");
  for (std::size_t j = 1; j < m; ++j)
    if (!(ys[j] > ys[j - 1])) throw DataError("grid", "y axis must be strictly increasing");
  for (double v : values)
    if (!std::isfinite(v)) throw DataError("grid", "incomplete grid (hole or non-finite value)");

  std::vector<HermiteNode> nodes(n * m);
  std::vector<std::pair<double, double>> line;

  // d/dx along every column of fixed y.
  for (std::size_t j = 0; j < m; ++j) {
    line.clear();
    for (std::size_t i = 0; i < n; ++i) line.emplace_back(xs[i], values[i * m + j]);
    const auto sp = fit_spline_1d(line);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i * m + j].f = values[i * m + j];
      nodes[i * m + j].fx = sp.knot_slope(i);
    }
  }
  // d/dy of the values and of the x-slopes along every row of fixed x.
  for (std::size_t i = 0; i < n; ++i) {
    line.clear();
    for (std::size_t j = 0; j < m; ++j) line.emplace_back(ys[j], values[i * m + j]);
    const auto sy = fit_spline_1d(line);
    line.clear();
    for (std::size_t j = 0; j < m; ++j) line.emplace_back(ys[j], nodes[i * m + j].fx);
    const auto sxy = fit_spline_1d(line);
    for (std::size_t j = 0; j < m; ++j) {
      nodes[i * m + j].fy = sy.knot_slope(j);
      nodes[i * m + j].fxy = sxy.knot_slope(j);
    }
  }
  return BicubicGridSurface::from_nodes({xs.begin(), xs.end()}, {ys.begin(), ys.end()},
                                        std::move(nodes));
}

}  // namespace xfer
