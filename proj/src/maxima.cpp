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

#include "xfer/maxima.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace xfer {
namespace {

// Lattice range of one axis inside both the hull and the bounds.
struct IntRange {
  int lo = 1;
  int hi = 0;
  bool empty() const { return lo > hi; }
};

IntRange lattice_range(double lo, double hi, int max) {
  return {std::max(1, static_cast<int>(std::ceil(lo - 1e-9))),
          std::min(max, static_cast<int>(std::floor(hi + 1e-9)))};
}

struct LatticeBox {
  IntRange cc, p, pp;
  bool empty() const { return cc.empty() || p.empty() || pp.empty(); }
};

LatticeBox lattice_box(const ThroughputSurface& s, const LatticeBounds& b) {
  return {lattice_range(s.hull.cc_lo, s.hull.cc_hi, b.max_cc),
          lattice_range(s.hull.p_lo, s.hull.p_hi, b.max_p),
          lattice_range(s.hull.pp_lo, s.hull.pp_hi, b.max_pp)};
}

bool better(double v, const ParamTriple& t, const SurfaceArgmax& best) {
  return v > best.value || (v == best.value && t < best.params);
}

// Solves h x = g on the leading `n` rows by Gaussian elimination with
// partial pivoting. Returns false when singular.
bool solve(Matrix3 h, std::array<double, 3> g, int n, std::array<double, 3>& x) {
  double scale = 0.0;
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) scale = std::max(scale, std::abs(h[r][c]));
  if (scale == 0.0) return false;
  for (int c = 0; c < n; ++c) {
    int piv = c;
    for (int r = c + 1; r < n; ++r)
      if (std::abs(h[r][c]) > std::abs(h[piv][c])) piv = r;
    if (std::abs(h[piv][c]) <= 1e-14 * scale) return false;
    std::swap(h[c], h[piv]);
    std::swap(g[c], g[piv]);
    for (int r = c + 1; r < n; ++r) {
      const double f = h[r][c] / h[c][c];
      for (int k = c; k < n; ++k) h[r][k] -= f * h[c][k];
      g[r] -= f * g[c];
    }
  }
  for (int r = n; r-- > 0;) {
    double v = g[r];
    for (int k = r + 1; k < n; ++k) v -= h[r][k] * x[k];
    x[r] = v / h[r][r];
  }
  return true;
}

double& coord(Point3& x, int axis) { return axis == 0 ? x.p : axis == 1 ? x.cc : x.pp; }

// Axis edges of one cell of the surface, in (p, cc, pp) order.
struct CellBox {
  double lo[3];
  double hi[3];
};

Matrix3 sub_matrix(const Matrix3& full, const int* axes, int dims) {
  Matrix3 h{};
  for (int r = 0; r < dims; ++r)
    for (int c = 0; c < dims; ++c) h[r][c] = full[axes[r]][axes[c]];
  return h;
}

// Gradient roots over the listed axes inside one cell, by Newton's method
// from a 3-per-axis grid of starts. Other coordinates stay at box.lo.
std::vector<Point3> newton_roots(const ThroughputSurface& s, const SurfaceCell& cell,
                                 const CellBox& box, const int* axes, int dims) {
  static constexpr double kStarts[3] = {0.25, 0.5, 0.75};
  std::vector<Point3> roots;
  const int n_starts = dims == 3 ? 27 : dims == 2 ? 9 : 3;
  for (int st = 0; st < n_starts; ++st) {
    Point3 x{box.lo[0], box.lo[1], box.lo[2]};
    int code = st;
    for (int d = 0; d < dims; ++d) {
      const int a = axes[d];
      coord(x, a) = box.lo[a] + kStarts[code % 3] * (box.hi[a] - box.lo[a]);
      code /= 3;
    }
    bool converged = false;
    for (int it = 0; it < 40; ++it) {
      const SurfaceDerivatives d = derivatives_in_cell(s, cell, x);
      std::array<double, 3> g{}, step{};
      for (int r = 0; r < dims; ++r) g[r] = d.gradient[axes[r]];
      if (!solve(sub_matrix(d.hessian, axes, dims), g, dims, step)) break;
      double move = 0.0, outside = 0.0;
      for (int r = 0; r < dims; ++r) {
        const int a = axes[r];
        const double width = box.hi[a] - box.lo[a];
        coord(x, a) -= step[r];
        move = std::max(move, std::abs(step[r]) / width);
        outside = std::max(outside, std::max(box.lo[a] - coord(x, a), coord(x, a) - box.hi[a]) / width);
      }
      if (outside > 1.0) break;
      if (move < 1e-12) {
        converged = outside <= 1e-9;
        break;
      }
    }
    if (!converged) continue;
    for (int r = 0; r < dims; ++r) {
      const int a = axes[r];
      coord(x, a) = std::clamp(coord(x, a), box.lo[a], box.hi[a]);
    }
    roots.push_back(x);
  }
  return roots;
}

}  // namespace

const char* to_string(CriticalKind kind) {
  switch (kind) {
    case CriticalKind::kMax: return "max";
    case CriticalKind::kMin: return "min";
    case CriticalKind::kSaddle: return "saddle";
    case CriticalKind::kDegenerate: return "degenerate";
  }
  return "degenerate";
}

std::array<double, 3> gradient_at(const ThroughputSurface& s, const Point3& x) {
  return derivatives(s, x).gradient;
}

Matrix3 hessian_at(const ThroughputSurface& s, const Point3& x) {
  return derivatives(s, x).hessian;
}

CriticalKind classify_hessian(const Matrix3& h, int dims) {
  double scale = 0.0;
  for (int r = 0; r < dims; ++r)
    for (int c = 0; c < dims; ++c) scale = std::max(scale, std::abs(h[r][c]));
  if (scale == 0.0) return CriticalKind::kDegenerate;
  const double d1 = h[0][0];
  const double d2 = h[0][0] * h[1][1] - h[0][1] * h[1][0];
  const double d3 = h[0][0] * (h[1][1] * h[2][2] - h[1][2] * h[2][1]) -
                    h[0][1] * (h[1][0] * h[2][2] - h[1][2] * h[2][0]) +
                    h[0][2] * (h[1][0] * h[2][1] - h[1][1] * h[2][0]);
  const double minors[3] = {d1, d2, d3};
  const double eps = 1e-12;
  auto zero = [&](int k) { return std::abs(minors[k]) <= eps * std::pow(scale, k + 1); };
  for (int k = 0; k < dims; ++k)
    if (zero(k)) return CriticalKind::kDegenerate;
  bool neg_def = true, pos_def = true;
  for (int k = 0; k < dims; ++k) {
    const bool odd = k % 2 == 0;  // minor of order k + 1
    if (odd ? minors[k] >= 0.0 : minors[k] <= 0.0) neg_def = false;
    if (minors[k] <= 0.0) pos_def = false;
  }
  if (neg_def) return CriticalKind::kMax;
  if (pos_def) return CriticalKind::kMin;
  return CriticalKind::kSaddle;
}

std::vector<CriticalPoint> local_maxima(const ThroughputSurface& s, const LatticeBounds& bounds) {
  std::vector<CriticalPoint> out;

  // Active axes: those the hull actually spans.
  const double lo[3] = {s.hull.p_lo, s.hull.cc_lo, s.hull.pp_lo};
  const double hi[3] = {s.hull.p_hi, s.hull.cc_hi, s.hull.pp_hi};
  int axes[3];
  int dims = 0;
  for (int a = 0; a < 3; ++a)
    if (hi[a] > lo[a]) axes[dims++] = a;

  std::vector<std::pair<SurfaceCell, CellBox>> cells;
  if (s.kind == SurfaceKind::kRegression) {
    cells.push_back({{}, {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}}});
  } else {
    const auto& xs = s.sheets.front().xs();
    const auto& ys = s.sheets.front().ys();
    const auto& zs = s.pp_knots();
    const std::size_t nk = zs.size() > 1 ? zs.size() - 1 : 1;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
      for (std::size_t j = 0; j + 1 < ys.size(); ++j)
        for (std::size_t k = 0; k < nk; ++k) {
          CellBox b{{xs[i], ys[j], zs[k]},
                    {xs[i + 1], ys[j + 1], zs.size() > 1 ? zs[k + 1] : zs[k]}};
          cells.push_back({{i, j, k}, b});
        }
  }

  auto add = [&](const Point3& x, double v, CriticalKind kind, bool on_knot) {
    const bool dup = std::any_of(out.begin(), out.end(), [&](const CriticalPoint& c) {
      return std::abs(c.location.p - x.p) < 1e-6 && std::abs(c.location.cc - x.cc) < 1e-6 &&
             std::abs(c.location.pp - x.pp) < 1e-6;
    });
    if (!dup) out.push_back({x, std::max(v, 0.0), kind, false, on_knot});
  };

  if (dims > 0)
    for (const auto& [cell, box] : cells)
      for (const Point3& x : newton_roots(s, cell, box, axes, dims)) {
        const SurfaceDerivatives d = derivatives_in_cell(s, cell, x);
        const CriticalKind kind = classify_hessian(sub_matrix(d.hessian, axes, dims), dims);
        if (kind == CriticalKind::kMax || kind == CriticalKind::kDegenerate) add(x, d.value, kind, false);
      }

  // The pp blend is only continuous across sheet knots, so a peak can sit on
  // a knot plane as a kink: a (p, cc) maximum of the sheet where pp rises
  // into the knot and falls away from it.
  if (s.kind == SurfaceKind::kSpline && s.pp_knots().size() > 1) {
    int plane_axes[3];
    int plane_dims = 0;
    for (int d = 0; d < dims; ++d)
      if (axes[d] != 2) plane_axes[plane_dims++] = axes[d];
    const auto& zs = s.pp_knots();
    const std::size_t last = zs.size() - 1;
    for (std::size_t k = 0; k <= last; ++k)
      for (const auto& [cell, box] : cells) {
        if (cell.kp != std::min(k, last - 1) || plane_dims == 0) continue;
        CellBox plane = box;
        plane.lo[2] = plane.hi[2] = zs[k];
        for (const Point3& x : newton_roots(s, cell, plane, plane_axes, plane_dims)) {
          SurfaceCell left = cell, right = cell;
          if (k > 0) left.kp = k - 1;
          if (k < last) right.kp = k;
          const SurfaceDerivatives dl = derivatives_in_cell(s, left, x);
          const SurfaceDerivatives dr = derivatives_in_cell(s, right, x);
          const bool rises = k == 0 || dl.gradient[2] >= 0.0;
          const bool falls = k == last || dr.gradient[2] <= 0.0;
          if (!rises || !falls) continue;
          const SurfaceDerivatives& d = k < last ? dr : dl;
          if (classify_hessian(sub_matrix(d.hessian, plane_axes, plane_dims), plane_dims) == CriticalKind::kMax)
            add(x, d.value, CriticalKind::kMax, true);
        }
      }
  }

  // Boundary lattice candidates.
  const LatticeBox box = lattice_box(s, bounds);
  if (box.empty()) return out;
  auto value = [&](int cc, int p, int pp) { return eval(s, {cc, p, pp}); };
  for (int cc = box.cc.lo; cc <= box.cc.hi; ++cc)
    for (int p = box.p.lo; p <= box.p.hi; ++p)
      for (int pp = box.pp.lo; pp <= box.pp.hi; ++pp) {
        const bool face = cc == box.cc.lo || cc == box.cc.hi || p == box.p.lo || p == box.p.hi ||
                          pp == box.pp.lo || pp == box.pp.hi;
        if (!face) continue;
        const double v = value(cc, p, pp);
        bool top = true;
        for (int dc = -1; dc <= 1 && top; ++dc)
          for (int dp = -1; dp <= 1 && top; ++dp)
            for (int dq = -1; dq <= 1 && top; ++dq) {
              if (dc == 0 && dp == 0 && dq == 0) continue;
              const int c2 = cc + dc, p2 = p + dp, q2 = pp + dq;
              if (c2 < box.cc.lo || c2 > box.cc.hi || p2 < box.p.lo || p2 > box.p.hi ||
                  q2 < box.pp.lo || q2 > box.pp.hi)
                continue;
              if (value(c2, p2, q2) > v) top = false;
            }
        if (top) out.push_back({to_point({cc, p, pp}), v, CriticalKind::kMax, true});
      }
  return out;
}

SurfaceArgmax surface_argmax(const ThroughputSurface& s, const LatticeBounds& bounds) {
  const LatticeBox box = lattice_box(s, bounds);
  SurfaceArgmax best{{1, 1, 1}, -std::numeric_limits<double>::infinity()};
  if (box.empty()) return {{1, 1, 1}, 0.0};
  auto consider = [&](const ParamTriple& t) {
    const double v = eval(s, t);
    if (better(v, t, best)) best = {t, v};
  };
  // Snap every continuous maximum to its surrounding lattice corners.
  for (const auto& c : local_maxima(s, bounds)) {
    if (c.classification != CriticalKind::kMax) continue;
    for (int corner = 0; corner < 8; ++corner) {
      auto snap = [&](double v, const IntRange& r, bool up) {
        return std::clamp(static_cast<int>(up ? std::ceil(v) : std::floor(v)), r.lo, r.hi);
      };
      consider({snap(c.location.cc, box.cc, corner & 1), snap(c.location.p, box.p, corner & 2),
                snap(c.location.pp, box.pp, corner & 4)});
    }
  }
  // Continuous maxima need not sit next to the best lattice point, so every
  // lattice point in the hull is a candidate as well.
  for (int cc = box.cc.lo; cc <= box.cc.hi; ++cc)
    for (int p = box.p.lo; p <= box.p.hi; ++p)
      for (int pp = box.pp.lo; pp <= box.pp.hi; ++pp) consider({cc, p, pp});
  return best;
}

SurfaceArgmax grid_argmax_oracle(const ThroughputSurface& s, const LatticeBounds& bounds) {
  const LatticeBox box = lattice_box(s, bounds);
  if (box.empty()) return {{1, 1, 1}, 0.0};
  SurfaceArgmax best{{box.cc.lo, box.p.lo, box.pp.lo}, eval(s, {box.cc.lo, box.p.lo, box.pp.lo})};
  for (int cc = box.cc.lo; cc <= box.cc.hi; ++cc)
    for (int p = box.p.lo; p <= box.p.hi; ++p)
      for (int pp = box.pp.lo; pp <= box.pp.hi; ++pp) {
        const double v = eval(s, {cc, p, pp});
        if (better(v, {cc, p, pp}, best)) best = {{cc, p, pp}, v};
      }
  return best;
}

}  // namespace xfer
