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

// Interpolating cubic splines: the 1-D relaxed (natural) spline over
// pipelining depth and the tensor-product bicubic spline over (p, cc).

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace xfer {

/// One cubic piece in local form: g(x) = c0 + c1 t + c2 t^2 + c3 t^3 with
/// t = x - knot, where knot is the left end of the piece.
struct SplinePiece {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

/// Value and first three derivatives at a point.
struct Jet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

class CubicSpline1D {
 public:
  CubicSpline1D() = default;

  /// Rebuilds a spline from stored pieces; `values` holds the knot values.
  static CubicSpline1D from_pieces(std::vector<double> knots, std::vector<double> values,
                                   std::vector<SplinePiece> pieces);

  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  std::span<const SplinePiece> pieces() const { return pieces_; }
  bool empty() const { return knots_.empty(); }

  /// Set when fewer than three distinct knots forced a linear (or constant)
  /// interpolant.
  bool linear_fallback() const { return knots_.size() < 3; }

  /// Number of polynomial coefficients solved for: 4(N-1).
  std::size_t unknown_count() const { return 4 * pieces_.size(); }

  /// Piece containing x under the left-closed convention, x clamped to the
  /// knot range. Only valid when at least two knots exist.
  std::size_t piece_index(double x) const;

  double operator()(double x) const { return jet(x).value; }
  Jet jet(double x) const;

  /// First derivative at knot i (right-hand piece, left-hand at the last knot).
  double knot_slope(std::size_t i) const;

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  std::vector<SplinePiece> pieces_;

  friend CubicSpline1D fit_spline_1d(std::span<const std::pair<double, double>> points);
};

/// Fits the relaxed cubic spline through (x, y) points. Points are sorted and
/// duplicate x values averaged first. Second derivatives vanish at both ends.
CubicSpline1D fit_spline_1d(std::span<const std::pair<double, double>> points);

/// Corner data of a bicubic Hermite patch.
struct HermiteNode {
  double f = 0.0;
  double fx = 0.0;
  double fy = 0.0;
  double fxy = 0.0;
};

struct Partials2D {
  double f = 0.0;
  double fx = 0.0;
  double fy = 0.0;
  double fxx = 0.0;
  double fxy = 0.0;
  double fyy = 0.0;
};

/// Piecewise bicubic surface on an N x M rectangular grid. Each rectangle
/// carries a 4x4 coefficient block in normalized local coordinates
/// s = (x - x_i) / hx, t = (y - y_j) / hy.
class BicubicGridSurface {
 public:
  using Block = std::array<double, 16>;  // row-major: a[k][l] multiplies s^k t^l

  BicubicGridSurface() = default;

  /// Builds patches from node data. Nodes are row-major: index i * M + j for
  /// grid point (xs[i], ys[j]).
  static BicubicGridSurface from_nodes(std::vector<double> xs, std::vector<double> ys,
                                       std::vector<HermiteNode> nodes);

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }
  const std::vector<HermiteNode>& nodes() const { return nodes_; }
  const Block& block(std::size_t i, std::size_t j) const { return blocks_[i * (ys_.size() - 1) + j]; }

  std::size_t cell_x(double x) const;
  std::size_t cell_y(double y) const;

  double operator()(double x, double y) const;
  Partials2D partials(double x, double y) const;
  /// Partials using an explicit cell, for seam-side evaluation.
  Partials2D partials_in_cell(std::size_t i, std::size_t j, double x, double y) const;

 private:
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::vector<HermiteNode> nodes_;
  std::vector<Block> blocks_;
};

/// Tensor-product relaxed bicubic spline through a complete grid. `values`
/// is row-major (xs.size() x ys.size()). Requires at least three grid lines
/// per axis and no NaN (hole) entries.
BicubicGridSurface fit_surface_2d(std::span<const double> xs, std::span<const double> ys,
                                  std::span<const double> values);

}  // namespace xfer
