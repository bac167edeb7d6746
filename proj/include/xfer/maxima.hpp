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

// Critical points of fitted throughput surfaces and the lattice argmax.

#pragma once

#include <array>
#include <vector>

#include "xfer/surface.hpp"
#include "xfer/types.hpp"

namespace xfer {

using Matrix3 = std::array<std::array<double, 3>, 3>;

enum class CriticalKind { kMax, kMin, kSaddle, kDegenerate };

const char* to_string(CriticalKind kind);

struct CriticalPoint {
  Point3 location;
  double value = 0.0;
  CriticalKind classification = CriticalKind::kDegenerate;
  bool boundary = false;  ///< lattice point on the hull that beats its neighbours
  bool on_knot = false;   ///< kink maximum on a pp knot plane; only the (p, cc) block is definite
};

/// Analytic gradient and Hessian, ordered (p, cc, pp). Points on a seam use
/// the cell to their right.
std::array<double, 3> gradient_at(const ThroughputSurface& surface, const Point3& x);
Matrix3 hessian_at(const ThroughputSurface& surface, const Point3& x);

/// Second-derivative test on the leading `dims` rows and columns:
/// alternating leading minors starting negative means a maximum.
CriticalKind classify_hessian(const Matrix3& h, int dims = 3);

/// Interior critical points classified as maxima or degenerate, found by
/// Newton's method from a 3x3x3 set of starts in every cell; (p, cc) maxima
/// on a pp knot plane where pp rises into the knot and falls after it; and
/// lattice points on the hull boundary that are no lower than any of their
/// 26 lattice neighbours.
std::vector<CriticalPoint> local_maxima(const ThroughputSurface& surface,
                                        const LatticeBounds& bounds = {});

/// Best lattice point among the snapped corners of every local maximum and
/// all lattice points inside the hull. Ties go to the smallest (cc, p, pp).
SurfaceArgmax surface_argmax(const ThroughputSurface& surface, const LatticeBounds& bounds = {});

/// Exhaustive scan of the lattice inside the hull with the same tie-break.
SurfaceArgmax grid_argmax_oracle(const ThroughputSurface& surface,
                                 const LatticeBounds& bounds = {});

}  // namespace xfer
