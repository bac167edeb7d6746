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

// Sampling regions of a surface family: lattice balls around each surface's
// argmax plus the points where the surfaces are most distinguishable.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xfer/surface.hpp"
#include "xfer/types.hpp"

namespace xfer {

/// Chebyshev ball on the integer lattice.
struct MaximaBall {
  ParamTriple center;
  int radius = 0;

  bool contains(const ParamTriple& t) const;
  friend bool operator==(const MaximaBall&, const MaximaBall&) = default;
};

struct SeparationPoint {
  ParamTriple point;
  double score = 0.0;  ///< smallest |f_i - f_j| over surface pairs
  friend bool operator==(const SeparationPoint&, const SeparationPoint&) = default;
};

struct SamplingRegion {
  std::vector<MaximaBall> maxima;
  std::vector<SeparationPoint> separation;
  bool separation_undefined = false;  ///< fewer than two surfaces

  bool contains(const ParamTriple& t) const;
  friend bool operator==(const SamplingRegion&, const SamplingRegion&) = default;
};

struct RegionConfig {
  int radius = 2;
  std::size_t samples = 256;  ///< lattice points drawn
  std::size_t keep = 8;       ///< best separated points kept
};

/// One ball per distinct argmax, sorted by centre. Throws PreconditionError
/// when a surface has no precomputed argmax.
std::vector<MaximaBall> maxima_neighborhoods(std::span<const ThroughputSurface> surfaces, int radius);

/// Minimum pairwise surface gap at a lattice point.
double separation_score(std::span<const ThroughputSurface> surfaces, const ParamTriple& t);

/// Draws `samples` distinct lattice points, scores each by its minimum
/// pairwise gap and keeps the `keep` largest (ties to the smaller point).
/// Fewer than two surfaces give an empty list and set `undefined`.
std::vector<SeparationPoint> maxmin_separation(std::span<const ThroughputSurface> surfaces,
                                               std::size_t samples, std::size_t keep,
                                               std::uint64_t seed, const LatticeBounds& bounds,
                                               bool* undefined = nullptr);

SamplingRegion sampling_region(std::span<const ThroughputSurface> surfaces,
                               const RegionConfig& config, std::uint64_t seed,
                               const LatticeBounds& bounds = {});

}  // namespace xfer
