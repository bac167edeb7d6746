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

#include "xfer/regions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "xfer/error.hpp"
#include "xfer/random.hpp"

namespace xfer {

bool MaximaBall::contains(const ParamTriple& t) const {
  return std::abs(t.cc - center.cc) <= radius && std::abs(t.p - center.p) <= radius &&
         std::abs(t.pp - center.pp) <= radius;
}

bool SamplingRegion::contains(const ParamTriple& t) const {
  return std::any_of(maxima.begin(), maxima.end(), [&](const MaximaBall& b) { return b.contains(t); }) ||
         std::any_of(separation.begin(), separation.end(),
                     [&](const SeparationPoint& s) { return s.point == t; });
}

std::vector<MaximaBall> maxima_neighborhoods(std::span<const ThroughputSurface> surfaces,
                                             int radius) {
  std::set<ParamTriple> centres;
  for (const auto& s : surfaces) {
    if (!s.argmax) throw PreconditionError("surface has no precomputed argmax");
    centres.insert(s.argmax->params);
  }
  std::vector<MaximaBall> out;
  for (const auto& c : centres) out.push_back({c, radius});
  return out;
}

double separation_score(std::span<const ThroughputSurface> surfaces, const ParamTriple& t) {
  std::vector<double> v;
  v.reserve(surfaces.size());
  for (const auto& s : surfaces) v.push_back(eval(s, t));
  // The closest pair is adjacent once sorted, which also makes the score
  // independent of surface order.
  std::sort(v.begin(), v.end());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < v.size(); ++i) best = std::min(best, v[i] - v[i - 1]);
  return best;
}

std::vector<SeparationPoint> maxmin_separation(std::span<const ThroughputSurface> surfaces,
                                               std::size_t samples, std::size_t keep,
                                               std::uint64_t seed, const LatticeBounds& bounds,
                                               bool* undefined) {
  if (undefined) *undefined = surfaces.size() < 2;
  if (surfaces.size() < 2) return {};
  if (!(keep > 1 && keep < samples))
    throw PreconditionError("separation needs 1 < keep < samples");
  samples = std::min<std::size_t>(samples, bounds.size());
  keep = std::min(keep, samples);

  std::mt19937_64 rng(seed);
  std::set<ParamTriple> drawn;
  while (drawn.size() < samples) {
    const auto n = uniform_index(rng, bounds.size());
    const int cc = static_cast<int>(n / (bounds.max_p * bounds.max_pp)) + 1;
    const int p = static_cast<int>(n / bounds.max_pp % bounds.max_p) + 1;
    const int pp = static_cast<int>(n % bounds.max_pp) + 1;
    drawn.insert({cc, p, pp});
  }
  std::vector<SeparationPoint> scored;
  for (const auto& t : drawn) scored.push_back({t, separation_score(surfaces, t)});
  std::stable_sort(scored.begin(), scored.end(),
                   [](const SeparationPoint& a, const SeparationPoint& b) { return a.score > b.score; });
  scored.resize(keep);
  return scored;
}

SamplingRegion sampling_region(std::span<const ThroughputSurface> surfaces,
                               const RegionConfig& config, std::uint64_t seed,
                               const LatticeBounds& bounds) {
  SamplingRegion r;
  r.maxima = maxima_neighborhoods(surfaces, config.radius);
  r.separation = maxmin_separation(surfaces, config.samples, config.keep, seed, bounds,
                                   &r.separation_undefined);
  return r;
}

}  // namespace xfer
