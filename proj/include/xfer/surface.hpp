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

// Throughput surfaces over the (cc, p, pp) parameter space: bicubic sheets at
// each observed pipelining depth, joined along pp by a relaxed cubic curve,
// with Gaussian confidence envelopes at lattice points.

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "xfer/ingest.hpp"
#include "xfer/regression.hpp"
#include "xfer/spline.hpp"
#include "xfer/types.hpp"

namespace xfer {

/// A continuous point of parameter space.
struct Point3 {
  double p = 0.0;
  double cc = 0.0;
  double pp = 0.0;
};

inline Point3 to_point(const ParamTriple& t) { return {double(t.p), double(t.cc), double(t.pp)}; }

/// Axis-aligned box spanned by the observed parameter values.
struct ParamHull {
  double p_lo = 1.0, p_hi = 1.0;
  double cc_lo = 1.0, cc_hi = 1.0;
  double pp_lo = 1.0, pp_hi = 1.0;

  bool contains(const Point3& x) const;
  Point3 clamp(const Point3& x) const;
};

struct Confidence {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t count = 0;
  bool synthetic = false;  ///< hole: sigma borrowed from neighbours
};

using ConfidenceMap = std::map<ParamTriple, Confidence>;

/// Aggregate of the observations at one lattice point.
struct NodeStats {
  ParamTriple params;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  ///< population form
};

/// Rounds sample parameters to integers and pools duplicates; sorted by params.
std::vector<NodeStats> node_stats(std::span<const ThroughputSample> samples);

/// Pools two node lists (parallel-variance merge where params coincide).
std::vector<NodeStats> merge_node_stats(std::span<const NodeStats> a, std::span<const NodeStats> b);

/// Observations quantized onto the product of observed axis values.
/// Values are stored p-major: index (i * ccs.size() + j) * pps.size() + k.
struct LatticeGrid {
  std::vector<double> ps;
  std::vector<double> ccs;
  std::vector<double> pps;
  std::vector<double> values;
  std::vector<double> stddevs;       ///< population sigma of the samples, 0 at holes
  std::vector<std::size_t> counts;   ///< samples per node, 0 at holes
  std::size_t holes = 0;
  double fill_fraction = 0.0;

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
    return (i * ccs.size() + j) * pps.size() + k;
  }
  bool observed(std::size_t n) const { return counts[n] > 0; }
};

/// Rounds parameters to integers, averages duplicates and fills holes by
/// iterating axis-wise linear interpolation between neighbours until the
/// values stop changing. Nodes with no bracketing neighbours on any axis
/// take the mean of their known neighbours.
LatticeGrid build_grid(std::span<const ThroughputSample> samples);
LatticeGrid build_grid(std::span<const NodeStats> nodes);

/// Pools groups that share parameters and records (mu, sigma) per point.
ConfidenceMap confidence_envelope(std::span<const ObservationGroup> groups);

/// Adds an entry for every unobserved node of `grid`, with mu from the
/// filled grid and sigma the mean of the face-adjacent observed sigmas.
void fill_confidence_holes(ConfidenceMap& confidence, const LatticeGrid& grid);

enum class SurfaceKind {
  kSpline,      ///< bicubic sheets blended along pp
  kRegression,  ///< too little lattice coverage: polynomial fallback
};

struct SurfaceArgmax {
  ParamTriple params;
  double value = 0.0;
};

struct ThroughputSurface {
  int cluster_id = 0;
  LoadIntensity load_tag;
  SurfaceKind kind = SurfaceKind::kSpline;
  CubicSpline1D pp_curve;                  ///< mean sheet value at each pp knot
  std::vector<BicubicGridSurface> sheets;  ///< x = p, y = cc; one per pp knot
  std::optional<RegressionModel> regression;
  ParamHull hull;
  ConfidenceMap confidence;
  std::optional<SurfaceArgmax> argmax;
  std::size_t sample_count = 0;
  double fill_fraction = 0.0;
  bool low_confidence = false;

  const std::vector<double>& pp_knots() const { return pp_curve.knots(); }
};

struct SurfaceOptions {
  double max_fill_fraction = 0.5;
};

/// Fits the spline surface when both p and cc have at least three observed
/// values; otherwise falls back to the richest regression the data supports.
/// The regression fallback is fitted to node means.
ThroughputSurface fit_throughput_surface(std::span<const NodeStats> nodes,
                                         const SurfaceOptions& options = {});
ThroughputSurface fit_throughput_surface(std::span<const ThroughputSample> samples,
                                         const SurfaceOptions& options = {});

/// Observed (non-synthetic) confidence entries as node statistics.
std::vector<NodeStats> observed_nodes(const ThroughputSurface& surface);

/// Rebuilds the pp curve from the sheets (mean node value per sheet).
CubicSpline1D pp_curve_from_sheets(const std::vector<double>& pp_knots,
                                   const std::vector<BicubicGridSurface>& sheets);

struct EvalResult {
  double value = 0.0;
  bool clamped = false;  ///< query was outside the hull and moved onto it
};

EvalResult eval_point(const ThroughputSurface& surface, const Point3& x);
double eval(const ThroughputSurface& surface, const ParamTriple& params);

/// Blend weight toward the upper sheet of pp piece k and its first two
/// derivatives with respect to pp.
struct BlendWeight {
  double w = 0.0;
  double dw = 0.0;
  double d2w = 0.0;
};

BlendWeight blend_weight(const CubicSpline1D& pp_curve, std::size_t piece, double pp);

/// Value, gradient and Hessian of the unclamped model, ordered (p, cc, pp).
struct SurfaceDerivatives {
  double value = 0.0;
  std::array<double, 3> gradient{};
  std::array<std::array<double, 3>, 3> hessian{};
};

/// Cell indices: p cell, cc cell and pp piece. Coordinates on a seam belong
/// to the cell on their right.
struct SurfaceCell {
  std::size_t ip = 0;
  std::size_t jc = 0;
  std::size_t kp = 0;
};

SurfaceCell locate_cell(const ThroughputSurface& surface, const Point3& x);
SurfaceDerivatives derivatives(const ThroughputSurface& surface, const Point3& x);
SurfaceDerivatives derivatives_in_cell(const ThroughputSurface& surface, const SurfaceCell& cell,
                                       const Point3& x);

/// Sigma of the nearest confidence entry, by lattice distance.
double confidence_sigma(const ThroughputSurface& surface, const Point3& x);

inline constexpr double kDefaultZ = 1.96;
inline constexpr double kSigmaFloorFraction = 0.05;

/// |observed - mu| <= z * max(sigma, 5% of mu), mu taken from the model.
bool within_confidence(const ThroughputSurface& surface, const ParamTriple& params,
                       double observed_mbps, double z = kDefaultZ);

}  // namespace xfer
