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

// Least-squares polynomial baselines over (p, cc, pp).

#pragma once

#include <span>
#include <string>
#include <vector>

namespace xfer {

/// One observation in continuous parameter space.
struct ThroughputSample {
  double p = 0.0;
  double cc = 0.0;
  double pp = 0.0;
  double throughput = 0.0;
};

enum class RegressionKind {
  kConstant,   ///< intercept only; degenerate fallback
  kQuadratic,  ///< every monomial of total degree <= 2 (10 terms)
  kCubic,      ///< every monomial of total degree <= 3 (20 terms)
};

/// Exponents of p, cc and pp for one regression term.
struct Monomial {
  int p = 0;
  int cc = 0;
  int pp = 0;
};

std::vector<Monomial> regression_terms(RegressionKind kind);
std::string term_name(const Monomial& m);

struct RegressionModel {
  RegressionKind kind = RegressionKind::kConstant;
  std::vector<double> coefficients;  ///< aligned with regression_terms(kind)
  double r_squared = 0.0;

  /// Raw polynomial value; callers clamp at zero.
  double eval(double p, double cc, double pp) const;
};

/// Ordinary least squares. Throws DataError naming the deficient terms when
/// the design matrix is rank deficient, PreconditionError when there are
/// fewer points than coefficients.
RegressionModel fit_regression(std::span<const ThroughputSample> points, RegressionKind kind);

}  // namespace xfer
