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

#include "xfer/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "xfer/error.hpp"

namespace xfer {
namespace {

int degree_of(RegressionKind kind) {
  switch (kind) {
    case RegressionKind::kConstant: return 0;
    case RegressionKind::kQuadratic: return 2;
    case RegressionKind::kCubic: return 3;
  }
  return 0;
}

double ipow(double x, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= x;
  return r;
}

double term_value(const Monomial& m, double p, double cc, double pp) {
  return ipow(p, m.p) * ipow(cc, m.cc) * ipow(pp, m.pp);
}

}  // namespace

std::vector<Monomial> regression_terms(RegressionKind kind) {
  std::vector<Monomial> terms;
  for (int d = degree_of(kind); d >= 0; --d)
    for (int a = d; a >= 0; --a)
      for (int b = d - a; b >= 0; --b) terms.push_back({a, b, d - a - b});
  // Highest powers of single variables first, matching the usual written form.
  std::stable_sort(terms.begin(), terms.end(), [](const Monomial& x, const Monomial& y) {
    const int dx = x.p + x.cc + x.pp, dy = y.p + y.cc + y.pp;
    if (dx != dy) return dx > dy;
    const int mx = std::max({x.p, x.cc, x.pp}), my = std::max({y.p, y.cc, y.pp});
    return mx > my;
  });
  return terms;
}

std::string term_name(const Monomial& m) {
  std::string out;
  auto add = [&](const char* v, int e) {
    if (e == 0) return;
    if (!out.empty()) out += '*';
    out += v;
    if (e > 1) out += '^' + std::to_string(e);
  };
  add("p", m.p);
  add("cc", m.cc);
  add("pp", m.pp);
  return out.empty() ? "1" : out;
}

double RegressionModel::eval(double p, double cc, double pp) const {
  const auto terms = regression_terms(kind);
  double v = 0.0;
  for (std::size_t i = 0; i < terms.size() && i < coefficients.size(); ++i)
    v += coefficients[i] * term_value(terms[i], p, cc, pp);
  return v;
}

RegressionModel fit_regression(std::span<const ThroughputSample> points, RegressionKind kind) {
  const auto terms = regression_terms(kind);
  const auto n = static_cast<Eigen::Index>(points.size());
  const auto k = static_cast<Eigen::Index>(terms.size());
  if (n < k)
    throw PreconditionError("regression needs at least " + std::to_string(k) + " points, got " +
                            std::to_string(n));

  // Columns are fitted on variables scaled to O(1) for conditioning.
  double sp = 0.0, scc = 0.0, spp = 0.0;
  for (const auto& s : points) {
    sp = std::max(sp, std::abs(s.p));
    scc = std::max(scc, std::abs(s.cc));
    spp = std::max(spp, std::abs(s.pp));
  }
  if (sp == 0.0) sp = 1.0;
  if (scc == 0.0) scc = 1.0;
  if (spp == 0.0) spp = 1.0;

  Eigen::MatrixXd a(n, k);
  Eigen::VectorXd y(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& s = points[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < k; ++c)
      a(r, c) = term_value(terms[static_cast<std::size_t>(c)], s.p / sp, s.cc / scc, s.pp / spp);
    y(r) = s.throughput;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index c = qr.rank(); c < k; ++c) {
      if (!names.empty()) names += ", ";
      names += term_name(terms[static_cast<std::size_t>(perm(c))]);
    }
    throw DataError("design matrix", "rank deficient in terms: " + names);
  }
  const Eigen::VectorXd scaled = qr.solve(y);

  RegressionModel model;
  model.kind = kind;
  model.coefficients.resize(terms.size());
  for (std::size_t c = 0; c < terms.size(); ++c) {
    const auto& t = terms[c];
    model.coefficients[c] =
        scaled(static_cast<Eigen::Index>(c)) / (ipow(sp, t.p) * ipow(scc, t.cc) * ipow(spp, t.pp));
  }

  const Eigen::VectorXd resid = y - a * scaled;
  const double mean = y.mean();
  const double ss_tot = (y.array() - mean).square().sum();
  const double ss_res = resid.squaredNorm();
  model.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res <= 1e-20 ? 1.0 : 0.0);
  return model;
}

}  // namespace xfer
