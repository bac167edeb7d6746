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

#include "xfer/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "xfer/error.hpp"
#include "xfer/random.hpp"

namespace xfer {
namespace {

// Distinct points with multiplicities; `index_of[i]` maps input i to its
// distinct point.
struct WeightedPoints {
  std::vector<FeatureVector> points;
  std::vector<double> weights;
  std::vector<std::size_t> index_of;
};

WeightedPoints dedupe(std::span<const FeatureVector> points) {
  WeightedPoints w;
  std::map<FeatureVector, std::size_t> seen;
  w.index_of.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto [it, fresh] = seen.try_emplace(points[i], w.points.size());
    if (fresh) {
      w.points.push_back(points[i]);
      w.weights.push_back(0.0);
    }
    w.weights[it->second] += 1.0;
    w.index_of[i] = it->second;
  }
  return w;
}

std::size_t nearest(const FeatureVector& x, const std::vector<FeatureVector>& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(x, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// Renumbers clusters by first appearance in input order and fills sizes,
// centroids and within-dispersion from the raw points.
Clustering finalize(std::span<const FeatureVector> points, std::vector<std::size_t> assign) {
  std::map<std::size_t, std::size_t> relabel;
  for (auto& a : assign) {
    const auto [it, fresh] = relabel.try_emplace(a, relabel.size());
    a = it->second;
  }
  Clustering c;
  const std::size_t m = relabel.size();
  c.centroids.assign(m, FeatureVector{});
  c.sizes.assign(m, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    ++c.sizes[assign[i]];
    for (std::size_t d = 0; d < kFeatureDim; ++d) c.centroids[assign[i]][d] += points[i][d];
  }
  for (std::size_t k = 0; k < m; ++k)
    for (auto& v : c.centroids[k]) v /= static_cast<double>(c.sizes[k]);
  for (std::size_t i = 0; i < points.size(); ++i)
    c.within += squared_distance(points[i], c.centroids[assign[i]]);
  c.assignments = std::move(assign);
  return c;
}

}  // namespace

FeatureVector raw_features(const NetworkProfile& n, const DatasetProfile& d) {
  return {n.bandwidth_mbps, n.rtt_ms, std::log10(std::max(d.avg_file_bytes, 1.0)),
          std::log10(static_cast<double>(std::max<std::uint64_t>(d.num_files, 1))),
          n.tcp_buffer_bytes};
}

FeatureVector FeatureNormalization::apply(const FeatureVector& raw) const {
  FeatureVector out{};
  for (std::size_t d = 0; d < kFeatureDim; ++d) {
    const double span = max[d] - min[d];
    out[d] = span > 0.0 ? (raw[d] - min[d]) / span : 0.0;
  }
  return out;
}

FeatureNormalization fit_normalization(std::span<const FeatureVector> raw) {
  FeatureNormalization n;
  if (raw.empty()) return n;
  n.min = raw.front();
  n.max = raw.front();
  for (const auto& v : raw)
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
      n.min[d] = std::min(n.min[d], v[d]);
      n.max[d] = std::max(n.max[d], v[d]);
    }
  return n;
}

double squared_distance(const FeatureVector& a, const FeatureVector& b) {
  double s = 0.0;
  for (std::size_t d = 0; d < kFeatureDim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

Clustering kmeans_pp(std::span<const FeatureVector> points, std::size_t m, std::uint64_t seed,
                     const KMeansOptions& options) {
  if (points.empty()) throw PreconditionError("k-means on an empty point set");
  if (m == 0) throw PreconditionError("k-means needs m >= 1");
  const WeightedPoints w = dedupe(points);
  const std::size_t u = w.points.size();
  if (u == 1) {
    auto c = finalize(points, std::vector<std::size_t>(points.size(), 0));
    c.degenerate = m > 1;
    return c;
  }
  if (m > u)
    throw PreconditionError("k-means: m = " + std::to_string(m) + " exceeds " +
                            std::to_string(u) + " distinct points");

  std::mt19937_64 rng(seed);
  auto draw = [&](const std::vector<double>& mass) {
    const double total = std::accumulate(mass.begin(), mass.end(), 0.0);
    double r = unit_double(rng) * total;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      if (mass[i] <= 0.0) continue;
      if (r < mass[i]) return i;
      r -= mass[i];
    }
    for (std::size_t i = mass.size(); i-- > 0;)
      if (mass[i] > 0.0) return i;
    return std::size_t{0};
  };

  // D^2 seeding over distinct points weighted by multiplicity.
  std::vector<FeatureVector> centroids;
  centroids.push_back(w.points[draw(w.weights)]);
  std::vector<double> d2(u);
  while (centroids.size() < m) {
    for (std::size_t i = 0; i < u; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, squared_distance(w.points[i], c));
      d2[i] = w.weights[i] * best;
    }
    centroids.push_back(w.points[draw(d2)]);
  }

  std::vector<std::size_t> assign(u, m);
  std::vector<double> trace;
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < u; ++i) {
      const std::size_t a = nearest(w.points[i], centroids);
      changed |= a != assign[i];
      assign[i] = a;
    }
    // Empty clusters take the point farthest from its centroid.
    for (std::size_t k = 0; k < m; ++k) {
      if (std::find(assign.begin(), assign.end(), k) != assign.end()) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < u; ++i) {
        const double d = squared_distance(w.points[i], centroids[assign[i]]);
        const bool donor_ok = std::count(assign.begin(), assign.end(), assign[i]) > 1;
        if (donor_ok && d > far_d) {
          far_d = d;
          far = i;
        }
      }
      assign[far] = k;
      changed = true;
    }
    std::vector<FeatureVector> sums(m, FeatureVector{});
    std::vector<double> mass(m, 0.0);
    for (std::size_t i = 0; i < u; ++i) {
      mass[assign[i]] += w.weights[i];
      for (std::size_t d = 0; d < kFeatureDim; ++d)
        sums[assign[i]][d] += w.weights[i] * w.points[i][d];
    }
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t d = 0; d < kFeatureDim; ++d) centroids[k][d] = sums[k][d] / mass[k];
    double objective = 0.0;
    for (std::size_t i = 0; i < u; ++i)
      objective += w.weights[i] * squared_distance(w.points[i], centroids[assign[i]]);
    trace.push_back(objective);
    if (!changed && iter > 0) break;
  }

  std::vector<std::size_t> per_point(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) per_point[i] = assign[w.index_of[i]];
  auto c = finalize(points, std::move(per_point));
  c.objective_trace = std::move(trace);
  return c;
}

Clustering hac_upgma(std::span<const FeatureVector> points, std::size_t m) {
  const std::size_t n = points.size();
  if (m == 0) throw PreconditionError("agglomerative clustering needs m >= 1");
  if (m > n)
    throw PreconditionError("agglomerative clustering: m = " + std::to_string(m) + " exceeds " +
                            std::to_string(n) + " points");

  // Identical points merge first at height zero, so start from distinct
  // points unless m forces duplicates apart.
  WeightedPoints w = dedupe(points);
  std::vector<double> heights;
  if (m > w.points.size()) {
    w.points.assign(points.begin(), points.end());
    w.weights.assign(n, 1.0);
    w.index_of.resize(n);
    std::iota(w.index_of.begin(), w.index_of.end(), 0);
  } else {
    heights.assign(n - w.points.size(), 0.0);
  }

  const std::size_t u = w.points.size();
  std::vector<FeatureVector> centroid = w.points;
  std::vector<double> weight = w.weights;
  std::vector<bool> active(u, true);
  std::vector<std::size_t> owner(u);
  std::iota(owner.begin(), owner.end(), 0);

  std::vector<double> dist(u * u, 0.0);
  for (std::size_t i = 0; i < u; ++i)
    for (std::size_t j = i + 1; j < u; ++j)
      dist[i * u + j] = dist[j * u + i] = std::sqrt(squared_distance(centroid[i], centroid[j]));

  for (std::size_t remaining = u; remaining > m; --remaining) {
    std::size_t bi = 0, bj = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < u; ++i) {
      if (!active[i]) continue;
      for (std::size_t j = i + 1; j < u; ++j) {
        if (active[j] && dist[i * u + j] < best) {
          best = dist[i * u + j];
          bi = i;
          bj = j;
        }
      }
    }
    heights.push_back(best);
    const double wi = weight[bi], wj = weight[bj];
    for (std::size_t d = 0; d < kFeatureDim; ++d)
      centroid[bi][d] = (wi * centroid[bi][d] + wj * centroid[bj][d]) / (wi + wj);
    weight[bi] = wi + wj;
    active[bj] = false;
    for (auto& o : owner)
      if (o == bj) o = bi;
    for (std::size_t k = 0; k < u; ++k) {
      if (!active[k] || k == bi) continue;
      dist[bi * u + k] = dist[k * u + bi] = std::sqrt(squared_distance(centroid[bi], centroid[k]));
    }
  }

  std::vector<std::size_t> per_point(n);
  for (std::size_t i = 0; i < n; ++i) per_point[i] = owner[w.index_of[i]];
  auto c = finalize(points, std::move(per_point));
  c.merge_distances = std::move(heights);
  return c;
}

double ch_index(std::span<const FeatureVector> points, const Clustering& clustering) {
  const std::size_t n = points.size();
  const std::size_t m = clustering.centroids.size();
  if (m < 2 || m + 1 > n)
    throw PreconditionError("CH index needs 2 <= m <= n - 1 (m = " + std::to_string(m) +
                            ", n = " + std::to_string(n) + ")");
  FeatureVector overall{};
  std::vector<FeatureVector> means(m, FeatureVector{});
  std::vector<double> counts(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = clustering.assignments[i];
    counts[k] += 1.0;
    for (std::size_t d = 0; d < kFeatureDim; ++d) {
      means[k][d] += points[i][d];
      overall[d] += points[i][d];
    }
  }
  for (auto& v : overall) v /= static_cast<double>(n);
  for (std::size_t k = 0; k < m; ++k)
    for (auto& v : means[k]) v /= counts[k];

  double between = 0.0, within = 0.0;
  for (std::size_t k = 0; k < m; ++k) between += counts[k] * squared_distance(means[k], overall);
  for (std::size_t i = 0; i < n; ++i)
    within += squared_distance(points[i], means[clustering.assignments[i]]);
  if (within <= 0.0) return std::numeric_limits<double>::infinity();
  return (between / static_cast<double>(m - 1)) / (within / static_cast<double>(n - m));
}

KSelection select_k(std::span<const FeatureVector> points, std::size_t m_lo, std::size_t m_hi,
                    ClusterMethod method, std::uint64_t seed, std::size_t restarts) {
  const std::size_t n = points.size();
  if (m_lo < 2 || m_lo > m_hi || m_hi + 1 > n)
    throw PreconditionError("select_k: range [" + std::to_string(m_lo) + ", " +
                            std::to_string(m_hi) + "] must lie within [2, n - 1]");
  KSelection best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t m = m_lo; m <= m_hi; ++m) {
    Clustering c;
    if (method == ClusterMethod::kHac) {
      c = hac_upgma(points, m);
    } else {
      for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
        auto trial = kmeans_pp(points, m, seed + 7919 * m + r);
        if (r == 0 || trial.within < c.within) c = std::move(trial);
      }
    }
    const double score = m_lo == m_hi ? 0.0 : ch_index(points, c);
    best.scores.emplace_back(m, score);
    if (score > best_score) {
      best_score = score;
      best.m = m;
      best.clustering = std::move(c);
    }
  }
  return best;
}

}  // namespace xfer
