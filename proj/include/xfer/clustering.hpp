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

// Clustering of transfer profiles: k-means++ and centroid-linkage
// agglomerative clustering, with cluster-count selection by the
// Calinski-Harabasz index.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "xfer/types.hpp"

namespace xfer {

inline constexpr std::size_t kFeatureDim = 5;

/// bandwidth, rtt, log10(avg file size), log10(file count), tcp buffer.
using FeatureVector = std::array<double, kFeatureDim>;

FeatureVector raw_features(const NetworkProfile& network, const DatasetProfile& dataset);

/// Min-max scaling fitted over a corpus.
struct FeatureNormalization {
  FeatureVector min{};
  FeatureVector max{};

  /// Components outside the fitted range are not clamped.
  FeatureVector apply(const FeatureVector& raw) const;
};

FeatureNormalization fit_normalization(std::span<const FeatureVector> raw);

double squared_distance(const FeatureVector& a, const FeatureVector& b);

struct Clustering {
  std::vector<std::size_t> assignments;  ///< per input point, 0-based cluster id
  std::vector<FeatureVector> centroids;
  std::vector<std::size_t> sizes;
  double within = 0.0;  ///< sum of squared distances to assigned centroids
  bool degenerate = false;  ///< all points identical; collapsed to one cluster
  std::vector<double> objective_trace;  ///< k-means objective after each Lloyd step
  std::vector<double> merge_distances;  ///< agglomerative merge heights, in order
};

struct KMeansOptions {
  std::size_t max_iterations = 100;
};

/// D^2-seeded k-means refined by Lloyd iterations. Throws PreconditionError
/// when m exceeds the number of distinct points (unless all points coincide,
/// which yields one cluster flagged `degenerate`).
Clustering kmeans_pp(std::span<const FeatureVector> points, std::size_t m, std::uint64_t seed,
                     const KMeansOptions& options = {});

/// Agglomerative clustering that always merges the pair of clusters with the
/// closest centroids, stopping at m clusters.
Clustering hac_upgma(std::span<const FeatureVector> points, std::size_t m);

/// Calinski-Harabasz score (between / (m - 1)) / (within / (n - m)).
/// Returns +infinity when the within-cluster dispersion is zero.
double ch_index(std::span<const FeatureVector> points, const Clustering& clustering);

enum class ClusterMethod { kKMeansPP, kHac };

struct KSelection {
  std::size_t m = 0;
  Clustering clustering;
  std::vector<std::pair<std::size_t, double>> scores;  ///< (m, CH) for every evaluated m
};

KSelection select_k(std::span<const FeatureVector> points, std::size_t m_lo, std::size_t m_hi,
                    ClusterMethod method, std::uint64_t seed, std::size_t restarts = 8);

}  // namespace xfer
