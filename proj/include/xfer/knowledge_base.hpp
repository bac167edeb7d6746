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

// The knowledge base: offline analysis of historical logs into clusters,
// per-load-band throughput surfaces, their argmaxes and sampling regions,
// with JSON persistence, additive updates and nearest-cluster queries.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "xfer/clustering.hpp"
#include "xfer/regions.hpp"
#include "xfer/surface.hpp"
#include "xfer/types.hpp"

namespace xfer {

inline constexpr int kKbFormatVersion = 1;

struct LogBatch {
  std::string id;
  std::vector<TransferLogEntry> entries;
};

struct BatchRecord {
  std::string id;
  std::size_t entries = 0;
  friend bool operator==(const BatchRecord&, const BatchRecord&) = default;
};

struct KbConfig {
  std::uint64_t seed = 1;
  std::size_t max_clusters = 10;
  ClusterMethod method = ClusterMethod::kKMeansPP;
  std::size_t restarts = 8;
  int band_count = 10;  ///< load intensity bands of equal width over [0, 1]
  LatticeBounds bounds;
  RegionConfig region;
  SurfaceOptions surface;
  double recluster_drop = 0.2;  ///< relative CH loss that triggers re-clustering
};

struct LoadBand {
  int index = 0;
  double lo = 0.0;  ///< load intensity range [lo, hi)
  double hi = 0.0;
  ThroughputSurface surface;
};

struct KbCluster {
  int id = 0;
  FeatureVector centroid{};
  std::size_t size = 0;  ///< log entries assigned
  double ssw = 0.0;      ///< sum of squared distances to the centroid
  std::vector<LoadBand> bands;  ///< ascending band index
  SamplingRegion region;
};

struct KnowledgeBase {
  int version = kKbFormatVersion;
  FeatureNormalization normalization;
  std::vector<KbCluster> clusters;
  double built_at = 0.0;  ///< latest log timestamp seen
  std::vector<BatchRecord> batches;
};

/// Band of a load intensity: floor(I_s * band_count), the top edge folded
/// into the last band.
int load_band(double load_intensity, int band_count);

/// Throws PreconditionError when there are no entries at all.
KnowledgeBase build_kb(std::span<const LogBatch> batches, const KbConfig& config = {});

/// What an update did, for reporting.
struct UpdateSummary {
  std::vector<int> touched_clusters;
  std::vector<int> new_clusters;
  bool reclustered = false;
  double ch_before = 0.0;
  double ch_after = 0.0;
};

/// Adds a batch: entries join their nearest cluster unless the merged
/// cluster summary loses more than `recluster_drop` of its CH score, in
/// which case entries far from every centroid form new clusters. Only
/// touched bands are refitted.
KnowledgeBase update_kb(const KnowledgeBase& kb, const LogBatch& batch, const KbConfig& config = {},
                        UpdateSummary* summary = nullptr);

struct QueryResult {
  int cluster_id = 0;
  double distance = 0.0;
  std::vector<ThroughputSurface> surfaces;  ///< ascending load tag
  std::vector<double> load_tags;
  SamplingRegion region;
};

/// Nearest cluster in normalized feature space; ties go to the lowest id.
QueryResult query_kb(const KnowledgeBase& kb, const DatasetProfile& dataset,
                     const NetworkProfile& network);

std::string serialize_kb(const KnowledgeBase& kb);
KnowledgeBase deserialize_kb(const std::string& text);

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);
KnowledgeBase load_kb(const std::filesystem::path& path);

}  // namespace xfer
