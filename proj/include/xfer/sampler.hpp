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

// Online adaptive sampling: sample chunks probe the surface family in load
// order until an observation falls inside a surface's confidence bound, then
// the rest of the dataset moves with that surface's best parameters while a
// moving mean of achieved throughput watches for load changes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "xfer/error.hpp"
#include "xfer/regions.hpp"
#include "xfer/surface.hpp"
#include "xfer/types.hpp"

namespace xfer {

struct Chunk {
  std::size_t index = 0;
  std::uint64_t bytes = 0;
};

struct ChunkPlanConfig {
  double sample_fraction = 0.05;
  std::uint64_t max_chunk_bytes = 256ULL << 20;
};

/// Chunk size max(min(5% of total, 256 MiB), avg file size); the queue holds
/// whole chunks followed by one remainder chunk.
std::uint64_t chunk_size(const DatasetProfile& dataset, const ChunkPlanConfig& config = {});
std::vector<Chunk> plan_chunks(const DatasetProfile& dataset, const ChunkPlanConfig& config = {});

struct ChunkResult {
  double achieved_mbps = 0.0;
  double elapsed_s = 0.0;  ///< includes any parameter-change cost
};

/// Raised by a backend when a chunk could not be moved.
class BackendError : public Error {
 public:
  using Error::Error;
};

class TransferBackend {
 public:
  virtual ~TransferBackend() = default;
  virtual ChunkResult transfer(const Chunk& chunk, const ParamTriple& params) = 0;
};

/// How the next surface is picked after a miss.
enum class SelectionRule {
  kClosest,  ///< surface in the narrowed window whose prediction is nearest the observation
  kMedian,   ///< lower median of the narrowed window
};

struct SamplerConfig {
  double z = kDefaultZ;
  std::size_t window = 3;
  SelectionRule rule = SelectionRule::kClosest;
  ChunkPlanConfig chunks;
};

struct TranscriptRow {
  std::size_t chunk_idx = 0;
  ParamTriple params;
  double predicted_mbps = 0.0;
  double achieved_mbps = 0.0;
  double elapsed_s = 0.0;
  std::string event;  ///< sample, converged or retune
  std::size_t surface = 0;  ///< index into the sorted surface list
  std::uint64_t bytes = 0;
};

struct Transcript {
  std::vector<TranscriptRow> rows;
  std::size_t sample_transfers = 0;
  bool converged = false;
  bool pinned = false;   ///< window emptied; nearest surface chosen by prediction error
  bool aborted = false;  ///< backend failed twice on one chunk
  std::string abort_reason;
  std::size_t retunes = 0;
  std::uint64_t bytes_transferred = 0;
};

/// Surfaces must be sorted by ascending load tag and carry an argmax.
Transcript adaptive_sampling(std::span<const ThroughputSurface> surfaces,
                             const SamplingRegion& region, const DatasetProfile& dataset,
                             TransferBackend& backend, const SamplerConfig& config = {});

struct Accuracy {
  double error_pct = 0.0;
  double accuracy_pct = 0.0;
};

/// Relative error |achieved - predicted| / predicted in percent and
/// 100 minus that error, floored at 0. Throws PreconditionError unless
/// predicted > 0.
Accuracy accuracy(double predicted, double achieved);

void write_transcript_csv(const Transcript& t, std::ostream& out);

}  // namespace xfer
