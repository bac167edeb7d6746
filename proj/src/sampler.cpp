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

#include "xfer/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "xfer/io.hpp"

namespace xfer {
namespace {

std::size_t lower_median(std::size_t lo, std::size_t hi) { return lo + (hi - lo) / 2; }

// Surface in [lo, hi] whose prediction at `params` is nearest `observed`;
// ties go to the lower index.
std::size_t closest_surface(std::span<const ThroughputSurface> surfaces, std::size_t lo,
                            std::size_t hi, const ParamTriple& params, double observed) {
  std::size_t best = lo;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t k = lo; k <= hi; ++k) {
    const double gap = std::abs(eval(surfaces[k], params) - observed);
    if (gap < best_gap) {
      best_gap = gap;
      best = k;
    }
  }
  return best;
}

}  // namespace

std::uint64_t chunk_size(const DatasetProfile& d, const ChunkPlanConfig& c) {
  const double share = std::floor(c.sample_fraction * static_cast<double>(d.total_bytes));
  const double size = std::max(std::min(share, static_cast<double>(c.max_chunk_bytes)),
                               std::ceil(d.avg_file_bytes));
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(size));
}

std::vector<Chunk> plan_chunks(const DatasetProfile& d, const ChunkPlanConfig& c) {
  if (d.total_bytes == 0) throw PreconditionError("dataset is empty");
  const std::uint64_t s = chunk_size(d, c);
  std::vector<Chunk> out;
  std::uint64_t left = d.total_bytes;
  while (left > 0) {
    const std::uint64_t b = std::min(s, left);
    out.push_back({out.size(), b});
    left -= b;
  }
  return out;
}

Accuracy accuracy(double predicted, double achieved) {
  if (!(predicted > 0.0)) throw PreconditionError("accuracy needs a positive prediction");
  const double err = std::abs(achieved - predicted) / predicted * 100.0;
  return {err, 100.0 - std::min(100.0, err)};
}

Transcript adaptive_sampling(std::span<const ThroughputSurface> surfaces, const SamplingRegion&,
                             const DatasetProfile& dataset, TransferBackend& backend,
                             const SamplerConfig& config) {
  if (surfaces.empty()) throw PreconditionError("no surfaces to sample");
  for (std::size_t k = 0; k < surfaces.size(); ++k) {
    if (!surfaces[k].argmax) throw PreconditionError("surface without precomputed argmax");
    if (k > 0 && surfaces[k].load_tag < surfaces[k - 1].load_tag)
      throw PreconditionError("surfaces must be sorted by load intensity");
  }
  const auto chunks = plan_chunks(dataset, config.chunks);

  Transcript t;
  std::size_t lo = 0, hi = surfaces.size() - 1;
  std::size_t cur = lower_median(lo, hi);
  bool sampling = true;
  bool just_changed = false;
  std::deque<double> recent;

  for (const Chunk& chunk : chunks) {
    const ParamTriple params = surfaces[cur].argmax->params;
    const double predicted = surfaces[cur].argmax->value;
    ChunkResult r;
    try {
      r = backend.transfer(chunk, params);
    } catch (const BackendError&) {
      try {
        r = backend.transfer(chunk, params);
      } catch (const BackendError& e) {
        t.aborted = true;
        t.abort_reason = e.what();
        return t;
      }
    }
    TranscriptRow row{chunk.index, params, predicted, r.achieved_mbps, r.elapsed_s, "", cur, chunk.bytes};
    t.bytes_transferred += chunk.bytes;

    if (sampling) {
      row.event = "sample";
      ++t.sample_transfers;
      if (within_confidence(surfaces[cur], params, r.achieved_mbps, config.z)) {
        sampling = false;
        t.converged = true;
      } else {
        // Faster than predicted means lighter load than this surface assumes.
        const bool lighter = r.achieved_mbps > eval(surfaces[cur], params);
        if (lighter) {
          lo = cur + 1;
        } else if (cur == 0) {
          hi = 0;
          lo = 1;
        } else {
          hi = cur - 1;
        }
        if (lo > hi || hi >= surfaces.size()) {
          cur = closest_surface(surfaces, 0, surfaces.size() - 1, params, r.achieved_mbps);
          sampling = false;
          t.pinned = true;
          t.converged = true;
        } else {
          cur = config.rule == SelectionRule::kMedian
                    ? lower_median(lo, hi)
                    : closest_surface(surfaces, lo, hi, params, r.achieved_mbps);
        }
      }
    } else {
      row.event = just_changed ? "retune" : "converged";
      just_changed = false;
      recent.push_back(r.achieved_mbps);
      if (recent.size() > config.window) recent.pop_front();
      if (recent.size() == config.window) {
        const double mean = std::accumulate(recent.begin(), recent.end(), 0.0) /
                            static_cast<double>(recent.size());
        if (!within_confidence(surfaces[cur], params, mean, config.z)) {
          const std::size_t next =
              closest_surface(surfaces, 0, surfaces.size() - 1, params, r.achieved_mbps);
          if (next != cur) {
            cur = next;
            just_changed = true;
            ++t.retunes;
            recent.clear();
          }
        }
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

void write_transcript_csv(const Transcript& t, std::ostream& out) {
  out << "chunk_idx,cc,p,pp,predicted_mbps,achieved_mbps,elapsed_s,event\n";
  for (const auto& r : t.rows)
    out << fmt::format("{},{},{},{},{},{},{},{}\n", r.chunk_idx, r.params.cc, r.params.p,
                       r.params.pp, format_double(r.predicted_mbps), format_double(r.achieved_mbps),
                       format_double(r.elapsed_s), r.event);
}

}  // namespace xfer
