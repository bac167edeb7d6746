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

// Historical transfer-log ingestion: parsing, validation, contending-load
// accounting and grouping of repeated observations.

#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "xfer/types.hpp"

namespace xfer {

enum class LogFormat { kJsonl, kCsv };

/// Picks CSV for a ".csv" extension, JSONL otherwise.
LogFormat format_for_path(const std::filesystem::path& path);

/// Names of the log schema fields, in canonical column order.
std::span<const char* const> log_field_names();

struct Rejection {
  std::size_t line = 0;  ///< 1-based line number in the source file
  std::string field;
  std::string reason;
};

struct ParseResult {
  std::vector<TransferLogEntry> entries;
  std::vector<Rejection> rejections;
};

/// Throws IoError when the file cannot be read. Malformed or invalid
/// records never abort the parse; each lands in `rejections`.
ParseResult parse_log(const std::filesystem::path& path, LogFormat format,
                      const LatticeBounds& bounds = {});
ParseResult parse_log(std::istream& in, LogFormat format, const LatticeBounds& bounds = {});

std::string to_json_line(const TransferLogEntry& entry);
void write_log_jsonl(std::span<const TransferLogEntry> entries, std::ostream& out);
void write_log_csv(std::span<const TransferLogEntry> entries, std::ostream& out);

/// (bw - th_out) / bw, clamped to [0, 1].
LoadIntensity load_intensity(const TransferLogEntry& entry);

/// Closed time interval in epoch seconds.
struct TimeWindow {
  double begin = 0.0;
  double end = 0.0;
};

/// Active interval of a logged transfer: [ts, ts + total_bytes / throughput].
TimeWindow active_window(const TransferLogEntry& entry);

/// Sum of throughputs of entries whose active interval touches `window`.
/// Partial overlaps count in full.
double aggregate_contending(std::span<const TransferLogEntry> entries, TimeWindow window);

/// Contending throughput seen by `reference`: other entries sharing its
/// source or destination endpoint and overlapping its active interval.
double contending_throughput(const TransferLogEntry& reference,
                             std::span<const TransferLogEntry> log);

/// Raw clustering features rounded to a stable integer key.
struct FeatureKey {
  long long bandwidth_mbps = 0;
  long long rtt_us = 0;
  long long tcp_buffer_bytes = 0;
  long long avg_file_bytes = 0;
  long long num_files = 0;

  friend auto operator<=>(const FeatureKey&, const FeatureKey&) = default;
};

FeatureKey feature_key(const TransferLogEntry& entry);

struct GaussianFit {
  double mean = 0.0;
  double stddev = 0.0;  ///< population form, 1/N
};

GaussianFit fit_gaussian(std::span<const double> samples);

/// Observations sharing feature key and parameters.
struct ObservationGroup {
  FeatureKey features;
  ParamTriple params;
  std::vector<double> samples;
  std::vector<std::size_t> members;  ///< indices into the grouped input
  double mean = 0.0;
  double stddev = 0.0;

  bool low_confidence() const { return samples.size() < 2; }
};

/// Partitions entries by (feature key, params); groups come out in key order.
std::vector<ObservationGroup> group_observations(std::span<const TransferLogEntry> entries);

}  // namespace xfer
