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

// Shared domain types: the tunable parameter lattice and the profiles that
// describe a transfer's network path and dataset.

#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace xfer {

inline constexpr double kBitsPerByte = 8.0;

/// Protocol knobs. Member order makes the defaulted comparison the
/// lexicographic (cc, p, pp) order used for every tie-break.
struct ParamTriple {
  int cc = 1;  ///< concurrency: server processes
  int p = 1;   ///< parallelism: streams per process
  int pp = 1;  ///< pipelining depth

  int streams() const { return cc * p; }

  friend auto operator<=>(const ParamTriple&, const ParamTriple&) = default;
};

/// Per-deployment upper bounds of the integer search space.
struct LatticeBounds {
  int max_cc = 16;
  int max_p = 16;
  int max_pp = 32;

  bool contains(const ParamTriple& t) const {
    return t.cc >= 1 && t.cc <= max_cc && t.p >= 1 && t.p <= max_p && t.pp >= 1 &&
           t.pp <= max_pp;
  }
  std::size_t size() const {
    return static_cast<std::size_t>(max_cc) * static_cast<std::size_t>(max_p) *
           static_cast<std::size_t>(max_pp);
  }

  friend bool operator==(const LatticeBounds&, const LatticeBounds&) = default;
};

struct NetworkProfile {
  double bandwidth_mbps = 0.0;
  double rtt_ms = 0.0;
  double tcp_buffer_bytes = 0.0;
  double disk_read_mbs = 0.0;   ///< MB/s
  double disk_write_mbs = 0.0;  ///< MB/s
  std::string source_id;
  std::string dest_id;
};

struct DatasetProfile {
  double avg_file_bytes = 0.0;
  std::uint64_t num_files = 0;
  std::uint64_t total_bytes = 0;
};

struct TransferLogEntry {
  NetworkProfile network;
  DatasetProfile dataset;
  ParamTriple params;
  double throughput_mbps = 0.0;
  double timestamp = 0.0;  ///< epoch seconds
  double contending_out_mbps = 0.0;
  int contending_streams = 0;
};

/// Fraction of the link left to the transfer after external traffic,
/// always within [0, 1].
class LoadIntensity {
 public:
  LoadIntensity() = default;
  explicit LoadIntensity(double v);

  double value() const { return value_; }

  friend auto operator<=>(const LoadIntensity&, const LoadIntensity&) = default;

 private:
  double value_ = 0.0;
};

/// Upper bound on throughput: link bandwidth or the slower disk, in Mbps.
double max_achievable(const NetworkProfile& network);

/// Throws DataError naming the first violated field.
void validate(const NetworkProfile& network);
void validate(const DatasetProfile& dataset);
void validate(const ParamTriple& params, const LatticeBounds& bounds);
void validate(const TransferLogEntry& entry, const LatticeBounds& bounds);

}  // namespace xfer
