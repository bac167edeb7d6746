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

#include "xfer/types.hpp"

#include <algorithm>
#include <cmath>

#include "xfer/error.hpp"

namespace xfer {
namespace {

void require_positive(double v, const char* field) {
  if (!(v > 0.0)) throw DataError(field, "must be > 0");
}

}  // namespace

LoadIntensity::LoadIntensity(double v) : value_(std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0)) {}

double max_achievable(const NetworkProfile& network) {
  return std::min({network.bandwidth_mbps, network.disk_read_mbs * kBitsPerByte,
                   network.disk_write_mbs * kBitsPerByte});
}

void validate(const NetworkProfile& n) {
  require_positive(n.bandwidth_mbps, "bw_mbps");
  require_positive(n.rtt_ms, "rtt_ms");
  require_positive(n.tcp_buffer_bytes, "tcp_buf_bytes");
  require_positive(n.disk_read_mbs, "disk_read_mbs");
  require_positive(n.disk_write_mbs, "disk_write_mbs");
}

void validate(const DatasetProfile& d) {
  if (d.num_files < 1) throw DataError("num_files", "must be >= 1");
  require_positive(d.avg_file_bytes, "avg_file_bytes");
  // One byte of slack for avg = total / n rounding.
  if (static_cast<double>(d.total_bytes) + 1.0 < d.avg_file_bytes)
    throw DataError("total_bytes", "must be >= avg_file_bytes");
}

void validate(const ParamTriple& t, const LatticeBounds& b) {
  if (t.cc < 1 || t.cc > b.max_cc) throw DataError("cc", "outside lattice bounds");
  if (t.p < 1 || t.p > b.max_p) throw DataError("p", "outside lattice bounds");
  if (t.pp < 1 || t.pp > b.max_pp) throw DataError("pp", "outside lattice bounds");
}

void validate(const TransferLogEntry& e, const LatticeBounds& b) {
  validate(e.network);
  validate(e.dataset);
  validate(e.params, b);
  if (!(e.throughput_mbps >= 0.0)) throw DataError("throughput_mbps", "violates throughput >= 0");
  if (e.throughput_mbps > max_achievable(e.network) * (1.0 + 1e-9))
    throw DataError("throughput_mbps", "exceeds max achievable throughput");
  if (!(e.contending_out_mbps >= 0.0)) throw DataError("contending_out_mbps", "must be >= 0");
  if (e.contending_streams < 0) throw DataError("contending_streams", "must be >= 0");
  if (!std::isfinite(e.timestamp)) throw DataError("ts", "must be finite");
}

}  // namespace xfer
