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

// Deterministic transfer simulator: a closed-form throughput model with
// seeded multiplicative noise, a chunk-level transfer backend, synthetic
// log generation and the exhaustive optimum used to score tuning.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xfer/sampler.hpp"
#include "xfer/types.hpp"

namespace xfer {

struct LoadStep {
  double time = 0.0;  ///< seconds
  double i_ext = 0.0; ///< fraction of the link taken by external traffic
};

struct SimScenario {
  NetworkProfile network;
  std::vector<LoadStep> schedule;  ///< strictly increasing times
  double noise = 0.05;             ///< relative standard deviation
  std::uint64_t seed = 1;

  /// External load in force at time t (first step before the schedule starts).
  double load_at(double t) const;
};

/// Throws DataError for an empty or unordered schedule or out-of-range values.
void validate(const SimScenario& scenario);

/// Saturating utilisation of k streams: k / (k + K_half), with K_half set by
/// the ratio of bandwidth-delay product to TCP buffer.
double stream_utilization(const NetworkProfile& network, double streams);

/// Noiseless throughput (Mbps) under external load i_ext.
double sim_mean_throughput(const NetworkProfile& network, const ParamTriple& params,
                           const DatasetProfile& dataset, double i_ext);
double sim_mean_throughput(const SimScenario& scenario, const ParamTriple& params,
                           const DatasetProfile& dataset, double t);

/// Stateful noisy simulator; identical seeds and call sequences give
/// identical results.
class Simulator {
 public:
  explicit Simulator(SimScenario scenario);

  const SimScenario& scenario() const { return scenario_; }

  double sim_throughput(const ParamTriple& params, const DatasetProfile& dataset, double t);
  double sim_throughput_at_load(const ParamTriple& params, const DatasetProfile& dataset,
                                double i_ext);

 private:
  SimScenario scenario_;
  std::mt19937_64 rng_;
};

inline constexpr double kSlowStartRtts = 10.0;

/// Backend over the simulator. Each chunk runs at the load in force when it
/// starts; opening new streams costs kSlowStartRtts round trips per stream,
/// charged to elapsed time but not to the achieved rate.
class SimBackend : public TransferBackend {
 public:
  SimBackend(SimScenario scenario, DatasetProfile dataset, double start_time = 0.0);

  ChunkResult transfer(const Chunk& chunk, const ParamTriple& params) override;

  double clock() const { return clock_; }
  double current_load() const { return sim_.scenario().load_at(clock_); }
  const DatasetProfile& dataset() const { return dataset_; }

  /// Makes the next `times` attempts at chunk `index` fail.
  void inject_failure(std::size_t index, int times);

 private:
  Simulator sim_;
  DatasetProfile dataset_;
  double clock_;
  int open_streams_ = 0;
  std::size_t fail_index_ = 0;
  int fail_times_ = 0;
};

/// Parameter values visited by corpus generation on each axis.
struct LatticeCoverage {
  std::vector<int> cc{1, 2, 4, 8, 12, 16};
  std::vector<int> p{1, 2, 4, 8, 12, 16};
  std::vector<int> pp{1, 2, 4, 8, 16, 32};

  std::size_t size() const { return cc.size() * p.size() * pp.size(); }
};

struct CorpusOptions {
  std::size_t repeats = 3;
  double load_jitter = 0.0;  ///< loads drawn uniformly within +-jitter of each level
  double start_time = 1.7e9;
  double spacing_s = 60.0;
};

/// One entry per scenario x dataset x load level x lattice point x repeat.
/// Load levels are the distinct values of each scenario's schedule.
std::vector<TransferLogEntry> generate_corpus(std::span<const SimScenario> scenarios,
                                              std::span<const DatasetProfile> datasets,
                                              const LatticeCoverage& coverage,
                                              const CorpusOptions& options, std::uint64_t seed);

struct OracleResult {
  ParamTriple params;
  double value = 0.0;
};

/// Exhaustive noiseless optimum over the lattice; ties go to the smallest
/// (cc, p, pp).
OracleResult oracle_optimum(const NetworkProfile& network, const DatasetProfile& dataset,
                            double i_ext, const LatticeBounds& bounds = {});
OracleResult oracle_optimum(const SimScenario& scenario, const DatasetProfile& dataset, double t,
                            const LatticeBounds& bounds = {});

/// Scenario JSON: {"network": {...}, "schedule": [[t, i_ext], ...], "noise": x, "seed": n}.
SimScenario parse_scenario(const std::string& json_text);
std::string scenario_to_json(const SimScenario& scenario);

/// Network and dataset fields use the log schema names (bw_mbps, rtt_ms,
/// tcp_buf_bytes, disk_read_mbs, disk_write_mbs, src, dst, avg_file_bytes,
/// num_files, total_bytes).
NetworkProfile parse_network(const std::string& json_text);
DatasetProfile parse_dataset(const std::string& json_text);

}  // namespace xfer
