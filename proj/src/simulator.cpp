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

#include "xfer/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "xfer/error.hpp"
#include "xfer/io.hpp"
#include "xfer/random.hpp"

namespace xfer {
namespace {

using Json = nlohmann::json;

double json_number(const Json& j, const char* key) {
  if (!j.contains(key)) throw DataError(key, "missing field");
  const Json& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_double(v.get<std::string>(), key);
  throw DataError(key, "expected a number");
}

Json parse_object(const std::string& text, const char* what) {
  try {
    Json j = Json::parse(text);
    if (!j.is_object()) throw DataError(what, "expected a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw DataError(what, std::string("malformed JSON: ") + e.what());
  }
}

NetworkProfile network_from(const Json& j) {
  NetworkProfile n;
  n.bandwidth_mbps = json_number(j, "bw_mbps");
  n.rtt_ms = json_number(j, "rtt_ms");
  n.tcp_buffer_bytes = json_number(j, "tcp_buf_bytes");
  n.disk_read_mbs = json_number(j, "disk_read_mbs");
  n.disk_write_mbs = json_number(j, "disk_write_mbs");
  n.source_id = j.value("src", std::string("src"));
  n.dest_id = j.value("dst", std::string("dst"));
  validate(n);
  return n;
}

Json network_to(const NetworkProfile& n) {
  return {{"bw_mbps", n.bandwidth_mbps}, {"rtt_ms", n.rtt_ms},
          {"tcp_buf_bytes", n.tcp_buffer_bytes}, {"disk_read_mbs", n.disk_read_mbs},
          {"disk_write_mbs", n.disk_write_mbs}, {"src", n.source_id}, {"dst", n.dest_id}};
}

}  // namespace

double SimScenario::load_at(double t) const {
  if (schedule.empty()) return 0.0;
  double v = schedule.front().i_ext;
  for (const auto& s : schedule) {
    if (s.time > t) break;
    v = s.i_ext;
  }
  return v;
}

void validate(const SimScenario& s) {
  validate(s.network);
  if (s.schedule.empty()) throw DataError("schedule", "needs at least one step");
  for (std::size_t i = 0; i < s.schedule.size(); ++i) {
    if (!(s.schedule[i].i_ext >= 0.0 && s.schedule[i].i_ext <= 1.0))
      throw DataError("schedule", "external load must lie in [0, 1]");
    if (i > 0 && !(s.schedule[i].time > s.schedule[i - 1].time))
      throw DataError("schedule", "times must be strictly increasing");
  }
  if (!(s.noise >= 0.0)) throw DataError("noise", "must be non-negative");
}

double stream_utilization(const NetworkProfile& n, double streams) {
  const double bdp_bytes = n.bandwidth_mbps * 1e6 / kBitsPerByte * n.rtt_ms / 1000.0;
  const double k_half = std::max(0.5, bdp_bytes / n.tcp_buffer_bytes);
  return streams / (streams + k_half);
}

double sim_mean_throughput(const NetworkProfile& n, const ParamTriple& params,
                           const DatasetProfile& d, double i_ext) {
  const double available = n.bandwidth_mbps * (1.0 - std::clamp(i_ext, 0.0, 1.0));
  const double u = stream_utilization(n, params.streams());
  // Files in flight per process per round trip; pipelining hides that many
  // acknowledgement waits.
  const double files_per_rtt = (n.rtt_ms / 1000.0) * (available * 1e6 / params.cc) /
                               (std::max(d.avg_file_bytes, 1.0) * kBitsPerByte);
  const double pipe = params.pp / (params.pp + files_per_rtt);
  return std::min({available * u * pipe, n.disk_read_mbs * kBitsPerByte,
                   n.disk_write_mbs * kBitsPerByte});
}

double sim_mean_throughput(const SimScenario& s, const ParamTriple& params,
                           const DatasetProfile& d, double t) {
  return sim_mean_throughput(s.network, params, d, s.load_at(t));
}

Simulator::Simulator(SimScenario scenario) : scenario_(std::move(scenario)), rng_(scenario_.seed) {}

double Simulator::sim_throughput(const ParamTriple& params, const DatasetProfile& d, double t) {
  return sim_throughput_at_load(params, d, scenario_.load_at(t));
}

double Simulator::sim_throughput_at_load(const ParamTriple& params, const DatasetProfile& d,
                                         double i_ext) {
  const double mean = sim_mean_throughput(scenario_.network, params, d, i_ext);
  const double noisy = mean * (1.0 + scenario_.noise * standard_normal(rng_));
  return std::clamp(noisy, 0.0, max_achievable(scenario_.network));
}

SimBackend::SimBackend(SimScenario scenario, DatasetProfile dataset, double start_time)
    : sim_(std::move(scenario)), dataset_(dataset), clock_(start_time) {}

void SimBackend::inject_failure(std::size_t index, int times) {
  fail_index_ = index;
  fail_times_ = times;
}

ChunkResult SimBackend::transfer(const Chunk& chunk, const ParamTriple& params) {
  if (fail_times_ > 0 && chunk.index == fail_index_) {
    --fail_times_;
    throw BackendError("simulated failure on chunk " + std::to_string(chunk.index));
  }
  const double rate = sim_.sim_throughput(params, dataset_, clock_);
  const double rtt_s = sim_.scenario().network.rtt_ms / 1000.0;
  const int opened = std::max(0, params.streams() - open_streams_);
  open_streams_ = params.streams();
  const double penalty = kSlowStartRtts * rtt_s * opened;
  const double moving = static_cast<double>(chunk.bytes) * kBitsPerByte /
                        (std::max(rate, 1e-6) * 1e6);
  clock_ += moving + penalty;
  return {rate, moving + penalty};
}

std::vector<TransferLogEntry> generate_corpus(std::span<const SimScenario> scenarios,
                                              std::span<const DatasetProfile> datasets,
                                              const LatticeCoverage& coverage,
                                              const CorpusOptions& options, std::uint64_t seed) {
  std::vector<TransferLogEntry> out;
  std::mt19937_64 rng(seed);
  double ts = options.start_time;
  for (const auto& sc : scenarios) {
    validate(sc);
    std::set<double> levels;
    for (const auto& step : sc.schedule) levels.insert(step.i_ext);
    for (const auto& d : datasets)
      for (double level : levels)
        for (int cc : coverage.cc)
          for (int p : coverage.p)
            for (int pp : coverage.pp)
              for (std::size_t r = 0; r < options.repeats; ++r) {
                double load = level;
                if (options.load_jitter > 0.0)
                  load = std::clamp(level + options.load_jitter * (2.0 * unit_double(rng) - 1.0), 0.0, 1.0);
                const ParamTriple params{cc, p, pp};
                const double mean = sim_mean_throughput(sc.network, params, d, load);
                const double th = std::clamp(mean * (1.0 + sc.noise * standard_normal(rng)), 0.0,
                                             max_achievable(sc.network));
                TransferLogEntry e;
                e.network = sc.network;
                e.dataset = d;
                e.params = params;
                e.throughput_mbps = th;
                e.timestamp = ts;
                e.contending_out_mbps = load * sc.network.bandwidth_mbps;
                e.contending_streams = 0;
                out.push_back(std::move(e));
                ts += options.spacing_s;
              }
  }
  return out;
}

OracleResult oracle_optimum(const NetworkProfile& n, const DatasetProfile& d, double i_ext,
                            const LatticeBounds& b) {
  OracleResult best{{1, 1, 1}, -std::numeric_limits<double>::infinity()};
  for (int cc = 1; cc <= b.max_cc; ++cc)
    for (int p = 1; p <= b.max_p; ++p)
      for (int pp = 1; pp <= b.max_pp; ++pp) {
        const double v = sim_mean_throughput(n, {cc, p, pp}, d, i_ext);
        if (v > best.value) best = {{cc, p, pp}, v};
      }
  return best;
}

OracleResult oracle_optimum(const SimScenario& s, const DatasetProfile& d, double t,
                            const LatticeBounds& b) {
  return oracle_optimum(s.network, d, s.load_at(t), b);
}

SimScenario parse_scenario(const std::string& text) {
  const Json j = parse_object(text, "scenario");
  SimScenario s;
  if (!j.contains("network")) throw DataError("network", "missing field");
  s.network = network_from(j.at("network"));
  if (!j.contains("schedule") || !j.at("schedule").is_array())
    throw DataError("schedule", "expected [[t, i_ext], ...]");
  for (const auto& step : j.at("schedule")) {
    if (!step.is_array() || step.size() != 2 || !step[0].is_number() || !step[1].is_number())
      throw DataError("schedule", "expected [t, i_ext] pairs");
    s.schedule.push_back({step[0].get<double>(), step[1].get<double>()});
  }
  if (j.contains("noise")) s.noise = json_number(j, "noise");
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  validate(s);
  return s;
}

std::string scenario_to_json(const SimScenario& s) {
  Json sched = Json::array();
  for (const auto& st : s.schedule) sched.push_back({st.time, st.i_ext});
  return Json{{"network", network_to(s.network)}, {"schedule", sched}, {"noise", s.noise},
              {"seed", s.seed}}
             .dump(1) + "\n";
}

NetworkProfile parse_network(const std::string& text) {
  return network_from(parse_object(text, "profile"));
}

DatasetProfile parse_dataset(const std::string& text) {
  const Json j = parse_object(text, "dataset");
  DatasetProfile d;
  d.avg_file_bytes = json_number(j, "avg_file_bytes");
  d.num_files = static_cast<std::uint64_t>(json_number(j, "num_files"));
  d.total_bytes = static_cast<std::uint64_t>(json_number(j, "total_bytes"));
  validate(d);
  return d;
}

}  // namespace xfer
