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
#include <random>

#include <gtest/gtest.h>

#include "xfer/error.hpp"
#include "xfer/ingest.hpp"

namespace xfer {
namespace {

NetworkProfile wan() {
  NetworkProfile n;
  n.bandwidth_mbps = 10000;
  n.rtt_ms = 50;
  n.tcp_buffer_bytes = 4 << 20;
  n.disk_read_mbs = 5000;
  n.disk_write_mbs = 5000;
  return n;
}

SimScenario flat(double i_ext, double noise = 0.05, std::uint64_t seed = 7) {
  return {wan(), {{0.0, i_ext}}, noise, seed};
}

const DatasetProfile kData{8e6, 1000, 8'000'000'000ULL};

TEST(Simulator, FullyLoadedLinkGivesZero) {
  Simulator sim(flat(1.0));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sim.sim_throughput({4, 4, 8}, kData, 0.0), 0.0);
}

TEST(Simulator, AsymptoteApproachesLinkRate) {
  const double v = sim_mean_throughput(wan(), {2000, 2000, 4000}, kData, 0.0);
  EXPECT_GE(v, 0.95 * max_achievable(wan()));
  EXPECT_LE(v, max_achievable(wan()));
}

TEST(Simulator, NoisyDrawsStayInRange) {
  Simulator sim(flat(0.2, 0.5));
  for (int i = 0; i < 500; ++i) {
    const double v = sim.sim_throughput({16, 16, 32}, kData, 0.0);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, max_achievable(wan()));
  }
}

TEST(Simulator, SameSeedSameDraws) {
  Simulator a(flat(0.3)), b(flat(0.3)), c(flat(0.3, 0.05, 8));
  bool differs = false;
  for (int i = 0; i < 50; ++i) {
    const double va = a.sim_throughput({3, 5, 7}, kData, 0.0);
    EXPECT_EQ(va, b.sim_throughput({3, 5, 7}, kData, 0.0));
    differs |= va != c.sim_throughput({3, 5, 7}, kData, 0.0);
  }
  EXPECT_TRUE(differs);
}

TEST(Simulator, MeanIsMonotone) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> c(1, 15), pp(1, 31);
  std::uniform_real_distribution<double> load(0.0, 0.95);
  for (int t = 0; t < 300; ++t) {
    const ParamTriple x{c(rng), c(rng), pp(rng)};
    const double i = load(rng);
    const double v = sim_mean_throughput(wan(), x, kData, i);
    EXPECT_GE(sim_mean_throughput(wan(), {x.cc + 1, x.p, x.pp}, kData, i), v);
    EXPECT_GE(sim_mean_throughput(wan(), {x.cc, x.p + 1, x.pp}, kData, i), v);
    EXPECT_GE(sim_mean_throughput(wan(), {x.cc, x.p, x.pp + 1}, kData, i), v);
    EXPECT_LE(sim_mean_throughput(wan(), x, kData, i + 0.05), v);
  }
}

TEST(Simulator, UtilizationSaturates) {
  EXPECT_NEAR(stream_utilization(wan(), 0.0), 0.0, 1e-15);
  double prev = 0.0;
  for (double s = 1; s < 1e5; s *= 2) {
    const double u = stream_utilization(wan(), s);
    EXPECT_GT(u, prev);
    EXPECT_LT(u, 1.0);
    prev = u;
  }
  EXPECT_GT(prev, 0.99);
}

TEST(Scenario, LoadAtFollowsSchedule) {
  SimScenario s{wan(), {{0.0, 0.1}, {10.0, 0.5}, {20.0, 0.2}}, 0.0, 1};
  EXPECT_EQ(s.load_at(-5.0), 0.1);
  EXPECT_EQ(s.load_at(9.99), 0.1);
  EXPECT_EQ(s.load_at(10.0), 0.5);
  EXPECT_EQ(s.load_at(1e9), 0.2);
}

TEST(Scenario, Validation) {
  EXPECT_NO_THROW(validate(flat(0.5)));
  EXPECT_THROW(validate(SimScenario{wan(), {}, 0.05, 1}), DataError);
  EXPECT_THROW(validate(flat(1.5)), DataError);
  EXPECT_THROW(validate(SimScenario{wan(), {{1.0, 0.1}, {1.0, 0.2}}, 0.05, 1}), DataError);
  EXPECT_THROW(validate(flat(0.5, -0.1)), DataError);
  SimScenario bad = flat(0.5);
  bad.network.bandwidth_mbps = 0;
  EXPECT_THROW(validate(bad), DataError);
}

TEST(Scenario, JsonRoundTrip) {
  SimScenario s{wan(), {{0.0, 0.1}, {30.5, 0.6}}, 0.03, 99};
  s.network.source_id = "a";
  s.network.dest_id = "b";
  const SimScenario r = parse_scenario(scenario_to_json(s));
  EXPECT_EQ(r.network.bandwidth_mbps, s.network.bandwidth_mbps);
  EXPECT_EQ(r.network.rtt_ms, s.network.rtt_ms);
  EXPECT_EQ(r.network.source_id, "a");
  ASSERT_EQ(r.schedule.size(), 2u);
  EXPECT_EQ(r.schedule[1].time, 30.5);
  EXPECT_EQ(r.schedule[1].i_ext, 0.6);
  EXPECT_EQ(r.noise, 0.03);
  EXPECT_EQ(r.seed, 99u);
  EXPECT_EQ(scenario_to_json(r), scenario_to_json(s));
  EXPECT_THROW(parse_scenario("{"), DataError);
  EXPECT_THROW(parse_scenario(R"({"schedule": [[0, 0.1]]})"), DataError);
}

TEST(SimBackend, SlowStartPenaltyOnNewStreams) {
  SimBackend b(flat(0.0, 0.0), kData);
  const Chunk c{0, 100'000'000};
  const double rtt_s = 0.05;
  const ChunkResult first = b.transfer(c, {2, 3, 4});
  const double moving1 = 8e8 / (first.achieved_mbps * 1e6);
  EXPECT_NEAR(first.elapsed_s, moving1 + kSlowStartRtts * rtt_s * 6, 1e-9);
  const ChunkResult same = b.transfer(c, {2, 3, 4});
  EXPECT_NEAR(same.elapsed_s, moving1, 1e-9);
  const ChunkResult fewer = b.transfer(c, {1, 2, 4});
  EXPECT_NEAR(fewer.elapsed_s, 8e8 / (fewer.achieved_mbps * 1e6), 1e-9);
  const ChunkResult more = b.transfer(c, {4, 2, 4});
  EXPECT_NEAR(more.elapsed_s, 8e8 / (more.achieved_mbps * 1e6) + kSlowStartRtts * rtt_s * 6, 1e-9);
  EXPECT_NEAR(b.clock(), first.elapsed_s + same.elapsed_s + fewer.elapsed_s + more.elapsed_s, 1e-9);
}

TEST(SimBackend, ClockDrivesSchedule) {
  SimBackend b(SimScenario{wan(), {{0.0, 0.1}, {1.0, 0.9}}, 0.0, 1}, kData);
  EXPECT_EQ(b.current_load(), 0.1);
  const ChunkResult r = b.transfer({0, 1'000'000'000}, {16, 16, 32});
  EXPECT_GT(r.elapsed_s, 1.0);
  EXPECT_EQ(b.current_load(), 0.9);
}

TEST(SimBackend, InjectedFailures) {
  SimBackend b(flat(0.2), kData);
  b.inject_failure(3, 2);
  EXPECT_NO_THROW(b.transfer({2, 1000}, {1, 1, 1}));
  EXPECT_THROW(b.transfer({3, 1000}, {1, 1, 1}), BackendError);
  EXPECT_THROW(b.transfer({3, 1000}, {1, 1, 1}), BackendError);
  EXPECT_NO_THROW(b.transfer({3, 1000}, {1, 1, 1}));
}

TEST(Corpus, SizeAndSpacing) {
  const std::vector<SimScenario> sc{flat(0.3)};
  LatticeCoverage cov;
  cov.cc.clear();
  cov.p.clear();
  for (int i = 1; i <= 16; ++i) {
    cov.cc.push_back(i);
    cov.p.push_back(i);
  }
  cov.pp = {1, 8, 16, 32};
  const auto log = generate_corpus(sc, std::span(&kData, 1), cov, {}, 5);
  ASSERT_EQ(log.size(), 3072u);
  for (std::size_t i = 1; i < log.size(); ++i) EXPECT_GT(log[i].timestamp, log[i - 1].timestamp);
  for (const auto& e : log) EXPECT_NEAR(load_intensity(e).value(), 0.7, 1e-12);
}

TEST(Corpus, SingleRepeatHasZeroSigmaAndFloorApplies) {
  const std::vector<SimScenario> sc{flat(0.3)};
  CorpusOptions opt;
  opt.repeats = 1;
  const auto log = generate_corpus(sc, std::span(&kData, 1), {}, opt, 5);
  const auto groups = group_observations(log);
  ASSERT_EQ(groups.size(), LatticeCoverage{}.size());
  for (const auto& g : groups) {
    EXPECT_EQ(g.stddev, 0.0);
    EXPECT_TRUE(g.low_confidence());
  }
  std::vector<ThroughputSample> samples;
  for (const auto& g : groups) samples.push_back({double(g.params.p), double(g.params.cc), double(g.params.pp), g.mean});
  const ThroughputSurface s = fit_throughput_surface(node_stats(samples));
  const ParamTriple x{4, 4, 4};
  const double mu = eval(s, x);
  EXPECT_TRUE(within_confidence(s, x, mu * (1.0 + 0.04 * kDefaultZ)));
  EXPECT_FALSE(within_confidence(s, x, mu * (1.0 + 0.06 * kDefaultZ)));
}

TEST(Corpus, RefitStaysNearGenerator) {
  const std::vector<SimScenario> sc{flat(0.25)};
  CorpusOptions opt;
  opt.repeats = 5;
  const auto log = generate_corpus(sc, std::span(&kData, 1), {}, opt, 17);
  const auto groups = group_observations(log);
  std::size_t inside = 0;
  for (const auto& g : groups) {
    const double truth = sim_mean_throughput(wan(), g.params, kData, 0.25);
    if (std::abs(g.mean - truth) <= 2.0 * std::max(g.stddev, 0.05 * truth)) ++inside;
  }
  EXPECT_GE(double(inside), 0.95 * double(groups.size()));
}

TEST(Oracle, MonotoneRegimePicksLatticeCorner) {
  const OracleResult r = oracle_optimum(wan(), kData, 0.4);
  EXPECT_EQ(r.params, (ParamTriple{16, 16, 32}));
  EXPECT_EQ(r.value, sim_mean_throughput(wan(), {16, 16, 32}, kData, 0.4));
}

TEST(Oracle, DiskPlateauPicksSmallestTriple) {
  NetworkProfile n = wan();
  n.disk_write_mbs = 200;  // 1600 Mbps cap
  const OracleResult r = oracle_optimum(n, kData, 0.0);
  EXPECT_EQ(r.value, 1600.0);
  // First triple in (cc, p, pp) order to reach the cap.
  ParamTriple first{0, 0, 0};
  for (int cc = 1; cc <= 16 && first.cc == 0; ++cc)
    for (int p = 1; p <= 16 && first.cc == 0; ++p)
      for (int pp = 1; pp <= 32; ++pp)
        if (sim_mean_throughput(n, {cc, p, pp}, kData, 0.0) >= 1600.0) {
          first = {cc, p, pp};
          break;
        }
  EXPECT_EQ(r.params, first);
  EXPECT_LT(r.params, (ParamTriple{16, 16, 32}));
}

TEST(Oracle, RandomSearchNeverBeatsIt) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> c(1, 16), pp(1, 32);
  for (double load : {0.0, 0.3, 0.7}) {
    const OracleResult r = oracle_optimum(wan(), kData, load);
    for (int i = 0; i < 2000; ++i)
      EXPECT_LE(sim_mean_throughput(wan(), {c(rng), c(rng), pp(rng)}, kData, load), r.value);
  }
}

}  // namespace
}  // namespace xfer
