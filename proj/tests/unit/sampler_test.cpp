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

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "xfer/error.hpp"
#include "xfer/maxima.hpp"

namespace xfer {
namespace {

constexpr std::uint64_t kMiB = 1ULL << 20, kGiB = 1ULL << 30;

// Scripted backend: achieved rate by chunk index, independent of params.
class ScriptedBackend : public TransferBackend {
 public:
  explicit ScriptedBackend(std::function<double(std::size_t)> rate) : rate_(std::move(rate)) {}
  ChunkResult transfer(const Chunk& chunk, const ParamTriple& params) override {
    calls.push_back({chunk.index, params});
    if (failures[chunk.index] > 0) {
      --failures[chunk.index];
      throw BackendError("scripted failure");
    }
    return {rate_(chunk.index), 1.0};
  }
  std::map<std::size_t, int> failures;
  std::vector<std::pair<std::size_t, ParamTriple>> calls;

 private:
  std::function<double(std::size_t)> rate_;
};

// Eight surfaces at levels 100, 200, ..., 800 with a small spike marking a
// distinct argmax on each.
std::vector<ThroughputSurface> ladder(std::size_t eta = 8) {
  std::vector<ThroughputSurface> out;
  for (std::size_t k = 0; k < eta; ++k) {
    std::vector<NodeStats> nodes;
    const int sp = 1 + int(k % 3), sc = 1 + int((k / 3) % 3);
    for (int p = 1; p <= 3; ++p)
      for (int cc = 1; cc <= 3; ++cc)
        nodes.push_back({{cc, p, 1}, 3, 100.0 * double(k + 1) + (p == sp && cc == sc ? 5.0 : 0.0), 2.0});
    ThroughputSurface s = fit_throughput_surface(nodes);
    s.load_tag = LoadIntensity(0.1 * double(k + 1));
    s.argmax = surface_argmax(s);
    out.push_back(s);
  }
  return out;
}

const DatasetProfile kTenGiB{double(kMiB), 10240, 10 * kGiB};

TEST(PlanChunks, Examples) {
  EXPECT_EQ(chunk_size(kTenGiB), 256 * kMiB);
  EXPECT_EQ(plan_chunks(kTenGiB).size(), 40u);
  const DatasetProfile one{double(kMiB), 1024, kGiB};
  EXPECT_EQ(chunk_size(one), 53687091u);
  const DatasetProfile tiny{double(kMiB), 1, kMiB};
  const auto c = plan_chunks(tiny);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].bytes, kMiB);
  const DatasetProfile big_files{double(kGiB), 40, 40 * kGiB};
  EXPECT_EQ(chunk_size(big_files), kGiB);
  EXPECT_THROW(plan_chunks(DatasetProfile{}), Error);
}

TEST(PlanChunks, ConservesVolume) {
  for (std::uint64_t total : {kMiB, 7 * kMiB + 3, kGiB + 12345, 10 * kGiB, 33 * kGiB + 1}) {
    const DatasetProfile d{double(kMiB), std::max<std::uint64_t>(1, total / kMiB), total};
    const auto chunks = plan_chunks(d);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      EXPECT_EQ(chunks[i].index, i);
      sum += chunks[i].bytes;
    }
    EXPECT_EQ(sum, total);
  }
}

TEST(Accuracy, Examples) {
  EXPECT_EQ(accuracy(500, 500).error_pct, 0.0);
  EXPECT_EQ(accuracy(500, 500).accuracy_pct, 100.0);
  EXPECT_NEAR(accuracy(1000, 930).error_pct, 7.0, 1e-12);
  EXPECT_NEAR(accuracy(1000, 930).accuracy_pct, 93.0, 1e-12);
  EXPECT_EQ(accuracy(1000, 0).error_pct, 100.0);
  EXPECT_EQ(accuracy(1000, 0).accuracy_pct, 0.0);
  EXPECT_THROW(accuracy(0, 10), PreconditionError);
}

TEST(AdaptiveSampling, MedianHitConvergesImmediately) {
  const auto s = ladder();
  ScriptedBackend b([](std::size_t) { return 400.0; });
  const Transcript t = adaptive_sampling(s, {}, kTenGiB, b);
  EXPECT_EQ(t.sample_transfers, 1u);
  EXPECT_TRUE(t.converged);
  EXPECT_FALSE(t.pinned);
  EXPECT_EQ(t.rows.back().event, "converged");
  EXPECT_EQ(t.rows[0].params, s[3].argmax->params);
}

TEST(AdaptiveSampling, BinaryNarrowingBound) {
  const auto s = ladder();
  SamplerConfig cfg;
  cfg.rule = SelectionRule::kMedian;
  for (std::size_t target = 0; target < s.size(); ++target) {
    const double level = 100.0 * double(target + 1);
    ScriptedBackend b([level](std::size_t) { return level; });
    const Transcript t = adaptive_sampling(s, {}, kTenGiB, b, cfg);
    EXPECT_LE(t.sample_transfers, 4u);  // ceil(log2 8) + 1
    EXPECT_FALSE(t.pinned);
    EXPECT_EQ(t.rows.back().surface, target);
  }
  // The default rule needs no more samples than the median rule.
  for (std::size_t target = 0; target < s.size(); ++target) {
    const double level = 100.0 * double(target + 1);
    ScriptedBackend b([level](std::size_t) { return level; });
    EXPECT_LE(adaptive_sampling(s, {}, kTenGiB, b).sample_transfers, 4u);
  }
}

TEST(AdaptiveSampling, OutsideEveryBandPins) {
  const auto s = ladder();
  ScriptedBackend b([](std::size_t) { return 5000.0; });
  const Transcript t = adaptive_sampling(s, {}, kTenGiB, b);
  EXPECT_TRUE(t.pinned);
  EXPECT_TRUE(t.converged);
  EXPECT_EQ(t.rows.back().surface, 7u);
}

TEST(AdaptiveSampling, StepChangeRetunesWithinWindow) {
  const auto s = ladder();
  ScriptedBackend b([](std::size_t i) { return i < 10 ? 400.0 : 600.0; });
  const Transcript t = adaptive_sampling(s, {}, kTenGiB, b);
  std::size_t retune = t.rows.size();
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.rows[i].event == "retune") {
      retune = i;
      break;
    }
  ASSERT_LT(retune, t.rows.size());
  EXPECT_LE(retune, 10u + 3u);
  EXPECT_EQ(t.rows[retune].params, s[5].argmax->params);
  EXPECT_EQ(t.retunes, 1u);
}

TEST(AdaptiveSampling, NoParameterChurn) {
  const auto s = ladder();
  ScriptedBackend b([](std::size_t i) { return i < 10 ? 700.0 : (i < 25 ? 200.0 : 500.0); });
  const Transcript t = adaptive_sampling(s, {}, kTenGiB, b);
  std::size_t changes = 0, reselections = 0;
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    if (t.rows[i].params != t.rows[i - 1].params) ++changes;
    if (t.rows[i].surface != t.rows[i - 1].surface) ++reselections;
  }
  EXPECT_EQ(changes, reselections);
  EXPECT_EQ(reselections, t.sample_transfers - 1 + t.retunes);
}

TEST(AdaptiveSampling, RetriesOnceThenAborts) {
  const auto s = ladder();
  ScriptedBackend once([](std::size_t) { return 400.0; });
  once.failures[2] = 1;
  const Transcript ok = adaptive_sampling(s, {}, kTenGiB, once);
  EXPECT_FALSE(ok.aborted);
  EXPECT_EQ(ok.bytes_transferred, kTenGiB.total_bytes);

  ScriptedBackend twice([](std::size_t) { return 400.0; });
  twice.failures[2] = 2;
  const Transcript bad = adaptive_sampling(s, {}, kTenGiB, twice);
  EXPECT_TRUE(bad.aborted);
  EXPECT_EQ(bad.rows.size(), 2u);
  EXPECT_EQ(bad.bytes_transferred, 2 * 256 * kMiB);
}

TEST(AdaptiveSampling, TransfersWholeDataset) {
  const auto s = ladder();
  ScriptedBackend b([](std::size_t i) { return 150.0 + 20.0 * double(i % 7); });
  const Transcript t = adaptive_sampling(s, {}, kTenGiB, b);
  std::uint64_t sum = 0;
  for (const auto& r : t.rows) sum += r.bytes;
  EXPECT_EQ(sum, kTenGiB.total_bytes);
  EXPECT_EQ(t.bytes_transferred, sum);
}

TEST(AdaptiveSampling, Preconditions) {
  ScriptedBackend b([](std::size_t) { return 1.0; });
  EXPECT_THROW(adaptive_sampling({}, {}, kTenGiB, b), PreconditionError);
  auto s = ladder();
  std::swap(s[0], s[1]);
  EXPECT_THROW(adaptive_sampling(s, {}, kTenGiB, b), PreconditionError);
}

TEST(Transcript, CsvHeaderAndRows) {
  const auto s = ladder(2);
  ScriptedBackend b([](std::size_t) { return 100.0; });
  const DatasetProfile d{double(kMiB), 20, 20 * kMiB};
  std::ostringstream out;
  write_transcript_csv(adaptive_sampling(s, {}, d, b), out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "chunk_idx,cc,p,pp,predicted_mbps,achieved_mbps,elapsed_s,event");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, plan_chunks(d).size());
}

}  // namespace
}  // namespace xfer
