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

#include "xfer/knowledge_base.hpp"

#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "xfer/error.hpp"
#include "xfer/simulator.hpp"

namespace xfer {
namespace {

NetworkProfile net(double bw, double rtt) {
  NetworkProfile n;
  n.bandwidth_mbps = bw;
  n.rtt_ms = rtt;
  n.tcp_buffer_bytes = 4 << 20;
  n.disk_read_mbs = 4000;
  n.disk_write_mbs = 4000;
  return n;
}

const DatasetProfile kData{16e6, 500, 8'000'000'000ULL};

LatticeCoverage small_coverage() {
  LatticeCoverage c;
  c.cc = {1, 4, 16};
  c.p = {1, 4, 16};
  c.pp = {1, 8, 32};
  return c;
}

std::vector<TransferLogEntry> corpus(const NetworkProfile& n, std::vector<double> loads,
                                     std::uint64_t seed, double t0 = 1.7e9) {
  SimScenario s{n, {}, 0.05, seed};
  for (std::size_t i = 0; i < loads.size(); ++i) s.schedule.push_back({double(i), loads[i]});
  CorpusOptions opt;
  opt.repeats = 2;
  opt.start_time = t0;
  return generate_corpus(std::span(&s, 1), std::span(&kData, 1), small_coverage(), opt, seed);
}

const std::vector<NetworkProfile> kNets{net(1000, 20), net(10000, 80), net(40000, 200)};

LogBatch base_batch() {
  LogBatch b{"base", {}};
  std::uint64_t seed = 1;
  for (const auto& n : kNets) {
    auto e = corpus(n, {0.15, 0.45, 0.75}, seed++);
    b.entries.insert(b.entries.end(), e.begin(), e.end());
  }
  return b;
}

const KnowledgeBase& base_kb() {
  static const KnowledgeBase kb = [] {
    const LogBatch b = base_batch();
    return build_kb(std::span(&b, 1));
  }();
  return kb;
}

std::string cluster_json(const KnowledgeBase& kb, int id) {
  KnowledgeBase one;
  one.clusters = {kb.clusters.at(std::size_t(id))};
  return serialize_kb(one);
}

TEST(LoadBand, Examples) {
  EXPECT_EQ(load_band(0.0, 10), 0);
  EXPECT_EQ(load_band(0.05, 10), 0);
  EXPECT_EQ(load_band(0.1, 10), 1);
  EXPECT_EQ(load_band(0.75, 10), 7);
  EXPECT_EQ(load_band(1.0, 10), 9);
  EXPECT_EQ(load_band(0.5, 1), 0);
}

TEST(BuildKb, ThreeNetworksThreeLoads) {
  const KnowledgeBase& kb = base_kb();
  ASSERT_EQ(kb.clusters.size(), 3u);
  std::size_t surfaces = 0;
  for (std::size_t k = 0; k < kb.clusters.size(); ++k) {
    const auto& c = kb.clusters[k];
    EXPECT_EQ(c.id, int(k));
    EXPECT_EQ(c.size, 3u * 27u * 2u);
    ASSERT_EQ(c.bands.size(), 3u);
    EXPECT_EQ(c.bands[0].index, 2);
    EXPECT_EQ(c.bands[1].index, 5);
    EXPECT_EQ(c.bands[2].index, 8);
    for (const auto& b : c.bands) {
      EXPECT_GE(b.surface.load_tag.value(), b.lo);
      EXPECT_LT(b.surface.load_tag.value(), b.hi);
      EXPECT_EQ(b.surface.kind, SurfaceKind::kSpline);
      EXPECT_TRUE(b.surface.argmax.has_value());
    }
    surfaces += c.bands.size();
  }
  EXPECT_EQ(surfaces, 9u);
  EXPECT_EQ(kb.batches.size(), 1u);
  EXPECT_EQ(kb.batches[0].entries, 3u * 3u * 27u * 2u);
}

TEST(BuildKb, EveryNetworkInItsOwnCluster) {
  const KnowledgeBase& kb = base_kb();
  std::vector<int> seen;
  for (const auto& n : kNets) {
    const QueryResult q = query_kb(kb, kData, n);
    EXPECT_LT(q.distance, 1e-9);
    EXPECT_EQ(std::count(seen.begin(), seen.end(), q.cluster_id), 0);
    seen.push_back(q.cluster_id);
    ASSERT_EQ(q.surfaces.size(), 3u);
    EXPECT_EQ(q.load_tags.size(), 3u);
    for (std::size_t i = 1; i < q.surfaces.size(); ++i)
      EXPECT_LT(q.surfaces[i - 1].load_tag, q.surfaces[i].load_tag);
  }
}

TEST(BuildKb, SingleEntryIsLowConfidence) {
  LogBatch b{"one", {corpus(kNets[0], {0.3}, 4).front()}};
  const KnowledgeBase kb = build_kb(std::span(&b, 1));
  ASSERT_EQ(kb.clusters.size(), 1u);
  ASSERT_EQ(kb.clusters[0].bands.size(), 1u);
  const auto& s = kb.clusters[0].bands[0].surface;
  EXPECT_TRUE(s.low_confidence);
  EXPECT_NE(s.kind, SurfaceKind::kSpline);
  EXPECT_NEAR(eval(s, b.entries[0].params), b.entries[0].throughput_mbps, 1e-9);
}

TEST(BuildKb, EmptyInputThrows) {
  EXPECT_THROW(build_kb({}), Error);
}

TEST(BuildKb, RebuildIsByteIdentical) {
  const LogBatch b = base_batch();
  EXPECT_EQ(serialize_kb(build_kb(std::span(&b, 1))), serialize_kb(base_kb()));
}

TEST(UpdateKb, EmptyBatchIsNoOp) {
  UpdateSummary sum;
  const KnowledgeBase kb = update_kb(base_kb(), LogBatch{"empty", {}}, {}, &sum);
  EXPECT_EQ(serialize_kb(kb), serialize_kb(base_kb()));
  EXPECT_TRUE(sum.touched_clusters.empty());
  EXPECT_FALSE(sum.reclustered);
}

TEST(UpdateKb, BatchInsideOneClusterTouchesOnlyIt) {
  const KnowledgeBase& kb = base_kb();
  const int target = query_kb(kb, kData, kNets[1]).cluster_id;
  LogBatch b{"more", corpus(kNets[1], {0.45}, 99, 1.8e9)};
  UpdateSummary sum;
  const KnowledgeBase up = update_kb(kb, b, {}, &sum);
  EXPECT_EQ(sum.touched_clusters, std::vector<int>{target});
  EXPECT_TRUE(sum.new_clusters.empty());
  EXPECT_FALSE(sum.reclustered);
  ASSERT_EQ(up.clusters.size(), kb.clusters.size());
  for (int k = 0; k < int(kb.clusters.size()); ++k) {
    if (k == target)
      EXPECT_NE(cluster_json(up, k), cluster_json(kb, k));
    else
      EXPECT_EQ(cluster_json(up, k), cluster_json(kb, k));
  }
  const auto& c = up.clusters[std::size_t(target)];
  EXPECT_EQ(c.size, kb.clusters[std::size_t(target)].size + b.entries.size());
  EXPECT_EQ(c.bands.size(), 3u);
  EXPECT_EQ(c.bands[1].surface.sample_count, 4u * 27u);
  EXPECT_EQ(up.batches.size(), 2u);
  EXPECT_EQ(up.built_at, b.entries.back().timestamp);
}

TEST(UpdateKb, NewBandInsideExistingCluster) {
  LogBatch b{"new-band", corpus(kNets[0], {0.95}, 5, 1.8e9)};
  const KnowledgeBase up = update_kb(base_kb(), b);
  const auto& c = up.clusters[std::size_t(query_kb(up, kData, kNets[0]).cluster_id)];
  ASSERT_EQ(c.bands.size(), 4u);
  EXPECT_EQ(c.bands.front().index, 0);  // 5% of the link left
}

TEST(UpdateKb, FarBlobAddsCluster) {
  LogBatch b{"far", corpus(net(100, 600), {0.3, 0.6}, 8, 1.8e9)};
  UpdateSummary sum;
  const KnowledgeBase up = update_kb(base_kb(), b, {}, &sum);
  EXPECT_TRUE(sum.reclustered);
  EXPECT_LT(sum.ch_after, sum.ch_before);
  ASSERT_EQ(sum.new_clusters, std::vector<int>{3});
  ASSERT_EQ(up.clusters.size(), 4u);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(cluster_json(up, k), cluster_json(base_kb(), k));
  EXPECT_EQ(query_kb(up, kData, net(100, 600)).cluster_id, 3);
}

TEST(UpdateKb, VersionMismatch) {
  KnowledgeBase kb = base_kb();
  kb.version = kKbFormatVersion + 1;
  EXPECT_THROW(update_kb(kb, LogBatch{"x", {}}), DataError);
  auto text = serialize_kb(base_kb());
  const auto pos = text.find("\"version\": 1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 12, "\"version\": 9");
  EXPECT_THROW(deserialize_kb(text), DataError);
}

TEST(QueryKb, TiesGoToLowestId) {
  KnowledgeBase kb = base_kb();
  KbCluster twin = kb.clusters[2];
  twin.id = 3;
  kb.clusters.push_back(twin);
  for (const auto& n : kNets) {
    const QueryResult q = query_kb(kb, kData, n);
    EXPECT_LT(q.cluster_id, 3);
  }
}

TEST(QueryKb, SmallPerturbationKeepsCluster) {
  for (const auto& n : kNets) {
    NetworkProfile m = n;
    m.bandwidth_mbps *= 1.01;
    m.rtt_ms *= 0.99;
    DatasetProfile d = kData;
    d.avg_file_bytes *= 1.01;
    EXPECT_EQ(query_kb(base_kb(), d, m).cluster_id, query_kb(base_kb(), kData, n).cluster_id);
  }
}

TEST(QueryKb, EmptyKbThrows) {
  EXPECT_THROW(query_kb(KnowledgeBase{}, kData, kNets[0]), Error);
}

TEST(Persistence, RoundTrip) {
  const std::string text = serialize_kb(base_kb());
  const KnowledgeBase back = deserialize_kb(text);
  EXPECT_EQ(serialize_kb(back), text);
  for (const auto& n : kNets) {
    const QueryResult a = query_kb(base_kb(), kData, n), b = query_kb(back, kData, n);
    EXPECT_EQ(a.cluster_id, b.cluster_id);
    ASSERT_EQ(a.surfaces.size(), b.surfaces.size());
    for (std::size_t i = 0; i < a.surfaces.size(); ++i) {
      EXPECT_EQ(a.surfaces[i].argmax->params, b.surfaces[i].argmax->params);
      for (const ParamTriple x : {ParamTriple{3, 5, 7}, ParamTriple{16, 1, 30}})
        EXPECT_EQ(eval(a.surfaces[i], x), eval(b.surfaces[i], x));
    }
  }
}

TEST(Persistence, SaveAndLoad) {
  const auto path = std::filesystem::temp_directory_path() / "xfer_kb_test.json";
  save_kb(base_kb(), path);
  EXPECT_EQ(serialize_kb(load_kb(path)), serialize_kb(base_kb()));
  std::filesystem::remove(path);
  EXPECT_THROW(load_kb(path), IoError);
  EXPECT_THROW(deserialize_kb("not json"), DataError);
}

}  // namespace
}  // namespace xfer
