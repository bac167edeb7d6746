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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "xfer/error.hpp"
#include "xfer/ingest.hpp"
#include "xfer/io.hpp"
#include "xfer/maxima.hpp"

namespace xfer {
namespace {

using Json = nlohmann::ordered_json;

FeatureVector entry_features(const TransferLogEntry& e, const FeatureNormalization& norm) {
  return norm.apply(raw_features(e.network, e.dataset));
}

ThroughputSample to_sample(const TransferLogEntry& e) {
  return {double(e.params.p), double(e.params.cc), double(e.params.pp), e.throughput_mbps};
}

std::size_t distinct_count(std::span<const FeatureVector> points) {
  return std::set<FeatureVector>(points.begin(), points.end()).size();
}

// Clusters `points` with the CH-selected count, or as one cluster when the
// data cannot support a choice.
Clustering cluster_points(std::span<const FeatureVector> points, const KbConfig& config,
                          std::uint64_t seed) {
  const std::size_t hi = std::min({config.max_clusters, distinct_count(points), points.size() - 1});
  if (hi >= 2)
    return select_k(points, 2, hi, config.method, seed, config.restarts).clustering;
  return kmeans_pp(points, 1, seed);
}

// Entries of one cluster, split by load band.
struct BandSlice {
  std::vector<ThroughputSample> samples;
  double load_sum = 0.0;
};

ThroughputSurface fit_band(std::span<const NodeStats> nodes, int cluster_id, double load_tag,
                           const KbConfig& config) {
  ThroughputSurface s = fit_throughput_surface(nodes, config.surface);
  s.cluster_id = cluster_id;
  s.load_tag = LoadIntensity(load_tag);
  s.argmax = surface_argmax(s, config.bounds);
  return s;
}

void refresh_region(KbCluster& c, const KbConfig& config) {
  std::vector<ThroughputSurface> surfaces;
  for (const auto& b : c.bands) surfaces.push_back(b.surface);
  c.region = sampling_region(surfaces, config.region,
                             config.seed + 1000003ULL * static_cast<std::uint64_t>(c.id),
                             config.bounds);
}

KbCluster build_cluster(int id, std::span<const TransferLogEntry* const> members,
                        std::span<const FeatureVector> features, const KbConfig& config) {
  KbCluster c;
  c.id = id;
  c.size = members.size();
  for (const auto& f : features)
    for (std::size_t d = 0; d < kFeatureDim; ++d) c.centroid[d] += f[d];
  for (auto& v : c.centroid) v /= static_cast<double>(features.size());
  for (const auto& f : features) c.ssw += squared_distance(f, c.centroid);

  std::map<int, BandSlice> slices;
  for (const auto* e : members) {
    const double is = load_intensity(*e).value();
    auto& slice = slices[load_band(is, config.band_count)];
    slice.samples.push_back(to_sample(*e));
    slice.load_sum += is;
  }
  for (const auto& [band, slice] : slices) {
    LoadBand b;
    b.index = band;
    b.lo = static_cast<double>(band) / config.band_count;
    b.hi = static_cast<double>(band + 1) / config.band_count;
    const auto nodes = node_stats(slice.samples);
    b.surface = fit_band(nodes, id, slice.load_sum / static_cast<double>(slice.samples.size()), config);
    c.bands.push_back(std::move(b));
  }
  refresh_region(c, config);
  return c;
}

// Calinski-Harabasz score from per-cluster summaries.
struct ClusterSummary {
  double n = 0.0;
  FeatureVector centroid{};
  double ssw = 0.0;
};

double summary_ch(const std::vector<ClusterSummary>& cs) {
  double n = 0.0;
  FeatureVector overall{};
  for (const auto& c : cs) {
    n += c.n;
    for (std::size_t d = 0; d < kFeatureDim; ++d) overall[d] += c.n * c.centroid[d];
  }
  for (auto& v : overall) v /= n;
  double between = 0.0, within = 0.0;
  for (const auto& c : cs) {
    between += c.n * squared_distance(c.centroid, overall);
    within += c.ssw;
  }
  const double m = static_cast<double>(cs.size());
  if (cs.size() < 2) return within / n;  // caller compares dispersion instead
  if (within <= 0.0) return std::numeric_limits<double>::infinity();
  return (between / (m - 1.0)) / (within / (n - m));
}

void absorb(ClusterSummary& c, std::span<const FeatureVector> pts) {
  if (pts.empty()) return;
  ClusterSummary add;
  add.n = static_cast<double>(pts.size());
  for (const auto& p : pts)
    for (std::size_t d = 0; d < kFeatureDim; ++d) add.centroid[d] += p[d];
  for (auto& v : add.centroid) v /= add.n;
  for (const auto& p : pts) add.ssw += squared_distance(p, add.centroid);
  const double total = c.n + add.n;
  const double gap = squared_distance(c.centroid, add.centroid);
  for (std::size_t d = 0; d < kFeatureDim; ++d)
    c.centroid[d] += (add.centroid[d] - c.centroid[d]) * add.n / total;
  c.ssw += add.ssw + gap * c.n * add.n / total;
  c.n = total;
}

std::size_t nearest_cluster(const std::vector<KbCluster>& clusters, const FeatureVector& x,
                            double* distance = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const double d = squared_distance(x, clusters[k].centroid);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  if (distance) *distance = std::sqrt(best_d);
  return best;
}

// --- JSON -----------------------------------------------------------------

Json num(double v) { return format_double(v); }

double get_num(const Json& j, const std::string& field) {
  if (j.is_string()) return parse_double(j.get<std::string>(), field);
  if (j.is_number()) return j.get<double>();
  throw DataError(field, "expected a number");
}

const Json& at(const Json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw DataError(key, "missing field");
  return j.at(key);
}

Json nums(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::vector<double> get_nums(const Json& j, const std::string& field) {
  if (!j.is_array()) throw DataError(field, "expected an array");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(get_num(x, field));
  return out;
}

Json triple(const ParamTriple& t) { return Json::array({t.cc, t.p, t.pp}); }

ParamTriple get_triple(const Json& j, const std::string& field) {
  if (!j.is_array() || j.size() < 3) throw DataError(field, "expected [cc, p, pp]");
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

const char* kind_name(RegressionKind k) {
  switch (k) {
    case RegressionKind::kConstant: return "constant";
    case RegressionKind::kQuadratic: return "quadratic";
    case RegressionKind::kCubic: return "cubic";
  }
  return "constant";
}

RegressionKind kind_from(const std::string& s) {
  if (s == "constant") return RegressionKind::kConstant;
  if (s == "quadratic") return RegressionKind::kQuadratic;
  if (s == "cubic") return RegressionKind::kCubic;
  throw DataError("regression.kind", "unknown model kind " + s);
}

Json region_json(const SamplingRegion& r) {
  Json j;
  Json balls = Json::array();
  for (const auto& b : r.maxima) balls.push_back({{"center", triple(b.center)}, {"radius", b.radius}});
  Json sep = Json::array();
  for (const auto& s : r.separation) sep.push_back({{"point", triple(s.point)}, {"score", num(s.score)}});
  j["maxima"] = balls;
  j["separation"] = sep;
  j["separation_undefined"] = r.separation_undefined;
  return j;
}

SamplingRegion region_from(const Json& j) {
  SamplingRegion r;
  for (const auto& b : at(j, "maxima"))
    r.maxima.push_back({get_triple(at(b, "center"), "region.center"), at(b, "radius").get<int>()});
  for (const auto& s : at(j, "separation"))
    r.separation.push_back({get_triple(at(s, "point"), "region.point"),
                            get_num(at(s, "score"), "region.score")});
  r.separation_undefined = at(j, "separation_undefined").get<bool>();
  return r;
}

Json surface_json(const ThroughputSurface& s, const SamplingRegion& region) {
  Json j;
  j["kind"] = s.kind == SurfaceKind::kSpline ? "spline" : "regression";
  j["cluster_id"] = s.cluster_id;
  j["load_tag"] = num(s.load_tag.value());
  j["sample_count"] = s.sample_count;
  j["fill_fraction"] = num(s.fill_fraction);
  j["low_confidence"] = s.low_confidence;
  j["hull"] = nums(std::vector<double>{s.hull.p_lo, s.hull.p_hi, s.hull.cc_lo, s.hull.cc_hi,
                                       s.hull.pp_lo, s.hull.pp_hi});
  j["pp_knots"] = nums(s.pp_curve.knots());
  Json curve;
  curve["values"] = nums(s.pp_curve.values());
  Json pieces = Json::array();
  for (const auto& p : s.pp_curve.pieces()) pieces.push_back(nums(std::vector<double>{p.c0, p.c1, p.c2, p.c3}));
  curve["pieces"] = pieces;
  j["pp_curve"] = curve;
  if (!s.sheets.empty()) {
    j["p_axis"] = nums(s.sheets.front().xs());
    j["cc_axis"] = nums(s.sheets.front().ys());
  } else {
    j["p_axis"] = Json::array();
    j["cc_axis"] = Json::array();
  }
  Json sheets = Json::array();
  for (const auto& sheet : s.sheets) {
    Json nodes = Json::array();
    for (const auto& n : sheet.nodes()) nodes.push_back(nums(std::vector<double>{n.f, n.fx, n.fy, n.fxy}));
    sheets.push_back(nodes);
  }
  j["sheets"] = sheets;
  if (s.regression) {
    j["regression"] = {{"kind", kind_name(s.regression->kind)},
                       {"coefficients", nums(s.regression->coefficients)},
                       {"r_squared", num(s.regression->r_squared)}};
  } else {
    j["regression"] = nullptr;
  }
  Json conf = Json::array();
  for (const auto& [t, c] : s.confidence)
    conf.push_back({{"params", triple(t)},
                    {"mean", num(c.mean)},
                    {"stddev", num(c.stddev)},
                    {"count", c.count},
                    {"synthetic", c.synthetic}});
  j["confidence"] = conf;
  if (s.argmax)
    j["argmax"] = {{"params", triple(s.argmax->params)}, {"value", num(s.argmax->value)}};
  else
    j["argmax"] = nullptr;
  j["region"] = region_json(region);
  return j;
}

ThroughputSurface surface_from(const Json& j) {
  ThroughputSurface s;
  const std::string kind = at(j, "kind").get<std::string>();
  if (kind != "spline" && kind != "regression") throw DataError("surface.kind", "unknown kind " + kind);
  s.kind = kind == "spline" ? SurfaceKind::kSpline : SurfaceKind::kRegression;
  s.cluster_id = at(j, "cluster_id").get<int>();
  s.load_tag = LoadIntensity(get_num(at(j, "load_tag"), "load_tag"));
  s.sample_count = at(j, "sample_count").get<std::size_t>();
  s.fill_fraction = get_num(at(j, "fill_fraction"), "fill_fraction");
  s.low_confidence = at(j, "low_confidence").get<bool>();
  const auto hull = get_nums(at(j, "hull"), "hull");
  if (hull.size() != 6) throw DataError("hull", "expected 6 numbers");
  s.hull = {hull[0], hull[1], hull[2], hull[3], hull[4], hull[5]};

  auto knots = get_nums(at(j, "pp_knots"), "pp_knots");
  const Json& curve = at(j, "pp_curve");
  auto values = get_nums(at(curve, "values"), "pp_curve.values");
  std::vector<SplinePiece> pieces;
  for (const auto& p : at(curve, "pieces")) {
    const auto c = get_nums(p, "pp_curve.pieces");
    if (c.size() != 4) throw DataError("pp_curve.pieces", "expected 4 coefficients");
    pieces.push_back({c[0], c[1], c[2], c[3]});
  }
  s.pp_curve = CubicSpline1D::from_pieces(knots, std::move(values), std::move(pieces));

  const auto xs = get_nums(at(j, "p_axis"), "p_axis");
  const auto ys = get_nums(at(j, "cc_axis"), "cc_axis");
  for (const auto& sheet : at(j, "sheets")) {
    std::vector<HermiteNode> nodes;
    for (const auto& n : sheet) {
      const auto v = get_nums(n, "sheets");
      if (v.size() != 4) throw DataError("sheets", "expected [f, fx, fy, fxy]");
      nodes.push_back({v[0], v[1], v[2], v[3]});
    }
    s.sheets.push_back(BicubicGridSurface::from_nodes(xs, ys, std::move(nodes)));
  }
  if (s.kind == SurfaceKind::kSpline && (s.sheets.empty() || s.sheets.size() != knots.size()))
    throw DataError("sheets", "one sheet per pp knot expected");

  const Json& reg = at(j, "regression");
  if (!reg.is_null()) {
    RegressionModel m;
    m.kind = kind_from(at(reg, "kind").get<std::string>());
    m.coefficients = get_nums(at(reg, "coefficients"), "regression.coefficients");
    m.r_squared = get_num(at(reg, "r_squared"), "regression.r_squared");
    if (m.coefficients.size() != regression_terms(m.kind).size())
      throw DataError("regression.coefficients", "wrong coefficient count");
    s.regression = std::move(m);
  }
  if (s.kind == SurfaceKind::kRegression && !s.regression)
    throw DataError("regression", "regression surface without a model");

  for (const auto& c : at(j, "confidence"))
    s.confidence[get_triple(at(c, "params"), "confidence.params")] = {
        get_num(at(c, "mean"), "confidence.mean"), get_num(at(c, "stddev"), "confidence.stddev"),
        at(c, "count").get<std::size_t>(), at(c, "synthetic").get<bool>()};
  const Json& am = at(j, "argmax");
  if (!am.is_null())
    s.argmax = SurfaceArgmax{get_triple(at(am, "params"), "argmax.params"),
                             get_num(at(am, "value"), "argmax.value")};
  return s;
}

}  // namespace

int load_band(double is, int band_count) {
  const int b = static_cast<int>(std::floor(std::clamp(is, 0.0, 1.0) * band_count + 1e-9));
  return std::clamp(b, 0, band_count - 1);
}

KnowledgeBase build_kb(std::span<const LogBatch> batches, const KbConfig& config) {
  std::vector<const TransferLogEntry*> entries;
  KnowledgeBase kb;
  double latest = -std::numeric_limits<double>::infinity();
  for (const auto& b : batches) {
    kb.batches.push_back({b.id, b.entries.size()});
    for (const auto& e : b.entries) {
      entries.push_back(&e);
      latest = std::max(latest, e.timestamp);
    }
  }
  if (entries.empty()) throw PreconditionError("knowledge base needs at least one log entry");
  kb.built_at = latest;

  std::vector<FeatureVector> raw;
  for (const auto* e : entries) raw.push_back(raw_features(e->network, e->dataset));
  kb.normalization = fit_normalization(raw);
  std::vector<FeatureVector> points;
  for (const auto& r : raw) points.push_back(kb.normalization.apply(r));

  const Clustering clustering = cluster_points(points, config, config.seed);
  const std::size_t m = clustering.centroids.size();
  std::vector<std::vector<const TransferLogEntry*>> members(m);
  std::vector<std::vector<FeatureVector>> features(m);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    members[clustering.assignments[i]].push_back(entries[i]);
    features[clustering.assignments[i]].push_back(points[i]);
  }
  for (std::size_t k = 0; k < m; ++k)
    kb.clusters.push_back(build_cluster(static_cast<int>(k), members[k], features[k], config));
  return kb;
}

KnowledgeBase update_kb(const KnowledgeBase& kb, const LogBatch& batch, const KbConfig& config,
                        UpdateSummary* summary) {
  if (kb.version != kKbFormatVersion)
    throw DataError("version", "knowledge base format " + std::to_string(kb.version) +
                                   " is not supported (expected " +
                                   std::to_string(kKbFormatVersion) + ")");
  UpdateSummary local;
  UpdateSummary& sum = summary ? *summary : local;
  sum = {};
  if (batch.entries.empty()) return kb;
  if (kb.clusters.empty()) throw PreconditionError("cannot update an empty knowledge base");

  KnowledgeBase out = kb;
  out.batches.push_back({batch.id, batch.entries.size()});
  for (const auto& e : batch.entries) out.built_at = std::max(out.built_at, e.timestamp);

  const std::size_t n = batch.entries.size();
  std::vector<FeatureVector> points(n);
  std::vector<std::size_t> nearest(n);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    points[i] = entry_features(batch.entries[i], kb.normalization);
    nearest[i] = nearest_cluster(kb.clusters, points[i], &dist[i]);
  }

  // Would folding the batch into the nearest clusters degrade the partition?
  std::vector<ClusterSummary> before, after;
  for (const auto& c : kb.clusters) before.push_back({double(c.size), c.centroid, c.ssw});
  after = before;
  {
    std::vector<std::vector<FeatureVector>> per(kb.clusters.size());
    for (std::size_t i = 0; i < n; ++i) per[nearest[i]].push_back(points[i]);
    for (std::size_t k = 0; k < per.size(); ++k) absorb(after[k], per[k]);
  }
  sum.ch_before = summary_ch(before);
  sum.ch_after = summary_ch(after);
  const bool degraded = kb.clusters.size() >= 2
                            ? sum.ch_after < (1.0 - config.recluster_drop) * sum.ch_before
                            : sum.ch_after > (1.0 + config.recluster_drop) * sum.ch_before;

  std::vector<bool> novel(n, false);
  std::vector<std::size_t> novel_idx;
  if (degraded) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = kb.clusters[nearest[i]];
      const double radius = c.size ? std::sqrt(c.ssw / static_cast<double>(c.size)) : 0.0;
      if (dist[i] > std::max(3.0 * radius, 0.05)) {
        novel[i] = true;
        novel_idx.push_back(i);
      }
    }
  }
  sum.reclustered = !novel_idx.empty();

  // Existing clusters absorb the familiar entries.
  std::map<std::size_t, std::map<int, BandSlice>> touched;
  std::map<std::size_t, std::vector<FeatureVector>> touched_points;
  for (std::size_t i = 0; i < n; ++i) {
    if (novel[i]) continue;
    const auto& e = batch.entries[i];
    const double is = load_intensity(e).value();
    auto& slice = touched[nearest[i]][load_band(is, config.band_count)];
    slice.samples.push_back(to_sample(e));
    slice.load_sum += is;
    touched_points[nearest[i]].push_back(points[i]);
  }
  for (auto& [k, slices] : touched) {
    KbCluster& c = out.clusters[k];
    ClusterSummary cs{double(c.size), c.centroid, c.ssw};
    absorb(cs, touched_points[k]);
    c.size = static_cast<std::size_t>(cs.n);
    c.centroid = cs.centroid;
    c.ssw = cs.ssw;
    for (auto& [band, slice] : slices) {
      const auto fresh = node_stats(slice.samples);
      auto it = std::find_if(c.bands.begin(), c.bands.end(),
                             [&](const LoadBand& b) { return b.index == band; });
      if (it == c.bands.end()) {
        LoadBand b;
        b.index = band;
        b.lo = static_cast<double>(band) / config.band_count;
        b.hi = static_cast<double>(band + 1) / config.band_count;
        b.surface = fit_band(fresh, c.id, slice.load_sum / double(slice.samples.size()), config);
        c.bands.insert(std::upper_bound(c.bands.begin(), c.bands.end(), b,
                                        [](const LoadBand& a, const LoadBand& x) { return a.index < x.index; }),
                       std::move(b));
      } else {
        const auto old_nodes = observed_nodes(it->surface);
        const auto merged = merge_node_stats(old_nodes, fresh);
        const double old_n = static_cast<double>(it->surface.sample_count);
        const double tag = (it->surface.load_tag.value() * old_n + slice.load_sum) /
                           (old_n + static_cast<double>(slice.samples.size()));
        it->surface = fit_band(merged, c.id, tag, config);
      }
    }
    refresh_region(c, config);
    sum.touched_clusters.push_back(c.id);
  }

  // Entries far from every centroid form clusters of their own.
  if (!novel_idx.empty()) {
    std::vector<FeatureVector> npts;
    for (auto i : novel_idx) npts.push_back(points[i]);
    const Clustering cl =
        cluster_points(npts, config, config.seed + 7777ULL * (out.batches.size() + 1));
    const std::size_t m = cl.centroids.size();
    std::vector<std::vector<const TransferLogEntry*>> members(m);
    std::vector<std::vector<FeatureVector>> feats(m);
    for (std::size_t r = 0; r < novel_idx.size(); ++r) {
      members[cl.assignments[r]].push_back(&batch.entries[novel_idx[r]]);
      feats[cl.assignments[r]].push_back(npts[r]);
    }
    for (std::size_t k = 0; k < m; ++k) {
      const int id = static_cast<int>(out.clusters.size());
      out.clusters.push_back(build_cluster(id, members[k], feats[k], config));
      sum.new_clusters.push_back(id);
    }
  }
  return out;
}

QueryResult query_kb(const KnowledgeBase& kb, const DatasetProfile& dataset,
                     const NetworkProfile& network) {
  if (kb.clusters.empty()) throw PreconditionError("knowledge base is empty");
  const FeatureVector x = kb.normalization.apply(raw_features(network, dataset));
  QueryResult r;
  const auto& c = kb.clusters[nearest_cluster(kb.clusters, x, &r.distance)];
  r.cluster_id = c.id;
  for (const auto& b : c.bands) r.surfaces.push_back(b.surface);
  std::stable_sort(r.surfaces.begin(), r.surfaces.end(),
                   [](const ThroughputSurface& a, const ThroughputSurface& b) {
                     return a.load_tag < b.load_tag;
                   });
  for (const auto& s : r.surfaces) r.load_tags.push_back(s.load_tag.value());
  r.region = c.region;
  return r;
}

std::string serialize_kb(const KnowledgeBase& kb) {
  Json j;
  j["version"] = kb.version;
  j["normalization"] = {{"min", nums(kb.normalization.min)}, {"max", nums(kb.normalization.max)}};
  Json clusters = Json::array();
  for (const auto& c : kb.clusters) {
    Json cj;
    cj["id"] = c.id;
    cj["centroid"] = nums(c.centroid);
    cj["size"] = c.size;
    cj["ssw"] = num(c.ssw);
    Json bands = Json::array();
    for (const auto& b : c.bands)
      bands.push_back({{"band", b.index},
                       {"i_s_range", nums(std::vector<double>{b.lo, b.hi})},
                       {"surface", surface_json(b.surface, c.region)}});
    cj["bands"] = bands;
    clusters.push_back(cj);
  }
  j["clusters"] = clusters;
  j["built_at"] = num(kb.built_at);
  Json batches = Json::array();
  for (const auto& b : kb.batches) batches.push_back({{"id", b.id}, {"entries", b.entries}});
  j["batches"] = batches;
  return j.dump(1) + "\n";
}

KnowledgeBase deserialize_kb(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("kb", std::string("malformed JSON: ") + e.what());
  }
  try {
    KnowledgeBase kb;
    kb.version = at(j, "version").get<int>();
    if (kb.version != kKbFormatVersion)
      throw DataError("version", "unsupported knowledge base format " + std::to_string(kb.version));
    const Json& norm = at(j, "normalization");
    const auto lo = get_nums(at(norm, "min"), "normalization.min");
    const auto hi = get_nums(at(norm, "max"), "normalization.max");
    if (lo.size() != kFeatureDim || hi.size() != kFeatureDim)
      throw DataError("normalization", "expected 5 features");
    std::copy(lo.begin(), lo.end(), kb.normalization.min.begin());
    std::copy(hi.begin(), hi.end(), kb.normalization.max.begin());
    for (const auto& cj : at(j, "clusters")) {
      KbCluster c;
      c.id = at(cj, "id").get<int>();
      const auto centroid = get_nums(at(cj, "centroid"), "centroid");
      if (centroid.size() != kFeatureDim) throw DataError("centroid", "expected 5 features");
      std::copy(centroid.begin(), centroid.end(), c.centroid.begin());
      c.size = at(cj, "size").get<std::size_t>();
      c.ssw = get_num(at(cj, "ssw"), "ssw");
      for (const auto& bj : at(cj, "bands")) {
        LoadBand b;
        b.index = at(bj, "band").get<int>();
        const auto range = get_nums(at(bj, "i_s_range"), "i_s_range");
        if (range.size() != 2) throw DataError("i_s_range", "expected [lo, hi]");
        b.lo = range[0];
        b.hi = range[1];
        const Json& sj = at(bj, "surface");
        b.surface = surface_from(sj);
        if (c.bands.empty()) c.region = region_from(at(sj, "region"));
        c.bands.push_back(std::move(b));
      }
      kb.clusters.push_back(std::move(c));
    }
    kb.built_at = get_num(at(j, "built_at"), "built_at");
    for (const auto& bj : at(j, "batches"))
      kb.batches.push_back({at(bj, "id").get<std::string>(), at(bj, "entries").get<std::size_t>()});
    return kb;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("kb", std::string("unexpected JSON structure: ") + e.what());
  }
}

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_kb(kb));
}

KnowledgeBase load_kb(const std::filesystem::path& path) { return deserialize_kb(read_file(path)); }

}  // namespace xfer
