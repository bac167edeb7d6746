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

#include "xfer/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "xfer/error.hpp"
#include "xfer/io.hpp"
#include "xfer/maxima.hpp"
#include "xfer/random.hpp"
#include "xfer/regression.hpp"

namespace xfer {
namespace {

constexpr double kNoise = 0.05;
constexpr std::size_t kRetuneStepChunk = 10;

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_double(rng); }

double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// Bits over moving time for a set of rows.
double bulk_rate(const std::vector<const TranscriptRow*>& rows) {
  double bits = 0.0, seconds = 0.0;
  for (const auto* r : rows) {
    const double b = static_cast<double>(r->bytes) * kBitsPerByte;
    bits += b;
    seconds += b / (std::max(r->achieved_mbps, 1e-6) * 1e6);
  }
  return seconds > 0.0 ? bits / seconds / 1e6 : 0.0;
}

std::vector<const TranscriptRow*> post_convergence_rows(const Transcript& t) {
  std::vector<const TranscriptRow*> rows;
  for (const auto& r : t.rows)
    if (r.event != "sample") rows.push_back(&r);
  return rows;
}

std::vector<double> band_levels() {
  std::vector<double> v;
  for (int b = 0; b < 8; ++b) v.push_back(0.05 + 0.1 * b);
  return v;
}

SimScenario level_scenario(const NetworkProfile& net, const std::vector<double>& levels,
                           std::uint64_t seed) {
  SimScenario s;
  s.network = net;
  for (std::size_t i = 0; i < levels.size(); ++i) s.schedule.push_back({double(i), levels[i]});
  s.noise = kNoise;
  s.seed = seed;
  return s;
}

SimScenario constant_scenario(const NetworkProfile& net, double i_ext, std::uint64_t seed) {
  SimScenario s;
  s.network = net;
  s.schedule = {{0.0, i_ext}};
  s.noise = kNoise;
  s.seed = seed;
  return s;
}

Transcript run_sampler(const KnowledgeBase& kb, const TransferProfile& prof, const SimScenario& sc,
                       SelectionRule rule = SelectionRule::kClosest) {
  const QueryResult q = query_kb(kb, prof.dataset, prof.network);
  SimBackend backend(sc, prof.dataset);
  SamplerConfig cfg;
  cfg.rule = rule;
  return adaptive_sampling(q.surfaces, q.region, prof.dataset, backend, cfg);
}

NetworkProfile perturbed(const NetworkProfile& base, std::mt19937_64& rng, int tag) {
  NetworkProfile n = base;
  n.bandwidth_mbps = std::round(base.bandwidth_mbps * uniform(rng, 0.9, 1.1));
  n.rtt_ms = std::round(base.rtt_ms * uniform(rng, 0.9, 1.1) * 10.0) / 10.0;
  n.source_id = fmt::format("{}-{}", base.source_id, tag);
  return n;
}

DatasetProfile scaled(const DatasetProfile& base, double factor) {
  DatasetProfile d = base;
  d.avg_file_bytes = std::round(base.avg_file_bytes * factor);
  d.num_files = std::max<std::uint64_t>(
      1, static_cast<std::uint64_t>(static_cast<double>(base.total_bytes) / d.avg_file_bytes));
  d.total_bytes = static_cast<std::uint64_t>(d.avg_file_bytes) * d.num_files;
  return d;
}

}  // namespace

const char* to_string(SizeClass c) {
  switch (c) {
    case SizeClass::kSmall: return "small";
    case SizeClass::kMedium: return "medium";
    case SizeClass::kLarge: return "large";
  }
  return "small";
}

std::vector<NetworkProfile> bench_networks() {
  return {{10000.0, 40.0, 8.0 * (1 << 20), 1200.0, 1200.0, "wan-a", "site-a"},
          {10000.0, 60.0, 16.0 * (1 << 20), 1200.0, 1200.0, "wan-b", "site-b"},
          {5000.0, 80.0, 8.0 * (1 << 20), 1200.0, 1200.0, "wan-c", "site-c"}};
}

DatasetProfile bench_dataset(SizeClass c) {
  constexpr std::uint64_t kMiB = 1ULL << 20, kGiB = 1ULL << 30;
  switch (c) {
    case SizeClass::kSmall: return {double(kMiB), 10240, 10 * kGiB};
    case SizeClass::kMedium: return {double(64 * kMiB), 320, 20 * kGiB};
    case SizeClass::kLarge: return {double(kGiB), 40, 40 * kGiB};
  }
  return {};
}

double post_convergence_accuracy(const Transcript& t) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto* r : post_convergence_rows(t)) {
    if (!(r->predicted_mbps > 0.0)) continue;
    sum += accuracy(r->predicted_mbps, r->achieved_mbps).accuracy_pct;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double post_convergence_throughput(const Transcript& t) {
  auto rows = post_convergence_rows(t);
  if (rows.empty())
    for (const auto& r : t.rows) rows.push_back(&r);
  return bulk_rate(rows);
}

// --- spline correctness ---------------------------------------------------

SplineSuiteResult run_spline_suite(std::uint64_t seed, std::size_t splines, std::size_t surfaces) {
  std::mt19937_64 rng(seed);
  SplineSuiteResult r;
  auto axis = [&](std::size_t n) {
    std::vector<double> xs{uniform(rng, -5.0, 5.0)};
    while (xs.size() < n) xs.push_back(xs.back() + uniform(rng, 0.2, 3.0));
    return xs;
  };

  for (std::size_t s = 0; s < splines; ++s, ++r.splines) {
    const std::size_t n = 3 + uniform_index(rng, 28);
    const auto xs = axis(n);
    std::vector<std::pair<double, double>> pts;
    for (double x : xs) pts.emplace_back(x, uniform(rng, -100.0, 100.0));
    const CubicSpline1D sp = fit_spline_1d(pts);
    for (const auto& [x, y] : pts)
      r.max_interpolation_rel = std::max(r.max_interpolation_rel, rel_gap(sp(x), y));
    const auto pieces = sp.pieces();
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const SplinePiece& L = pieces[i - 1];
      const SplinePiece& R = pieces[i];
      const double h = xs[i] - xs[i - 1];
      const double lv = L.c0 + h * (L.c1 + h * (L.c2 + h * L.c3));
      const double ld1 = L.c1 + h * (2.0 * L.c2 + 3.0 * h * L.c3);
      const double ld2 = 2.0 * L.c2 + 6.0 * h * L.c3;
      r.max_c2_jump_rel = std::max({r.max_c2_jump_rel, rel_gap(lv, R.c0), rel_gap(ld1, R.c1),
                                    rel_gap(ld2, 2.0 * R.c2)});
    }
    const double h_last = xs[n - 1] - xs[n - 2];
    r.max_end_second_derivative =
        std::max({r.max_end_second_derivative, std::abs(2.0 * pieces.front().c2),
                  std::abs(2.0 * pieces.back().c2 + 6.0 * h_last * pieces.back().c3)});

    const double a = uniform(rng, -10.0, 10.0), b = uniform(rng, -10.0, 10.0);
    std::vector<std::pair<double, double>> line;
    for (double x : xs) line.emplace_back(x, a + b * x);
    const CubicSpline1D ls = fit_spline_1d(line);
    for (int k = 0; k <= 50; ++k) {
      const double x = xs.front() + (xs.back() - xs.front()) * k / 50.0;
      r.max_affine_deviation = std::max(r.max_affine_deviation, std::abs(ls(x) - (a + b * x)));
    }
  }

  for (std::size_t s = 0; s < surfaces; ++s, ++r.surfaces) {
    const std::size_t n = 3 + uniform_index(rng, 8), m = 3 + uniform_index(rng, 8);
    const auto xs = axis(n), ys = axis(m);
    std::vector<double> v(n * m);
    for (auto& x : v) x = uniform(rng, -100.0, 100.0);
    const BicubicGridSurface g = fit_surface_2d(xs, ys, v);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        r.max_interpolation_rel = std::max(r.max_interpolation_rel, rel_gap(g(xs[i], ys[j]), v[i * m + j]));
    auto compare = [&](const Partials2D& L, const Partials2D& R) {
      r.max_c2_jump_rel = std::max({r.max_c2_jump_rel, rel_gap(L.f, R.f), rel_gap(L.fx, R.fx),
                                    rel_gap(L.fy, R.fy), rel_gap(L.fxx, R.fxx),
                                    rel_gap(L.fxy, R.fxy), rel_gap(L.fyy, R.fyy)});
    };
    for (std::size_t i = 1; i + 1 < n; ++i)
      for (std::size_t j = 0; j + 1 < m; ++j)
        for (int k = 0; k < 3; ++k) {
          const double y = uniform(rng, ys[j], ys[j + 1]);
          compare(g.partials_in_cell(i - 1, j, xs[i], y), g.partials_in_cell(i, j, xs[i], y));
        }
    for (std::size_t j = 1; j + 1 < m; ++j)
      for (std::size_t i = 0; i + 1 < n; ++i)
        for (int k = 0; k < 3; ++k) {
          const double x = uniform(rng, xs[i], xs[i + 1]);
          compare(g.partials_in_cell(i, j - 1, x, ys[j]), g.partials_in_cell(i, j, x, ys[j]));
        }
    const double a = uniform(rng, -10.0, 10.0), b = uniform(rng, -10.0, 10.0),
                 c = uniform(rng, -10.0, 10.0);
    std::vector<double> plane(n * m);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) plane[i * m + j] = a + b * xs[i] + c * ys[j];
    const BicubicGridSurface pg = fit_surface_2d(xs, ys, plane);
    for (int ki = 0; ki <= 20; ++ki)
      for (int kj = 0; kj <= 20; ++kj) {
        const double x = xs.front() + (xs.back() - xs.front()) * ki / 20.0;
        const double y = ys.front() + (ys.back() - ys.front()) * kj / 20.0;
        r.max_affine_deviation = std::max(r.max_affine_deviation, std::abs(pg(x, y) - (a + b * x + c * y)));
      }
  }
  return r;
}

// --- model ordering -------------------------------------------------------

ModelOrderingResult run_model_ordering(std::uint64_t seed, std::size_t trials) {
  std::mt19937_64 rng(seed);
  const auto nets = bench_networks();
  const LatticeCoverage coverage;
  ModelOrderingResult out;
  for (std::size_t t = 0; t < trials; ++t) {
    const NetworkProfile net = perturbed(nets[t % nets.size()], rng, static_cast<int>(t));
    const auto cls = static_cast<SizeClass>(uniform_index(rng, 3));
    const DatasetProfile data = scaled(bench_dataset(cls), uniform(rng, 0.7, 1.4));
    const double load = uniform(rng, 0.05, 0.7);
    Simulator sim(constant_scenario(net, load, rng()));

    std::vector<ThroughputSample> train;
    std::set<ParamTriple> seen;
    for (int cc : coverage.cc)
      for (int p : coverage.p)
        for (int pp : coverage.pp) {
          seen.insert({cc, p, pp});
          for (int rep = 0; rep < 3; ++rep)
            train.push_back({double(p), double(cc), double(pp),
                             sim.sim_throughput_at_load({cc, p, pp}, data, load)});
        }
    std::vector<std::pair<ParamTriple, double>> test;
    while (test.size() < 200) {
      const ParamTriple q{1 + int(uniform_index(rng, 16)), 1 + int(uniform_index(rng, 16)),
                          1 + int(uniform_index(rng, 32))};
      if (seen.count(q)) continue;
      test.emplace_back(q, sim.sim_throughput_at_load(q, data, load));
    }

    const ThroughputSurface spline = fit_throughput_surface(std::span<const ThroughputSample>(train));
    const RegressionModel cubic = fit_regression(train, RegressionKind::kCubic);
    const RegressionModel quad = fit_regression(train, RegressionKind::kQuadratic);
    double se_s = 0.0, se_c = 0.0, se_q = 0.0, ape = 0.0;
    std::size_t ape_n = 0;
    for (const auto& [q, obs] : test) {
      const double ps = eval(spline, q);
      const double pc = std::max(0.0, cubic.eval(q.p, q.cc, q.pp));
      const double pq = std::max(0.0, quad.eval(q.p, q.cc, q.pp));
      se_s += (ps - obs) * (ps - obs);
      se_c += (pc - obs) * (pc - obs);
      se_q += (pq - obs) * (pq - obs);
      if (obs > 0.0) {
        ape += std::abs(ps - obs) / obs;
        ++ape_n;
      }
    }
    const double n = static_cast<double>(test.size());
    ModelOrderingTrial tr{std::sqrt(se_s / n), std::sqrt(se_c / n), std::sqrt(se_q / n),
                          100.0 - 100.0 * ape / static_cast<double>(std::max<std::size_t>(ape_n, 1))};
    if (tr.rmse_spline < tr.rmse_cubic && tr.rmse_cubic < tr.rmse_quadratic) ++out.ordered;
    out.mean_spline_accuracy += tr.spline_accuracy / static_cast<double>(trials);
    out.trials.push_back(tr);
  }
  return out;
}

// --- maxima ---------------------------------------------------------------

ThroughputSurface random_smooth_surface(std::mt19937_64& rng) {
  auto pick_axis = [&](int max, std::size_t extra_lo, std::size_t extra_hi) {
    std::set<int> v{1, max};
    const std::size_t extra = extra_lo + uniform_index(rng, extra_hi - extra_lo + 1);
    while (v.size() < extra + 2) v.insert(2 + static_cast<int>(uniform_index(rng, max - 2)));
    return std::vector<int>(v.begin(), v.end());
  };
  const auto ps = pick_axis(16, 1, 5);
  const auto ccs = pick_axis(16, 1, 5);
  std::vector<int> pps = pick_axis(32, 0, 4);
  if (uniform_index(rng, 10) == 0) pps = {1 + static_cast<int>(uniform_index(rng, 32))};

  struct Bump {
    double a, p, cc, pp, sp, sc, sq;
  };
  std::vector<Bump> bumps(1 + uniform_index(rng, 3));
  for (auto& b : bumps)
    b = {uniform(rng, 200.0, 1000.0), uniform(rng, 1.0, 16.0), uniform(rng, 1.0, 16.0),
         uniform(rng, 1.0, 32.0),     uniform(rng, 2.0, 8.0),  uniform(rng, 2.0, 8.0),
         uniform(rng, 4.0, 16.0)};
  const double tp = uniform(rng, -10.0, 10.0), tc = uniform(rng, -10.0, 10.0),
               tq = uniform(rng, -5.0, 5.0);
  std::vector<NodeStats> nodes;
  for (int p : ps)
    for (int cc : ccs)
      for (int pp : pps) {
        double v = 300.0 + tp * p + tc * cc + tq * pp;
        for (const auto& b : bumps)
          v += b.a * std::exp(-((p - b.p) * (p - b.p) / (b.sp * b.sp) +
                                (cc - b.cc) * (cc - b.cc) / (b.sc * b.sc) +
                                (pp - b.pp) * (pp - b.pp) / (b.sq * b.sq)));
        nodes.push_back({{cc, p, pp}, 1, v, 0.0});
      }
  return fit_throughput_surface(std::span<const NodeStats>(nodes));
}

MaximaCheckResult run_maxima_check(std::uint64_t seed, std::size_t surfaces,
                                   std::size_t derivative_points) {
  std::mt19937_64 rng(seed);
  MaximaCheckResult r;
  std::vector<ThroughputSurface> fitted;
  for (std::size_t s = 0; s < surfaces; ++s) {
    fitted.push_back(random_smooth_surface(rng));
    const auto a = surface_argmax(fitted.back());
    const auto b = grid_argmax_oracle(fitted.back());
    ++r.surfaces;
    if (a.params == b.params && a.value == b.value) ++r.agreements;
  }
  const double hg = 1e-5, hh = 1e-4;
  for (std::size_t k = 0; k < derivative_points && !fitted.empty(); ++k, ++r.derivative_points) {
    const ThroughputSurface& s = fitted[k % fitted.size()];
    const auto& xs = s.sheets.front().xs();
    const auto& ys = s.sheets.front().ys();
    const auto& zs = s.pp_knots();
    const SurfaceCell cell{uniform_index(rng, xs.size() - 1), uniform_index(rng, ys.size() - 1),
                           zs.size() > 1 ? uniform_index(rng, zs.size() - 1) : 0};
    Point3 x{xs[cell.ip] + uniform(rng, 0.05, 0.95) * (xs[cell.ip + 1] - xs[cell.ip]),
             ys[cell.jc] + uniform(rng, 0.05, 0.95) * (ys[cell.jc + 1] - ys[cell.jc]), zs[0]};
    if (zs.size() > 1) x.pp = zs[cell.kp] + uniform(rng, 0.05, 0.95) * (zs[cell.kp + 1] - zs[cell.kp]);
    const SurfaceDerivatives d = derivatives_in_cell(s, cell, x);
    for (int a = 0; a < 3; ++a) {
      auto shifted = [&](double h) {
        Point3 y = x;
        (a == 0 ? y.p : a == 1 ? y.cc : y.pp) += h;
        return derivatives_in_cell(s, cell, y);
      };
      const double fd = (shifted(hg).value - shifted(-hg).value) / (2.0 * hg);
      r.max_gradient_rel = std::max(r.max_gradient_rel, rel_gap(d.gradient[a], fd));
      const auto up = shifted(hh), down = shifted(-hh);
      for (int b = 0; b < 3; ++b)
        r.max_hessian_rel = std::max(
            r.max_hessian_rel, rel_gap(d.hessian[b][a], (up.gradient[b] - down.gradient[b]) / (2.0 * hh)));
    }
  }
  return r;
}

// --- clustering -----------------------------------------------------------

std::vector<FeatureVector> blob_corpus(std::size_t k, std::size_t per_blob, double sigma,
                                       std::mt19937_64& rng, std::vector<std::size_t>* labels) {
  std::vector<FeatureVector> centres;
  while (centres.size() < k) {
    FeatureVector c;
    for (auto& v : c) v = uniform(rng, 0.1, 0.9);
    const bool far = std::all_of(centres.begin(), centres.end(), [&](const FeatureVector& o) {
      return std::sqrt(squared_distance(c, o)) >= 0.35;
    });
    if (far) centres.push_back(c);
  }
  std::vector<FeatureVector> pts;
  for (std::size_t b = 0; b < k; ++b)
    for (std::size_t i = 0; i < per_blob; ++i) {
      FeatureVector x = centres[b];
      for (auto& v : x) v += sigma * standard_normal(rng);
      pts.push_back(x);
      if (labels) labels->push_back(b);
    }
  return pts;
}

ClusterCheckResult run_cluster_check(std::size_t k_true, std::uint64_t seed, std::size_t runs) {
  ClusterCheckResult r;
  r.k_true = k_true;
  for (std::size_t run = 0; run < runs; ++run, ++r.runs) {
    std::mt19937_64 rng(seed + 104729 * run);
    const auto pts = blob_corpus(k_true, 30, 0.03, rng);
    const auto sel = select_k(pts, 2, std::max<std::size_t>(8, k_true + 2), ClusterMethod::kKMeansPP,
                              seed + run);
    if (sel.m != k_true) continue;
    ++r.recovered;
    double at = 0.0, below = -1.0, above = -1.0;
    for (const auto& [m, score] : sel.scores) {
      if (m == k_true) at = score;
      if (m + 1 == k_true) below = score;
      if (m == k_true + 1) above = score;
    }
    if (at > below && at > above) ++r.strict_peak;
  }
  return r;
}

// --- online experiments -----------------------------------------------------

BandKb build_band_kb(std::uint64_t seed) {
  BandKb out;
  const auto nets = bench_networks();
  std::vector<SimScenario> scenarios;
  for (std::size_t i = 0; i < nets.size(); ++i)
    scenarios.push_back(level_scenario(nets[i], band_levels(), seed + i));
  std::vector<DatasetProfile> datasets;
  for (auto c : {SizeClass::kSmall, SizeClass::kMedium, SizeClass::kLarge}) datasets.push_back(bench_dataset(c));
  for (const auto& n : nets)
    for (const auto& d : datasets) out.profiles.push_back({n, d});
  CorpusOptions opt;
  opt.repeats = 8;
  opt.load_jitter = 0.05;
  LogBatch batch{"day-0", generate_corpus(scenarios, datasets, LatticeCoverage{}, opt, seed)};
  KbConfig cfg;
  cfg.seed = seed;
  out.kb = build_kb(std::span<const LogBatch>(&batch, 1), cfg);
  return out;
}

ConvergenceResult run_convergence(const BandKb& kb, std::uint64_t seed, std::size_t scenarios,
                                  SelectionRule rule) {
  std::mt19937_64 rng(seed);
  ConvergenceResult r;
  double samples = 0.0, acc = 0.0;
  std::size_t acc_n = 0;
  for (std::size_t s = 0; s < scenarios; ++s, ++r.scenarios) {
    const TransferProfile& prof = kb.profiles[uniform_index(rng, kb.profiles.size())];
    const double load = 0.1 * static_cast<double>(uniform_index(rng, 8)) + 0.1 * unit_double(rng);
    const Transcript t = run_sampler(kb.kb, prof, constant_scenario(prof.network, load, rng()), rule);
    samples += static_cast<double>(t.sample_transfers);
    if (t.pinned) ++r.pinned;
    if (t.converged && !t.pinned && t.sample_transfers <= 3) ++r.converged_within_3;
    if (t.converged) {
      acc += post_convergence_accuracy(t);
      ++acc_n;
    }
  }
  r.mean_samples = samples / static_cast<double>(std::max<std::size_t>(r.scenarios, 1));
  r.mean_accuracy = acc_n ? acc / static_cast<double>(acc_n) : 0.0;
  return r;
}

std::vector<MatrixCell> run_throughput_matrix(std::uint64_t seed, std::size_t seeds_per_cell,
                                              std::string* split_note) {
  std::mt19937_64 rng(seed);
  const auto nets = bench_networks();
  const SizeClass classes[3] = {SizeClass::kSmall, SizeClass::kMedium, SizeClass::kLarge};
  std::vector<TransferProfile> train;
  std::map<int, std::vector<TransferProfile>> test;
  std::string note = fmt::format("split seed {}: per size class 7 training / 3 test profiles;", seed);
  for (int c = 0; c < 3; ++c) {
    std::vector<TransferProfile> all;
    for (int v = 0; v < 10; ++v)
      all.push_back({perturbed(nets[v % 3], rng, c * 10 + v),
                     scaled(bench_dataset(classes[c]), uniform(rng, 0.7, 1.4))});
    std::vector<std::size_t> order(all.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    note += fmt::format(" {} test ids", to_string(classes[c]));
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i < 7) {
        train.push_back(all[order[i]]);
      } else {
        test[c].push_back(all[order[i]]);
        note += fmt::format(" {}", order[i]);
      }
    }
    note += ";";
  }
  if (split_note) *split_note = note;

  std::vector<TransferLogEntry> corpus;
  CorpusOptions opt;
  opt.repeats = 2;
  opt.load_jitter = 0.05;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const SimScenario sc = level_scenario(train[i].network, band_levels(), seed + i);
    opt.start_time = 1.7e9 + 1e7 * static_cast<double>(i);
    auto part = generate_corpus(std::span<const SimScenario>(&sc, 1),
                                std::span<const DatasetProfile>(&train[i].dataset, 1),
                                LatticeCoverage{}, opt, seed * 31 + i);
    corpus.insert(corpus.end(), part.begin(), part.end());
  }
  LogBatch batch{"train", std::move(corpus)};
  KbConfig cfg;
  cfg.seed = seed;
  const KnowledgeBase kb = build_kb(std::span<const LogBatch>(&batch, 1), cfg);

  std::vector<MatrixCell> cells;
  for (int c = 0; c < 3; ++c)
    for (bool peak : {false, true}) {
      MatrixCell cell{classes[c], peak, 0.0, 0.0};
      for (std::size_t s = 0; s < seeds_per_cell; ++s) {
        const TransferProfile& prof = test[c][uniform_index(rng, test[c].size())];
        const double load = peak ? uniform(rng, 0.5, 0.7) : uniform(rng, 0.05, 0.2);
        const SimScenario sc = constant_scenario(prof.network, load, rng());
        const double best = oracle_optimum(prof.network, prof.dataset, load).value;
        const Transcript t = run_sampler(kb, prof, sc);
        cell.tuned_ratio += post_convergence_throughput(t) / best;

        SimBackend fixed(sc, prof.dataset);
        Transcript st;
        for (const auto& chunk : plan_chunks(prof.dataset)) {
          const ChunkResult res = fixed.transfer(chunk, kStaticParams);
          st.rows.push_back({chunk.index, kStaticParams, 0.0, res.achieved_mbps, res.elapsed_s,
                             "converged", 0, chunk.bytes});
        }
        cell.static_ratio += post_convergence_throughput(st) / best;
      }
      cell.tuned_ratio /= static_cast<double>(seeds_per_cell);
      cell.static_ratio /= static_cast<double>(seeds_per_cell);
      cells.push_back(cell);
    }
  return cells;
}

RetuneResult run_retune(const BandKb& kb, std::uint64_t seed, std::size_t runs) {
  std::mt19937_64 rng(seed);
  RetuneResult r;
  double ratio_sum = 0.0;
  for (std::size_t run = 0; run < runs; ++run, ++r.runs) {
    const TransferProfile& prof = kb.profiles[uniform_index(rng, kb.profiles.size())];
    const int b1 = static_cast<int>(uniform_index(rng, 8));
    const bool up = b1 + 2 <= 7 && (b1 - 2 < 0 || uniform_index(rng, 2) == 0);
    const int b2 = up ? b1 + 2 : b1 - 2;
    const double l1 = 0.1 * b1 + 0.1 * unit_double(rng);
    const double l2 = l1 + 0.1 * (b2 - b1);
    const std::uint64_t sim_seed = rng();

    // The step lands when chunk kRetuneStepChunk starts; a constant-load
    // run with the same seed is identical up to that point.
    const Transcript pre = run_sampler(kb.kb, prof, constant_scenario(prof.network, l1, sim_seed));
    if (pre.rows.size() <= kRetuneStepChunk + 3) continue;
    double t_step = 0.0;
    for (std::size_t i = 0; i < kRetuneStepChunk; ++i) t_step += pre.rows[i].elapsed_s;
    SimScenario sc = constant_scenario(prof.network, l1, sim_seed);
    sc.schedule.push_back({t_step, l2});
    const Transcript t = run_sampler(kb.kb, prof, sc);

    std::size_t retune_row = t.rows.size();
    for (std::size_t i = kRetuneStepChunk + 1; i < t.rows.size(); ++i)
      if (t.rows[i].event == "retune") {
        retune_row = i;
        break;
      }
    const bool fired = retune_row <= kRetuneStepChunk + 3 && retune_row < t.rows.size();
    if (!fired) continue;
    ++r.fired_in_window;
    std::vector<const TranscriptRow*> after;
    for (std::size_t i = retune_row; i < t.rows.size(); ++i) after.push_back(&t.rows[i]);
    const double ratio = bulk_rate(after) / oracle_optimum(prof.network, prof.dataset, l2).value;
    ratio_sum += ratio;
    if (ratio >= 0.9) ++r.recovered;
  }
  r.mean_ratio = r.fired_in_window ? ratio_sum / static_cast<double>(r.fired_in_window) : 0.0;
  return r;
}

std::vector<StalenessPoint> run_staleness(const BandKb& kb, std::uint64_t seed,
                                          const std::vector<int>& days, std::size_t scenarios,
                                          double drift_per_day) {
  std::vector<StalenessPoint> out;
  for (int day : days) {
    std::mt19937_64 rng(seed);  // same scenarios every day; only the load moves
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t s = 0; s < scenarios; ++s) {
      const TransferProfile& prof = kb.profiles[uniform_index(rng, kb.profiles.size())];
      const double base = 0.8 * unit_double(rng);
      const std::uint64_t sim_seed = rng();
      const double load = std::min(1.0, base + drift_per_day * day);
      const Transcript t = run_sampler(kb.kb, prof, constant_scenario(prof.network, load, sim_seed));
      if (!t.converged) continue;
      sum += post_convergence_accuracy(t);
      ++n;
    }
    out.push_back({day, n ? sum / static_cast<double>(n) : 0.0});
  }
  return out;
}

DeterminismResult run_determinism(std::uint64_t seed) {
  const auto nets = bench_networks();
  std::vector<SimScenario> scenarios;
  for (int i = 0; i < 2; ++i) scenarios.push_back(level_scenario(nets[i], {0.1, 0.4, 0.6}, seed + i));
  const DatasetProfile data = bench_dataset(SizeClass::kSmall);
  CorpusOptions opt;
  opt.repeats = 2;
  opt.load_jitter = 0.03;
  LogBatch batch{"det", generate_corpus(scenarios, std::span<const DatasetProfile>(&data, 1),
                                        LatticeCoverage{}, opt, seed)};
  KbConfig cfg;
  cfg.seed = seed;
  const KnowledgeBase a = build_kb(std::span<const LogBatch>(&batch, 1), cfg);
  const KnowledgeBase b = build_kb(std::span<const LogBatch>(&batch, 1), cfg);
  DeterminismResult r;
  const std::string sa = serialize_kb(a);
  r.kb_identical = sa == serialize_kb(b);

  const TransferProfile prof{nets[0], data};
  auto transcript_text = [&](const KnowledgeBase& kb) {
    std::ostringstream ss;
    write_transcript_csv(run_sampler(kb, prof, constant_scenario(nets[0], 0.35, seed)), ss);
    return ss.str();
  };
  r.transcripts_identical = transcript_text(a) == transcript_text(b);

  const KnowledgeBase c = deserialize_kb(sa);
  r.roundtrip_bytes_identical = serialize_kb(c) == sa;
  std::mt19937_64 rng(seed);
  bool same = true;
  for (int probe = 0; probe < 20 && same; ++probe) {
    NetworkProfile n = perturbed(nets[uniform_index(rng, 2)], rng, probe);
    const DatasetProfile d = scaled(data, uniform(rng, 0.5, 2.0));
    const QueryResult qa = query_kb(a, d, n), qc = query_kb(c, d, n);
    same = qa.cluster_id == qc.cluster_id && qa.load_tags == qc.load_tags &&
           qa.region == qc.region && qa.surfaces.size() == qc.surfaces.size();
    for (std::size_t k = 0; same && k < qa.surfaces.size(); ++k) {
      same = qa.surfaces[k].argmax->params == qc.surfaces[k].argmax->params &&
             qa.surfaces[k].argmax->value == qc.surfaces[k].argmax->value;
      for (int i = 0; same && i < 50; ++i) {
        const ParamTriple t{1 + int(uniform_index(rng, 16)), 1 + int(uniform_index(rng, 16)),
                            1 + int(uniform_index(rng, 32))};
        same = eval(qa.surfaces[k], t) == eval(qc.surfaces[k], t);
      }
    }
  }
  r.roundtrip_queries_identical = same;
  return r;
}

// --- report ---------------------------------------------------------------

std::vector<BenchRow> run_bench(const BenchConfig& config, std::string* header_note) {
  const std::uint64_t seed = config.seed;
  const std::size_t scale = config.quick ? 5 : 1;
  std::vector<BenchRow> rows;
  auto add = [&](std::string e, std::string c, std::string m, double v) {
    rows.push_back({std::move(e), std::move(c), std::move(m), v});
  };

  const auto sp = run_spline_suite(seed, 500 / scale, 100 / scale);
  add("spline", "all", "max_interpolation_rel", sp.max_interpolation_rel);
  add("spline", "all", "max_c2_jump_rel", sp.max_c2_jump_rel);
  add("spline", "all", "max_end_second_derivative", sp.max_end_second_derivative);
  add("spline", "all", "max_affine_deviation", sp.max_affine_deviation);

  const auto mo = run_model_ordering(seed, 50 / scale);
  add("model_ordering", "all", "ordered_fraction", double(mo.ordered) / double(mo.trials.size()));
  add("model_ordering", "all", "spline_accuracy", mo.mean_spline_accuracy);

  const auto mx = run_maxima_check(seed, 200 / scale, 100 / scale);
  add("maxima", "all", "argmax_agreement", double(mx.agreements) / double(mx.surfaces));
  add("maxima", "all", "max_gradient_rel", mx.max_gradient_rel);
  add("maxima", "all", "max_hessian_rel", mx.max_hessian_rel);

  for (std::size_t k : {3, 5}) {
    const auto cl = run_cluster_check(k, seed, 40 / scale);
    const std::string cell = fmt::format("k={}", k);
    add("clustering", cell, "recovered_fraction", double(cl.recovered) / double(cl.runs));
    add("clustering", cell, "strict_peak_fraction", double(cl.strict_peak) / double(cl.runs));
  }

  const BandKb band = build_band_kb(seed);
  const auto cv = run_convergence(band, seed, 100 / scale);
  add("convergence", "eta=8", "within_3_fraction", double(cv.converged_within_3) / double(cv.scenarios));
  add("convergence", "eta=8", "mean_samples", cv.mean_samples);
  add("convergence", "eta=8", "post_convergence_accuracy", cv.mean_accuracy);
  const auto cvm = run_convergence(band, seed, 100 / scale, SelectionRule::kMedian);
  add("convergence", "eta=8 median-rule", "within_3_fraction",
      double(cvm.converged_within_3) / double(cvm.scenarios));

  std::string split;
  for (const auto& cell : run_throughput_matrix(seed, config.seeds_per_cell, &split)) {
    const std::string name = fmt::format("{}/{}", to_string(cell.size_class), cell.peak ? "peak" : "off-peak");
    add("throughput", name, "tuned_ratio", cell.tuned_ratio);
    add("throughput", name, "static_ratio", cell.static_ratio);
  }
  if (header_note) *header_note = split;

  const auto rt = run_retune(band, seed, 50 / scale);
  add("retune", "2-band step", "fired_in_window_fraction", double(rt.fired_in_window) / double(rt.runs));
  add("retune", "2-band step", "recovered_fraction", double(rt.recovered) / double(rt.runs));
  add("retune", "2-band step", "mean_post_retune_ratio", rt.mean_ratio);

  for (const auto& pt : run_staleness(band, seed, {1, 5, 10}, 100 / scale))
    add("staleness", fmt::format("day {}", pt.day), "mean_accuracy", pt.mean_accuracy);

  const auto det = run_determinism(seed);
  add("determinism", "kb", "identical", det.kb_identical);
  add("determinism", "transcript", "identical", det.transcripts_identical);
  add("determinism", "roundtrip", "queries_identical", det.roundtrip_queries_identical);
  add("determinism", "roundtrip", "bytes_identical", det.roundtrip_bytes_identical);
  return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& header_note,
                     std::ostream& out) {
  if (!header_note.empty()) out << "# " << header_note << "\n";
  out << "experiment,cell,metric,value\n";
  for (const auto& r : rows)
    out << fmt::format("{},{},{},{}\n", r.experiment, r.cell, r.metric, format_double(r.value));
}

std::string render_report(const std::string& csv_text) {
  std::istringstream in(csv_text);
  std::string line;
  std::vector<std::string> notes;
  std::vector<std::array<std::string, 4>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      notes.push_back(line.substr(1));
      continue;
    }
    if (header) {
      header = false;
      if (line != "experiment,cell,metric,value")
        throw DataError("report", "unexpected CSV header: " + line);
      continue;
    }
    std::array<std::string, 4> f;
    std::istringstream ls(line);
    for (auto& x : f)
      if (!std::getline(ls, x, ',')) throw DataError("report", "short row: " + line);
    rows.push_back(f);
  }
  std::string out = "# Bench report\n\n";
  for (const auto& n : notes) out += "-" + n + "\n";
  if (!notes.empty()) out += "\n";
  std::string current;
  for (const auto& r : rows) {
    if (r[0] != current) {
      current = r[0];
      out += fmt::format("\n## {}\n\n| cell | metric | value |\n|---|---|---|\n", current);
    }
    out += fmt::format("| {} | {} | {} |\n", r[1], r[2], r[3]);
  }
  return out;
}

}  // namespace xfer
