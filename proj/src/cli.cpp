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

#include "xfer/cli.hpp"

#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "xfer/bench.hpp"
#include "xfer/error.hpp"
#include "xfer/ingest.hpp"
#include "xfer/io.hpp"
#include "xfer/knowledge_base.hpp"
#include "xfer/sampler.hpp"
#include "xfer/simulator.hpp"

namespace xfer {
namespace {

using Json = nlohmann::ordered_json;

std::vector<LogBatch> read_batches(const std::vector<std::string>& paths, std::ostream& err) {
  std::vector<LogBatch> batches;
  for (const auto& path : paths) {
    ParseResult r = parse_log(path, format_for_path(path));
    for (const auto& rej : r.rejections)
      err << fmt::format("{}:{}: rejected ({}): {}\n", path, rej.line, rej.field, rej.reason);
    batches.push_back({std::filesystem::path(path).filename().string(), std::move(r.entries)});
  }
  return batches;
}

Json triple_json(const ParamTriple& t) { return Json::array({t.cc, t.p, t.pp}); }

Json query_json(const QueryResult& q) {
  Json surfaces = Json::array();
  for (std::size_t i = 0; i < q.surfaces.size(); ++i) {
    const auto& s = q.surfaces[i];
    Json a = nullptr;
    if (s.argmax) a = Json{{"params", triple_json(s.argmax->params)}, {"value", s.argmax->value}};
    surfaces.push_back({{"load_tag", q.load_tags[i]},
                        {"kind", s.kind == SurfaceKind::kSpline ? "spline" : "regression"},
                        {"low_confidence", s.low_confidence},
                        {"argmax", a}});
  }
  Json maxima = Json::array();
  for (const auto& b : q.region.maxima)
    maxima.push_back({{"center", triple_json(b.center)}, {"radius", b.radius}});
  Json sep = Json::array();
  for (const auto& p : q.region.separation)
    sep.push_back({{"point", triple_json(p.point)}, {"score", p.score}});
  return Json{{"cluster_id", q.cluster_id},
              {"distance", q.distance},
              {"surfaces", surfaces},
              {"region", {{"maxima", maxima}, {"separation", sep}}}};
}

std::vector<LoadStep> parse_schedule(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DataError("schedule", e.what());
  }
  if (j.is_number()) return {{0.0, j.get<double>()}};
  if (!j.is_array()) throw DataError("schedule", "expected a number or [[t, i_ext], ...]");
  std::vector<LoadStep> steps;
  for (const auto& s : j) {
    if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number())
      throw DataError("schedule", "expected [t, i_ext] pairs");
    steps.push_back({s[0].get<double>(), s[1].get<double>()});
  }
  return steps;
}

}  // namespace

int run_command(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transfer parameter tuner", "xfer-tune"};
  app.require_subcommand(1);

  std::vector<std::string> logs;
  std::string out_path, kb_path, profile_path, dataset_path, scenario_path, load_path, in_path;
  std::uint64_t seed = 1;
  std::size_t repeats = 3;
  double jitter = 0.0, noise = 0.05;
  bool quick = false;
  std::size_t seeds_per_cell = 10;
  std::string backend = "sim";

  auto* ingest = app.add_subcommand("ingest", "Parse logs and report rejected records");
  ingest->add_option("--logs", logs, "Log files (.jsonl or .csv)")->required();
  ingest->add_option("--out", out_path, "Write accepted entries as JSONL");

  auto* simgen = app.add_subcommand("simgen", "Generate a simulated log corpus");
  simgen->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  simgen->add_option("--dataset", dataset_path, "Dataset JSON (default 10 GiB of 1 MiB files)");
  simgen->add_option("--repeats", repeats, "Observations per lattice point and load level");
  simgen->add_option("--jitter", jitter, "Load jitter around each level");
  simgen->add_option("--seed", seed, "Noise seed");
  simgen->add_option("--out", out_path, "Output log (.jsonl or .csv)")->required();

  auto* analyze = app.add_subcommand("analyze", "Build a knowledge base from logs");
  analyze->add_option("--logs", logs, "Log files")->required();
  analyze->add_option("--out", out_path, "Knowledge base JSON")->required();
  analyze->add_option("--seed", seed, "Clustering seed");

  auto* update = app.add_subcommand("update", "Add log batches to a knowledge base");
  update->add_option("--kb", kb_path, "Knowledge base JSON")->required();
  update->add_option("--logs", logs, "Log files")->required();
  update->add_option("--out", out_path, "Output path (default: rewrite --kb)");
  update->add_option("--seed", seed, "Clustering seed");

  auto* query = app.add_subcommand("query", "Look up the surfaces for a transfer profile");
  query->add_option("--kb", kb_path, "Knowledge base JSON")->required();
  query->add_option("--profile", profile_path, "Network JSON, may also carry dataset fields")->required();
  query->add_option("--dataset", dataset_path, "Dataset JSON (default: read from --profile)");

  auto* transfer = app.add_subcommand("transfer", "Run a tuned transfer");
  transfer->add_option("--kb", kb_path, "Knowledge base JSON")->required();
  transfer->add_option("--profile", profile_path, "Network JSON")->required();
  transfer->add_option("--dataset", dataset_path, "Dataset JSON")->required();
  transfer->add_option("--backend", backend, "Transfer backend")->check(CLI::IsMember({"sim"}));
  transfer->add_option("--sim-seed", seed, "Simulator noise seed");
  transfer->add_option("--sim-load", load_path, "Load schedule JSON: number or [[t, i_ext], ...]")->required();
  transfer->add_option("--sim-noise", noise, "Relative noise of the simulator");
  transfer->add_option("--out", out_path, "Transcript CSV")->required();

  auto* bench = app.add_subcommand("bench", "Run the simulated experiment suite");
  bench->add_option("--out", out_path, "Result CSV")->required();
  bench->add_option("--seed", seed, "Master seed")->default_val(2026);
  bench->add_option("--seeds-per-cell", seeds_per_cell, "Runs per throughput matrix cell");
  bench->add_flag("--quick", quick, "Reduced trial counts");

  auto* report = app.add_subcommand("report", "Render a bench CSV as Markdown");
  report->add_option("--in", in_path, "Bench CSV")->required();
  report->add_option("--out", out_path, "Markdown output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    if (*ingest) {
      std::vector<TransferLogEntry> all;
      for (const auto& path : logs) {
        const ParseResult r = parse_log(path, format_for_path(path));
        for (const auto& rej : r.rejections)
          err << fmt::format("{}:{}: rejected ({}): {}\n", path, rej.line, rej.field, rej.reason);
        out << fmt::format("{}: {} accepted, {} rejected\n", path, r.entries.size(), r.rejections.size());
        all.insert(all.end(), r.entries.begin(), r.entries.end());
      }
      if (!out_path.empty()) {
        std::ostringstream ss;
        write_log_jsonl(all, ss);
        write_file_atomic(out_path, ss.str());
      }
    } else if (*simgen) {
      const SimScenario sc = parse_scenario(read_file(scenario_path));
      const DatasetProfile data =
          dataset_path.empty() ? bench_dataset(SizeClass::kSmall) : parse_dataset(read_file(dataset_path));
      CorpusOptions opt;
      opt.repeats = repeats;
      opt.load_jitter = jitter;
      const auto entries = generate_corpus(std::span<const SimScenario>(&sc, 1),
                                           std::span<const DatasetProfile>(&data, 1), LatticeCoverage{},
                                           opt, seed);
      std::ostringstream ss;
      if (format_for_path(out_path) == LogFormat::kCsv)
        write_log_csv(entries, ss);
      else
        write_log_jsonl(entries, ss);
      write_file_atomic(out_path, ss.str());
      out << fmt::format("{} entries written to {}\n", entries.size(), out_path);
    } else if (*analyze) {
      const auto batches = read_batches(logs, err);
      KbConfig cfg;
      cfg.seed = seed;
      const KnowledgeBase kb = build_kb(batches, cfg);
      save_kb(kb, out_path);
      out << fmt::format("{} clusters written to {}\n", kb.clusters.size(), out_path);
    } else if (*update) {
      KnowledgeBase kb = load_kb(kb_path);
      KbConfig cfg;
      cfg.seed = seed;
      for (const auto& batch : read_batches(logs, err)) {
        UpdateSummary s;
        kb = update_kb(kb, batch, cfg, &s);
        out << fmt::format("{}: {} clusters touched, {} new{}\n", batch.id, s.touched_clusters.size(),
                           s.new_clusters.size(), s.reclustered ? ", re-clustered" : "");
      }
      save_kb(kb, out_path.empty() ? kb_path : out_path);
    } else if (*query) {
      const KnowledgeBase kb = load_kb(kb_path);
      const std::string profile = read_file(profile_path);
      const DatasetProfile data = parse_dataset(dataset_path.empty() ? profile : read_file(dataset_path));
      out << query_json(query_kb(kb, data, parse_network(profile))).dump(1) << "\n";
    } else if (*transfer) {
      const KnowledgeBase kb = load_kb(kb_path);
      const TransferProfile prof{parse_network(read_file(profile_path)), parse_dataset(read_file(dataset_path))};
      SimScenario sc;
      sc.network = prof.network;
      sc.schedule = parse_schedule(read_file(load_path));
      sc.noise = noise;
      sc.seed = seed;
      validate(sc);
      const QueryResult q = query_kb(kb, prof.dataset, prof.network);
      SimBackend sim(sc, prof.dataset);
      const Transcript t = adaptive_sampling(q.surfaces, q.region, prof.dataset, sim, SamplerConfig{});
      std::ostringstream ss;
      write_transcript_csv(t, ss);
      write_file_atomic(out_path, ss.str());
      out << fmt::format("{} chunks, {} samples, {} retunes{}\n", t.rows.size(), t.sample_transfers,
                         t.retunes, t.aborted ? ", aborted: " + t.abort_reason : "");
      if (t.aborted) return 2;
    } else if (*bench) {
      BenchConfig cfg;
      cfg.seed = seed;
      cfg.seeds_per_cell = seeds_per_cell;
      cfg.quick = quick;
      std::string note;
      const auto rows = run_bench(cfg, &note);
      std::ostringstream ss;
      write_bench_csv(rows, note, ss);
      write_file_atomic(out_path, ss.str());
      out << fmt::format("{} rows written to {}\n", rows.size(), out_path);
    } else if (*report) {
      const std::string md = render_report(read_file(in_path));
      if (out_path.empty())
        out << md;
      else
        write_file_atomic(out_path, md);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace xfer
