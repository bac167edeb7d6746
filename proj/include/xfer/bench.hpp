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

// Experiment harness: the measurements behind the acceptance suite and the
// `bench` command, all driven by the simulator.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "xfer/knowledge_base.hpp"
#include "xfer/sampler.hpp"
#include "xfer/simulator.hpp"

namespace xfer {

enum class SizeClass { kSmall, kMedium, kLarge };
const char* to_string(SizeClass c);

/// Three wide-area paths whose bandwidth-delay product exceeds the TCP
/// buffer, so stream count matters.
std::vector<NetworkProfile> bench_networks();

/// 10 GiB of 1 MiB files, 20 GiB of 64 MiB files, 40 GiB of 1 GiB files.
DatasetProfile bench_dataset(SizeClass c);

struct TransferProfile {
  NetworkProfile network;
  DatasetProfile dataset;
};

/// Mean over post-convergence chunks of 100 - relative error %.
double post_convergence_accuracy(const Transcript& t);

/// Bulk rate of the post-convergence chunks: bytes over moving time.
double post_convergence_throughput(const Transcript& t);

// --- spline correctness ---------------------------------------------------

struct SplineSuiteResult {
  std::size_t splines = 0;
  std::size_t surfaces = 0;
  double max_interpolation_rel = 0.0;
  double max_c2_jump_rel = 0.0;
  double max_end_second_derivative = 0.0;
  double max_affine_deviation = 0.0;
};

SplineSuiteResult run_spline_suite(std::uint64_t seed, std::size_t splines = 500,
                                   std::size_t surfaces = 100);

// --- model ordering -------------------------------------------------------

struct ModelOrderingTrial {
  double rmse_spline = 0.0;
  double rmse_cubic = 0.0;
  double rmse_quadratic = 0.0;
  double spline_accuracy = 0.0;  ///< 100 - MAPE on held-out points
};

struct ModelOrderingResult {
  std::vector<ModelOrderingTrial> trials;
  std::size_t ordered = 0;  ///< trials with spline < cubic < quadratic
  double mean_spline_accuracy = 0.0;
};

ModelOrderingResult run_model_ordering(std::uint64_t seed, std::size_t trials = 50);

// --- maxima ---------------------------------------------------------------

struct MaximaCheckResult {
  std::size_t surfaces = 0;
  std::size_t agreements = 0;
  std::size_t derivative_points = 0;
  double max_gradient_rel = 0.0;
  double max_hessian_rel = 0.0;
};

/// A random smooth surface fitted on a random sub-grid of the lattice.
ThroughputSurface random_smooth_surface(std::mt19937_64& rng);

MaximaCheckResult run_maxima_check(std::uint64_t seed, std::size_t surfaces = 200,
                                   std::size_t derivative_points = 100);

// --- clustering -----------------------------------------------------------

struct ClusterCheckResult {
  std::size_t k_true = 0;
  std::size_t runs = 0;
  std::size_t recovered = 0;   ///< select_k returned k_true
  std::size_t strict_peak = 0; ///< recovered and CH(k) > CH(k - 1), CH(k + 1)
};

/// Gaussian blobs in feature space with well-separated centres.
std::vector<FeatureVector> blob_corpus(std::size_t k, std::size_t per_blob, double sigma,
                                       std::mt19937_64& rng, std::vector<std::size_t>* labels = nullptr);

ClusterCheckResult run_cluster_check(std::size_t k_true, std::uint64_t seed, std::size_t runs = 40);

// --- online experiments -----------------------------------------------------

/// Nine profiles (three paths x three size classes) logged at eight external
/// loads 0.05, 0.15, ..., 0.75 with loads jittered across each band.
struct BandKb {
  KnowledgeBase kb;
  std::vector<TransferProfile> profiles;
};

BandKb build_band_kb(std::uint64_t seed);

struct ConvergenceResult {
  std::size_t scenarios = 0;
  std::size_t converged_within_3 = 0;  ///< confidence hit, not pinned, <= 3 samples
  std::size_t pinned = 0;
  double mean_samples = 0.0;
  double mean_accuracy = 0.0;
};

ConvergenceResult run_convergence(const BandKb& kb, std::uint64_t seed, std::size_t scenarios = 100,
                                  SelectionRule rule = SelectionRule::kClosest);

struct MatrixCell {
  SizeClass size_class = SizeClass::kSmall;
  bool peak = false;
  double tuned_ratio = 0.0;   ///< achieved / oracle, mean over seeds
  double static_ratio = 0.0;  ///< fixed mid-lattice parameters
};

inline constexpr ParamTriple kStaticParams{8, 8, 16};

/// 70/30 stratified split of 30 profiles per run; recorded in `split_note`.
std::vector<MatrixCell> run_throughput_matrix(std::uint64_t seed, std::size_t seeds_per_cell = 10,
                                              std::string* split_note = nullptr);

struct RetuneResult {
  std::size_t runs = 0;
  std::size_t fired_in_window = 0;
  std::size_t recovered = 0;  ///< fired in window and post-retune ratio >= 0.9
  double mean_ratio = 0.0;
};

RetuneResult run_retune(const BandKb& kb, std::uint64_t seed, std::size_t runs = 50);

struct StalenessPoint {
  int day = 0;
  double mean_accuracy = 0.0;
};

/// External load grows by `drift_per_day` per day after the logs were taken.
std::vector<StalenessPoint> run_staleness(const BandKb& kb, std::uint64_t seed,
                                          const std::vector<int>& days = {1, 5, 10},
                                          std::size_t scenarios = 100, double drift_per_day = 0.01);

struct DeterminismResult {
  bool kb_identical = false;
  bool transcripts_identical = false;
  bool roundtrip_queries_identical = false;
  bool roundtrip_bytes_identical = false;
};

DeterminismResult run_determinism(std::uint64_t seed);

// --- report ---------------------------------------------------------------

struct BenchRow {
  std::string experiment;
  std::string cell;
  std::string metric;
  double value = 0.0;
};

struct BenchConfig {
  std::uint64_t seed = 2026;
  std::size_t seeds_per_cell = 10;
  bool quick = false;  ///< smaller trial counts, for smoke runs
};

std::vector<BenchRow> run_bench(const BenchConfig& config, std::string* header_note = nullptr);
void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& header_note,
                     std::ostream& out);

/// Renders bench CSV text as a Markdown table grouped by experiment.
std::string render_report(const std::string& csv_text);

}  // namespace xfer
