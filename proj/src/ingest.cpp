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

#include "xfer/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "xfer/error.hpp"

namespace xfer {
namespace {

using nlohmann::json;

constexpr std::array<const char*, 17> kFields = {
    "ts",          "src",       "dst",       "bw_mbps",         "rtt_ms",
    "tcp_buf_bytes", "disk_read_mbs", "disk_write_mbs", "avg_file_bytes", "num_files",
    "total_bytes", "cc",        "p",         "pp",              "throughput_mbps",
    "contending_out_mbps", "contending_streams"};

// Uniform field access over a JSON object or a CSV row.
class FieldSource {
 public:
  virtual ~FieldSource() = default;
  virtual std::optional<double> number(const char* name) const = 0;
  virtual std::optional<std::string> text(const char* name) const = 0;
};

class JsonFields final : public FieldSource {
 public:
  explicit JsonFields(const json& obj) : obj_(obj) {}
  std::optional<double> number(const char* name) const override {
    const auto it = obj_.find(name);
    if (it == obj_.end()) return std::nullopt;
    if (!it->is_number()) throw DataError(name, "expected a number");
    return it->get<double>();
  }
  std::optional<std::string> text(const char* name) const override {
    const auto it = obj_.find(name);
    if (it == obj_.end()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
    throw DataError(name, "expected a string");
  }

 private:
  const json& obj_;
};

class CsvFields final : public FieldSource {
 public:
  CsvFields(const std::map<std::string, std::size_t>& columns, const std::vector<std::string>& cells)
      : columns_(columns), cells_(cells) {}
  std::optional<double> number(const char* name) const override {
    const auto cell = raw(name);
    if (!cell) return std::nullopt;
    const char* begin = cell->c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') throw DataError(name, "expected a number");
    return v;
  }
  std::optional<std::string> text(const char* name) const override { return raw(name); }

 private:
  std::optional<std::string> raw(const char* name) const {
    const auto it = columns_.find(name);
    if (it == columns_.end() || it->second >= cells_.size()) return std::nullopt;
    return cells_[it->second];
  }
  const std::map<std::string, std::size_t>& columns_;
  const std::vector<std::string>& cells_;
};

double need_number(const FieldSource& src, const char* name) {
  const auto v = src.number(name);
  if (!v) throw DataError(name, "missing required field");
  return *v;
}

long long need_integer(const FieldSource& src, const char* name) {
  const double v = need_number(src, name);
  if (!std::isfinite(v) || std::floor(v) != v) throw DataError(name, "expected an integer");
  return static_cast<long long>(v);
}

std::string need_text(const FieldSource& src, const char* name) {
  auto v = src.text(name);
  if (!v) throw DataError(name, "missing required field");
  return *v;
}

TransferLogEntry read_entry(const FieldSource& src, const LatticeBounds& bounds) {
  TransferLogEntry e;
  e.timestamp = need_number(src, "ts");
  e.network.source_id = need_text(src, "src");
  e.network.dest_id = need_text(src, "dst");
  e.network.bandwidth_mbps = need_number(src, "bw_mbps");
  e.network.rtt_ms = need_number(src, "rtt_ms");
  e.network.tcp_buffer_bytes = need_number(src, "tcp_buf_bytes");
  e.network.disk_read_mbs = need_number(src, "disk_read_mbs");
  e.network.disk_write_mbs = need_number(src, "disk_write_mbs");
  e.dataset.avg_file_bytes = need_number(src, "avg_file_bytes");
  const long long files = need_integer(src, "num_files");
  if (files < 1) throw DataError("num_files", "must be >= 1");
  e.dataset.num_files = static_cast<std::uint64_t>(files);
  const long long total = need_integer(src, "total_bytes");
  if (total < 0) throw DataError("total_bytes", "must be >= 0");
  e.dataset.total_bytes = static_cast<std::uint64_t>(total);
  e.params.cc = static_cast<int>(need_integer(src, "cc"));
  e.params.p = static_cast<int>(need_integer(src, "p"));
  e.params.pp = static_cast<int>(need_integer(src, "pp"));
  e.throughput_mbps = need_number(src, "throughput_mbps");
  e.contending_out_mbps = need_number(src, "contending_out_mbps");
  e.contending_streams = static_cast<int>(need_integer(src, "contending_streams"));
  validate(e, bounds);
  return e;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == ',' && !quoted) {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

LogFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? LogFormat::kCsv : LogFormat::kJsonl;
}

std::span<const char* const> log_field_names() { return kFields; }

ParseResult parse_log(const std::filesystem::path& path, LogFormat format,
                      const LatticeBounds& bounds) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open log file: " + path.string());
  auto result = parse_log(in, format, bounds);
  if (in.bad()) throw IoError("read failure: " + path.string());
  return result;
}

ParseResult parse_log(std::istream& in, LogFormat format, const LatticeBounds& bounds) {
  ParseResult out;
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> columns;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    if (format == LogFormat::kCsv && !have_header) {
      const auto names = split_csv(line);
      for (std::size_t i = 0; i < names.size(); ++i) columns[names[i]] = i;
      have_header = true;
      continue;
    }
    try {
      if (format == LogFormat::kJsonl) {
        json obj;
        try {
          obj = json::parse(line);
        } catch (const json::parse_error& e) {
          throw DataError("<record>", std::string("malformed JSON: ") + e.what());
        }
        if (!obj.is_object()) throw DataError("<record>", "expected a JSON object");
        out.entries.push_back(read_entry(JsonFields(obj), bounds));
      } else {
        const auto cells = split_csv(line);
        out.entries.push_back(read_entry(CsvFields(columns, cells), bounds));
      }
    } catch (const DataError& e) {
      out.rejections.push_back({lineno, e.field(), e.what()});
    }
  }
  return out;
}

std::string to_json_line(const TransferLogEntry& e) {
  // Fixed field order keeps the output diffable.
  return fmt::format(
      "{{\"ts\":{},\"src\":{},\"dst\":{},\"bw_mbps\":{},\"rtt_ms\":{},\"tcp_buf_bytes\":{},"
      "\"disk_read_mbs\":{},\"disk_write_mbs\":{},\"avg_file_bytes\":{},\"num_files\":{},"
      "\"total_bytes\":{},\"cc\":{},\"p\":{},\"pp\":{},\"throughput_mbps\":{},"
      "\"contending_out_mbps\":{},\"contending_streams\":{}}}",
      num(e.timestamp), json(e.network.source_id).dump(), json(e.network.dest_id).dump(),
      num(e.network.bandwidth_mbps), num(e.network.rtt_ms), num(e.network.tcp_buffer_bytes),
      num(e.network.disk_read_mbs), num(e.network.disk_write_mbs), num(e.dataset.avg_file_bytes),
      e.dataset.num_files, e.dataset.total_bytes, e.params.cc, e.params.p, e.params.pp,
      num(e.throughput_mbps), num(e.contending_out_mbps), e.contending_streams);
}

void write_log_jsonl(std::span<const TransferLogEntry> entries, std::ostream& out) {
  for (const auto& e : entries) out << to_json_line(e) << '\n';
}

void write_log_csv(std::span<const TransferLogEntry> entries, std::ostream& out) {
  for (std::size_t i = 0; i < kFields.size(); ++i) out << (i ? "," : "") << kFields[i];
  out << '\n';
  for (const auto& e : entries) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", num(e.timestamp),
                       e.network.source_id, e.network.dest_id, num(e.network.bandwidth_mbps),
                       num(e.network.rtt_ms), num(e.network.tcp_buffer_bytes),
                       num(e.network.disk_read_mbs), num(e.network.disk_write_mbs),
                       num(e.dataset.avg_file_bytes), e.dataset.num_files, e.dataset.total_bytes,
                       e.params.cc, e.params.p, e.params.pp, num(e.throughput_mbps),
                       num(e.contending_out_mbps), e.contending_streams);
  }
}

LoadIntensity load_intensity(const TransferLogEntry& e) {
  const double bw = e.network.bandwidth_mbps;
  return LoadIntensity((bw - e.contending_out_mbps) / bw);
}

TimeWindow active_window(const TransferLogEntry& e) {
  double duration = 0.0;
  if (e.throughput_mbps > 0.0)
    duration = static_cast<double>(e.dataset.total_bytes) * kBitsPerByte / (e.throughput_mbps * 1e6);
  return {e.timestamp, e.timestamp + duration};
}

double aggregate_contending(std::span<const TransferLogEntry> entries, TimeWindow window) {
  double total = 0.0;
  for (const auto& e : entries) {
    const TimeWindow w = active_window(e);
    if (w.begin <= window.end && w.end >= window.begin) total += e.throughput_mbps;
  }
  return total;
}

double contending_throughput(const TransferLogEntry& reference,
                             std::span<const TransferLogEntry> log) {
  std::vector<TransferLogEntry> peers;
  for (const auto& e : log) {
    if (&e == &reference) continue;
    const bool shares = e.network.source_id == reference.network.source_id ||
                        e.network.dest_id == reference.network.dest_id;
    if (shares) peers.push_back(e);
  }
  return aggregate_contending(peers, active_window(reference));
}

FeatureKey feature_key(const TransferLogEntry& e) {
  return {std::llround(e.network.bandwidth_mbps), std::llround(e.network.rtt_ms * 1000.0),
          std::llround(e.network.tcp_buffer_bytes), std::llround(e.dataset.avg_file_bytes),
          static_cast<long long>(e.dataset.num_files)};
}

GaussianFit fit_gaussian(std::span<const double> samples) {
  if (samples.empty()) return {};
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double n = static_cast<double>(samples.size());
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : samples) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / n)};
}

std::vector<ObservationGroup> group_observations(std::span<const TransferLogEntry> entries) {
  std::map<std::pair<FeatureKey, ParamTriple>, ObservationGroup> groups;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    auto& g = groups[{feature_key(e), e.params}];
    g.features = feature_key(e);
    g.params = e.params;
    g.samples.push_back(e.throughput_mbps);
    g.members.push_back(i);
  }
  std::vector<ObservationGroup> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) {
    const auto fit = fit_gaussian(g.samples);
    g.mean = fit.mean;
    g.stddev = fit.stddev;
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace xfer
