#pragma once

#include "afc/loop.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace afc {

/// Metrics and metadata of one run, one CSV row.
struct MetricsReport {
  std::size_t ordinal = 0;
  std::string speech_id;
  std::string speaker;
  std::string ir_id;
  std::string variant;
  double gain_db = 0.0;
  bool vibrato = false;
  bool distortion = false;
  bool edo = false;
  bool prediction = false;
  std::string status = "ok";  // ok | failed
  std::string error;
  std::optional<double> sd5_db;
  std::optional<double> sd20plus_db;
  double overflow_pct = 0.0;
  std::size_t overflow_count = 0;
  std::size_t total_samples = 0;
  std::size_t blocks = 0;
  std::vector<double> sd_trace;  // linear; not part of the CSV row

  bool operator==(const MetricsReport&) const = default;
};

MetricsReport make_report(const MatrixRow& row);

/// Column names of the metrics CSV, in order.
const std::vector<std::string>& report_columns();

void write_report_csv(const std::vector<MetricsReport>& rows, const std::filesystem::path& path);

/// Parses a CSV written by write_report_csv (traces are left empty).
std::vector<MetricsReport> read_report_csv(const std::filesystem::path& path);

/// block,time_s,sd_db with one line per block.
void write_trace_csv(const std::vector<double>& sd_trace, double sample_rate, int hop,
                     const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  std::vector<double> sd_trace;
};

/// Line plot of sd traces in dB over time.
void write_sd_svg(const std::vector<PlotSeries>& series, double sample_rate, int hop,
                  const std::string& title, const std::filesystem::path& path);

struct ExportOptions {
  bool traces = true;
  bool plots = true;
  bool audio_pairs = true;
  double pesq_begin_s = 20.0;  // reference/degraded excerpt start (clamped to the signal)
};

/// Writes <dir>/metrics.csv, <dir>/aggregate.csv, traces/run_NNNN.csv,
/// plots/gain_<g>.svg, pesq/run_NNNN_{ref,deg}.wav and pesq/manifest.txt.
void export_report(const MatrixResult& result, const std::filesystem::path& dir,
                   const ExportOptions& options = {});

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace afc
