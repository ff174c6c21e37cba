#include "afc/report.hpp"

#include "afc/errors.hpp"
#include "afc/metrics.hpp"
#include "afc/wav.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace afc {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string csv_field(const std::string& v) {
  if (v.find_first_of(",\"\r\n") == std::string::npos) return v;
  std::string q = "\"";
  for (char c : v) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string opt_field(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

// RFC-4180 record splitter over the whole text; quoted fields may span lines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        rec.push_back(std::move(field));
        records.push_back(std::move(rec));
      }
      rec.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  return records;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw IoError("bad number '" + s + "' in report");
  }
  return v;
}

std::size_t parse_size(const std::string& s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw IoError("bad integer '" + s + "' in report");
  return v;
}

std::string run_name(std::size_t ordinal) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%04zu", ordinal);
  return buf;
}

}  // namespace

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

MetricsReport make_report(const MatrixRow& row) {
  MetricsReport r;
  r.ordinal = row.ordinal;
  r.speech_id = row.speech_id;
  r.speaker = row.speaker;
  r.ir_id = row.ir_id;
  r.variant = row.variant;
  r.gain_db = row.gain_db;
  r.status = row.failed() ? "failed" : "ok";
  r.error = row.error;
  r.sd5_db = row.sd.sd5_db;
  r.sd20plus_db = row.sd.sd20plus_db;
  if (row.result) {
    const RunResult& run = *row.result;
    r.vibrato = run.decorrelation.vibrato.enabled;
    r.distortion = run.decorrelation.distortion.enabled;
    r.edo = run.decorrelation.edo.enabled;
    r.prediction = run.decorrelation.prediction.enabled;
    r.overflow_pct = run.overflow_pct();
    r.overflow_count = run.overflow_count;
    r.total_samples = run.total_samples;
    r.blocks = run.sd_trace.size();
    r.sd_trace = run.sd_trace;
  }
  return r;
}

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "ordinal", "speech",     "speaker",     "ir",           "variant",        "gain_db",
      "vibrato", "distortion", "edo",         "prediction",   "status",         "sd5_db",
      "sd20plus_db", "overflow_pct", "overflow_count", "total_samples", "blocks", "error"};
  return cols;
}

void write_report_csv(const std::vector<MetricsReport>& rows, const fs::path& path) {
  std::ofstream out = open_out(path);
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  for (const auto& r : rows) {
    out << r.ordinal << ',' << csv_field(r.speech_id) << ',' << csv_field(r.speaker) << ','
        << csv_field(r.ir_id) << ',' << csv_field(r.variant) << ',' << format_double(r.gain_db)
        << ',' << int(r.vibrato) << ',' << int(r.distortion) << ',' << int(r.edo) << ','
        << int(r.prediction) << ',' << r.status << ',' << opt_field(r.sd5_db) << ','
        << opt_field(r.sd20plus_db) << ',' << format_double(r.overflow_pct) << ','
        << r.overflow_count << ',' << r.total_samples << ',' << r.blocks << ','
        << csv_field(r.error) << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<MetricsReport> read_report_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto records = parse_csv(ss.str());
  if (records.empty() || records.front() != report_columns()) {
    throw IoError(path.string() + ": unexpected header");
  }
  std::vector<MetricsReport> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != report_columns().size()) {
      throw IoError(path.string() + ": record " + std::to_string(i) + " has " +
                    std::to_string(f.size()) + " fields");
    }
    MetricsReport r;
    r.ordinal = parse_size(f[0]);
    r.speech_id = f[1];
    r.speaker = f[2];
    r.ir_id = f[3];
    r.variant = f[4];
    r.gain_db = parse_double(f[5]);
    r.vibrato = f[6] == "1";
    r.distortion = f[7] == "1";
    r.edo = f[8] == "1";
    r.prediction = f[9] == "1";
    r.status = f[10];
    if (!f[11].empty()) r.sd5_db = parse_double(f[11]);
    if (!f[12].empty()) r.sd20plus_db = parse_double(f[12]);
    r.overflow_pct = parse_double(f[13]);
    r.overflow_count = parse_size(f[14]);
    r.total_samples = parse_size(f[15]);
    r.blocks = parse_size(f[16]);
    r.error = f[17];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_trace_csv(const std::vector<double>& sd_trace, double sample_rate, int hop,
                     const fs::path& path) {
  std::ofstream out = open_out(path);
  out << "block,time_s,sd_db\n";
  for (std::size_t l = 0; l < sd_trace.size(); ++l) {
    out << l << ',' << format_double(block_center_time(l, sample_rate, hop)) << ','
        << format_double(to_db(sd_trace[l])) << "\n";
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_sd_svg(const std::vector<PlotSeries>& series, double sample_rate, int hop,
                  const std::string& title, const fs::path& path) {
  constexpr double width = 800, height = 400, left = 60, right = 20, top = 40, bottom = 50;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};

  std::size_t longest = 1;
  double lowest = 0.0;
  for (const auto& s : series) {
    longest = std::max(longest, s.sd_trace.size());
    for (double v : s.sd_trace) {
      if (v > 0.0) lowest = std::min(lowest, to_db(v));
    }
  }
  const double y_max = 10.0;
  const double y_min = std::max(-80.0, 10.0 * std::floor(lowest / 10.0));
  const double t_max = block_center_time(longest - 1, sample_rate, hop);
  auto px = [&](double t) { return left + (width - left - right) * t / std::max(t_max, 1e-9); };
  auto py = [&](double db) {
    db = std::clamp(db, y_min, y_max);
    return top + (height - top - bottom) * (y_max - db) / (y_max - y_min);
  };

  std::ofstream out = open_out(path);
  char buf[128];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\">" << title << "</text>\n";
  for (double db = y_min; db <= y_max + 1e-9; db += 10.0) {
    std::snprintf(buf, sizeof buf, "%.1f", py(db));
    out << "<line x1=\"" << left << "\" x2=\"" << width - right << "\" y1=\"" << buf << "\" y2=\""
        << buf << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << buf << "\" text-anchor=\"end\">" << db
        << "</text>\n";
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">time / s</text>\n";
  out << "<text x=\"14\" y=\"" << height / 2 << "\" transform=\"rotate(-90 14 " << height / 2
      << ")\" text-anchor=\"middle\">sd / dB</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = palette[i % (sizeof palette / sizeof palette[0])];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t l = 0; l < series[i].sd_trace.size(); ++l) {
      const double v = series[i].sd_trace[l];
      const double db = v > 0.0 ? to_db(v) : y_min;
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", px(block_center_time(l, sample_rate, hop)), py(db));
      out << buf;
    }
    out << "\"/>\n";
    std::snprintf(buf, sizeof buf, "%.1f", top + 14.0 * static_cast<double>(i) + 10.0);
    out << "<text x=\"" << width - right - 4 << "\" y=\"" << buf << "\" text-anchor=\"end\" fill=\""
        << color << "\">" << series[i].label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed for " + path.string());
}

void export_report(const MatrixResult& result, const fs::path& dir, const ExportOptions& options) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  std::vector<MetricsReport> reports;
  reports.reserve(result.rows.size());
  for (const auto& row : result.rows) reports.push_back(make_report(row));
  write_report_csv(reports, dir / "metrics.csv");

  {
    std::ofstream agg = open_out(dir / "aggregate.csv");
    agg << "variant,gain_db,speaker,count,sd5_db,sd20plus_db,overflow_pct\n";
    for (const auto& a : result.aggregates) {
      agg << csv_field(a.variant) << ',' << format_double(a.gain_db) << ',' << csv_field(a.speaker)
          << ',' << a.count << ',' << opt_field(a.sd5_db) << ',' << opt_field(a.sd20plus_db) << ','
          << format_double(a.overflow_pct) << "\n";
    }
  }

  std::map<double, std::vector<PlotSeries>> groups;
  std::ofstream manifest;
  if (options.audio_pairs) manifest = open_out(dir / "pesq" / "manifest.txt");

  for (const auto& row : result.rows) {
    if (!row.result) continue;
    const RunResult& run = *row.result;
    const double fs_hz = run.mdf.sample_rate;
    const int hop = run.mdf.hop();
    const std::string name = run_name(row.ordinal);

    if (options.traces) write_trace_csv(run.sd_trace, fs_hz, hop, dir / "traces" / (name + ".csv"));
    if (options.plots) {
      groups[row.gain_db].push_back({row.variant + " / " + row.speech_id + " / " + row.ir_id, run.sd_trace});
    }
    if (options.audio_pairs && run.e_signal.size() > 0) {
      const Eigen::Index len = run.e_signal.size();
      Eigen::Index begin = static_cast<Eigen::Index>(std::llround(options.pesq_begin_s * fs_hz));
      if (begin >= len) begin = 0;
      const SampleBuffer ref{run.s_signal.samples.segment(begin, len - begin), fs_hz};
      const SampleBuffer deg{run.e_signal.samples.segment(begin, len - begin), fs_hz};
      write_wav(dir / "pesq" / (name + "_ref.wav"), ref);
      write_wav(dir / "pesq" / (name + "_deg.wav"), deg);
      manifest << "run=" << name << " reference=" << name << "_ref.wav degraded=" << name
               << "_deg.wav begin_s=" << format_double(static_cast<double>(begin) / fs_hz)
               << " end_s=" << format_double(static_cast<double>(len) / fs_hz)
               << " speaker=" << row.speaker << " variant=" << row.variant
               << " gain_db=" << format_double(row.gain_db) << "\n";
    }
  }
  if (options.plots) {
    for (const auto& [gain, series] : groups) {
      const auto& run = *std::find_if(result.rows.begin(), result.rows.end(),
                                      [](const MatrixRow& r) { return r.result.has_value(); })
                             ->result;
      write_sd_svg(series, run.mdf.sample_rate, run.mdf.hop(), "g = " + format_double(gain) + " dB",
                   dir / "plots" / ("gain_" + format_double(gain) + ".svg"));
    }
  }
}

}  // namespace afc
