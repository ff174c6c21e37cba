// afc: command line front end for the feedback-cancellation simulator.
//
//   afc run                 one speech file, one room, one gain, one variant
//   afc matrix              speech x rooms x gains x variants, with aggregates
//   afc calibrate-thd       mix alpha for a curve and target THD
//   afc calibrate-coupling  scale factor bringing a room to the coupling level
//
// Every option can also come from a key-value file given with --config:
// "name = value" lines under a [run], [matrix], [calibrate-thd] or
// [calibrate-coupling] header, names as the long flags without dashes.
// Command line flags win over the file.

#include "afc/conditioning.hpp"
#include "afc/decorrelate.hpp"
#include "afc/errors.hpp"
#include "afc/loop.hpp"
#include "afc/report.hpp"
#include "afc/wav.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace afc;
namespace fs = std::filesystem;

// Options shared by run and matrix, bound straight to the library configs.
struct Settings {
  MdfConfig mdf;
  KalmanParams kalman;
  LoopConfig loop;
  DecorrelationConfig dec;
  double ramp_s = -1.0;  // < 0: default for the gain
  bool limiter_fixed = false;
  int curve = 1;
  std::string edo_variant = "curve-fit";
  std::string scheme = "A";
  double thd = 0.0;  // > 0: calibrate the mix alpha to this THD
  double duration_s = 42.0;
  double eq_cutoff_hz = 100.0;
  double late_end_s = -1.0;
  std::string out_dir;
  bool no_audio = false;
  bool no_plots = false;
  int threads = 1;
};

void add_model_options(CLI::App& app, Settings& s) {
  auto* g = "Filter";
  app.add_option("--block-len", s.mdf.block_len, "block length N")->capture_default_str()->group(g);
  app.add_option("--partitions", s.mdf.partitions, "partitions M")->capture_default_str()->group(g);
  app.add_option("--sample-rate", s.mdf.sample_rate, "processing rate in Hz")->capture_default_str()->group(g);
  app.add_option("--transition", s.kalman.transition, "state transition A")->capture_default_str()->group(g);
  app.add_option("--gamma", s.kalman.gamma, "noise PSD smoothing")->capture_default_str()->group(g);
  app.add_option("--delta", s.kalman.delta, "regularization")->capture_default_str()->group(g);
  app.add_option("--kalman-alpha", s.kalman.kalman_alpha, "weight of the noise PSD")
      ->capture_default_str()
      ->group(g);

  g = "Loop";
  app.add_option("--gain-db", s.loop.gain_db, "final loop gain in dB")->capture_default_str()->group(g);
  app.add_option("--ramp-s", s.ramp_s, "gain ramp length, default by gain (0/6/12/30 dB -> 0/1/2/10 s)")
      ->group(g);
  app.add_option("--fixed-delay", s.loop.fixed_delay, "forward-path delay in samples")
      ->capture_default_str()
      ->group(g);
  app.add_option("--limiter-headroom-db", s.loop.limiter_headroom_db, "limiter threshold over the reference")
      ->capture_default_str()
      ->group(g);
  app.add_flag("--limiter-fixed", s.limiter_fixed,
               "limiter threshold relative to full scale 1.0 instead of the gain-scaled full scale")
      ->group(g);
  app.add_option("--coupling-db", s.loop.coupling_db, "room coupling level")->capture_default_str()->group(g);
  app.add_option("--duration", s.duration_s, "speech repeated to this many seconds (<= 0: as is)")
      ->capture_default_str()
      ->group(g);
  app.add_option("--eq-cutoff", s.eq_cutoff_hz, "room low-frequency equalization cutoff in Hz")
      ->capture_default_str()
      ->group(g);

  g = "Decorrelation";
  app.add_flag("--vibrato", s.dec.vibrato.enabled, "enable the vibrato stage")->group(g);
  app.add_option("--vibrato-delay-ms", s.dec.vibrato.max_delay_ms, "maximum delay swing")
      ->capture_default_str()
      ->group(g);
  app.add_option("--vibrato-freq", s.dec.vibrato.mod_freq_hz, "modulation frequency in Hz")
      ->capture_default_str()
      ->group(g);
  app.add_flag("--distortion", s.dec.distortion.enabled, "enable the distortion stage")->group(g);
  app.add_option("--curve", s.curve, "distortion curve 1..4")->check(CLI::Range(1, 4))->capture_default_str()->group(g);
  app.add_option("--mix-alpha", s.dec.distortion.mix_alpha, "effect mix alpha")->capture_default_str()->group(g);
  app.add_option("--thd", s.thd, "calibrate alpha to this THD in percent (overrides --mix-alpha)")->group(g);
  app.add_option("--beta", s.dec.distortion.beta, "variance tracker smoothing of curve 4")
      ->capture_default_str()
      ->group(g);
  app.add_option("--knee-factor", s.dec.distortion.knee_factor, "soft-knee factor of curve 4")
      ->capture_default_str()
      ->group(g);
  app.add_flag("--edo", s.dec.edo.enabled, "enable the energy-decay step control")->group(g);
  app.add_option("--edo-variant", s.edo_variant, "elementwise | curve-fit | mean")
      ->check(CLI::IsMember({"elementwise", "curve-fit", "mean"}))
      ->capture_default_str()
      ->group(g);
  app.add_option("--edo-min", s.dec.edo.r_min, "lower clamp")->capture_default_str()->group(g);
  app.add_option("--edo-max", s.dec.edo.r_max, "upper clamp")->capture_default_str()->group(g);
  app.add_flag("--edo-literal", s.dec.edo.literal_fit, "keep the raw fitted slope")->group(g);
  app.add_flag("--prediction", s.dec.prediction.enabled, "enable input prewhitening")->group(g);
  app.add_option("--order", s.dec.prediction.order, "predictor order")->capture_default_str()->group(g);
  app.add_option("--scheme", s.scheme, "A: newest predictor for all partitions, B: one per pair")
      ->check(CLI::IsMember({"A", "B"}))
      ->capture_default_str()
      ->group(g);

  g = "Output";
  app.add_option("--out", s.out_dir, "directory for CSV, traces, plots and audio")->group(g);
  app.add_flag("--no-audio", s.no_audio, "skip the reference/degraded WAV pairs")->group(g);
  app.add_flag("--no-plots", s.no_plots, "skip the SVG plots")->group(g);
  app.add_option("--late-end", s.late_end_s, "end of the late sd window in s (< 0: end of run)")->group(g);
}

void finish(Settings& s) {
  if (s.ramp_s >= 0.0) s.loop.ramp_s = s.ramp_s;
  s.loop.limiter_tracks_gain = !s.limiter_fixed;
  s.dec.distortion.curve = static_cast<Curve>(s.curve);
  if (s.thd > 0.0) s.dec.distortion_thd = s.thd;
  static const std::map<std::string, EdoVariant> edo{
      {"elementwise", EdoVariant::Elementwise}, {"curve-fit", EdoVariant::CurveFit}, {"mean", EdoVariant::MeanRatio}};
  s.dec.edo.variant = edo.at(s.edo_variant);
  s.dec.prediction.scheme = s.scheme == "B" ? PredictionScheme::PairwiseCommon : PredictionScheme::NewestForAll;
}

MatrixOptions matrix_options(const Settings& s) {
  MatrixOptions opt;
  opt.loop = s.loop;
  opt.mdf = s.mdf;
  opt.kalman = s.kalman;
  opt.target_duration_s = s.duration_s;
  opt.eq_cutoff_hz = s.eq_cutoff_hz;
  opt.windows.late_end_s = s.late_end_s;
  opt.threads = s.threads;
  return opt;
}

// "vibrato+prediction" style names; the stage parameters come from the options.
Variant make_variant(const std::string& name, const DecorrelationConfig& params) {
  Variant v{name, params};
  v.decorrelation.vibrato.enabled = false;
  v.decorrelation.distortion.enabled = false;
  v.decorrelation.edo.enabled = false;
  v.decorrelation.prediction.enabled = false;
  std::stringstream ss(name);
  std::string part;
  while (std::getline(ss, part, '+')) {
    if (part == "vibrato") {
      v.decorrelation.vibrato.enabled = true;
    } else if (part == "distortion") {
      v.decorrelation.distortion.enabled = true;
    } else if (part == "edo") {
      v.decorrelation.edo.enabled = true;
    } else if (part == "prediction") {
      v.decorrelation.prediction.enabled = true;
    } else if (part != "baseline") {
      throw ConfigError("unknown variant part '" + part +
                        "' (use baseline, vibrato, distortion, edo, prediction joined by +)");
    }
  }
  return v;
}

std::string variant_name(const DecorrelationConfig& d) {
  std::string name;
  auto add = [&](bool on, const char* part) {
    if (!on) return;
    if (!name.empty()) name += "+";
    name += part;
  };
  add(d.vibrato.enabled, "vibrato");
  add(d.distortion.enabled, "distortion");
  add(d.edo.enabled, "edo");
  add(d.prediction.enabled, "prediction");
  return name.empty() ? "baseline" : name;
}

// console only; the CSV files keep full precision
std::string two(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string db_text(const std::optional<double>& v) { return v ? two(*v) : "n/a"; }

int report_and_export(const MatrixResult& m, const Settings& s) {
  for (const auto& row : m.rows) {
    std::cout << row.speech_id << " " << row.ir_id << " g=" << format_double(row.gain_db) << " " << row.variant;
    if (row.failed()) {
      std::cout << " FAILED: " << row.error << "\n";
      continue;
    }
    std::cout << " sd5=" << db_text(row.sd.sd5_db) << " sd20+=" << db_text(row.sd.sd20plus_db)
              << " overflow=" << two(row.result->overflow_pct()) << "%\n";
  }
  if (m.rows.size() > 1) {
    std::cout << "\nvariant,gain_db,speaker,count,sd5_db,sd20plus_db,overflow_pct\n";
    for (const auto& a : m.aggregates) {
      std::cout << a.variant << "," << format_double(a.gain_db) << "," << a.speaker << "," << a.count << ","
                << db_text(a.sd5_db) << "," << db_text(a.sd20plus_db) << "," << two(a.overflow_pct)
                << "\n";
    }
  }
  if (!s.out_dir.empty()) {
    ExportOptions eo;
    eo.audio_pairs = !s.no_audio;
    eo.plots = !s.no_plots;
    export_report(m, s.out_dir, eo);
  }
  const std::size_t failed = m.failures();
  std::cerr << m.rows.size() << " rows, " << m.rows.size() - failed << " ok, " << failed << " failed";
  if (!s.out_dir.empty()) std::cerr << "; results in " << s.out_dir;
  std::cerr << "\n";
  for (const auto& row : m.rows) {
    if (row.failed()) std::cerr << "  row " << row.ordinal << " (" << row.speech_id << ", " << row.ir_id
                                << "): " << row.error << "\n";
  }
  return failed == 0 ? 0 : 1;
}

std::string stem(const std::string& path) { return fs::path(path).stem().string(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop acoustic feedback cancellation simulator"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key-value file with option values, one [section] per subcommand");

  // run
  Settings run_s;
  std::string run_speech, run_ir, run_speaker = "unknown";
  auto* run = app.add_subcommand("run", "single closed-loop simulation");
  run->add_option("--speech", run_speech, "speech WAV")->required()->group("Input");
  run->add_option("--ir", run_ir, "room impulse response WAV")->required()->group("Input");
  run->add_option("--speaker", run_speaker, "speaker tag for the report")->group("Input");
  add_model_options(*run, run_s);

  // matrix
  Settings mat_s;
  std::vector<std::string> mat_speech, mat_irs;
  std::vector<double> gains{0.0, 6.0, 12.0, 30.0};
  std::vector<std::string> variants{"baseline"};
  auto* matrix = app.add_subcommand("matrix", "cross product of speech, rooms, gains and variants");
  matrix->add_option("--speech", mat_speech, "speech WAVs, optionally tagged as speaker=path")
      ->required()
      ->delimiter(',')
      ->group("Input");
  matrix->add_option("--ir", mat_irs, "room impulse response WAVs")->required()->delimiter(',')->group("Input");
  matrix->add_option("--gains", gains, "final loop gains in dB")->delimiter(',')->capture_default_str()->group("Input");
  matrix->add_option("--variants", variants,
                     "variants, each a '+' joined set of baseline, vibrato, distortion, edo, prediction")
      ->delimiter(',')
      ->capture_default_str()
      ->group("Input");
  matrix->add_option("--threads", mat_s.threads, "parallel runs")->capture_default_str()->group("Input");
  add_model_options(*matrix, mat_s);

  // calibrate-thd
  int thd_curve = 1;
  double thd_target = 5.0;
  bool thd_table = false;
  auto* cal_thd = app.add_subcommand("calibrate-thd", "mix alpha giving a THD on a 400 Hz sine of magnitude 0.5");
  cal_thd->add_option("--curve", thd_curve, "curve 1..4")->check(CLI::Range(1, 4))->capture_default_str();
  cal_thd->add_option("--thd", thd_target, "target THD in percent")->capture_default_str();
  cal_thd->add_flag("--table", thd_table, "all curves at 5 and 10 percent");

  // calibrate-coupling
  std::string cc_ir, cc_speech, cc_out;
  double cc_target = -10.0, cc_eq = 100.0, cc_rate = 16000.0;
  int cc_delay = 256;
  auto* cal_cc = app.add_subcommand("calibrate-coupling", "scale a room response to a coupling level");
  cal_cc->add_option("--ir", cc_ir, "room impulse response WAV")->required();
  cal_cc->add_option("--speech", cc_speech, "speech WAV used for the level measurement")->required();
  cal_cc->add_option("--coupling-db", cc_target, "target coupling level")->capture_default_str();
  cal_cc->add_option("--fixed-delay", cc_delay, "forward-path delay in samples")->capture_default_str();
  cal_cc->add_option("--eq-cutoff", cc_eq, "low-frequency equalization cutoff in Hz")->capture_default_str();
  cal_cc->add_option("--sample-rate", cc_rate, "processing rate in Hz")->capture_default_str();
  cal_cc->add_option("--out", cc_out, "write the scaled response as float WAV");

  // --config may also follow the subcommand name
  for (auto* sub : {run, matrix, cal_thd, cal_cc}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      finish(run_s);
      const Variant v{variant_name(run_s.dec), run_s.dec};
      const auto m = run_matrix({{stem(run_speech), run_speaker, run_speech, std::nullopt}},
                                {{stem(run_ir), run_ir, std::nullopt}}, {run_s.loop.gain_db}, {v},
                                matrix_options(run_s));
      return report_and_export(m, run_s);
    }
    if (matrix->parsed()) {
      finish(mat_s);
      std::vector<SpeechItem> speech;
      for (const auto& item : mat_speech) {
        const auto eq = item.find('=');
        const std::string speaker = eq == std::string::npos ? "unknown" : item.substr(0, eq);
        const std::string path = eq == std::string::npos ? item : item.substr(eq + 1);
        speech.push_back({stem(path), speaker, path, std::nullopt});
      }
      std::vector<IrItem> irs;
      for (const auto& path : mat_irs) irs.push_back({stem(path), path, std::nullopt});
      std::vector<Variant> vs;
      for (const auto& name : variants) vs.push_back(make_variant(name, mat_s.dec));
      const auto m = run_matrix(speech, irs, gains, vs, matrix_options(mat_s));
      return report_and_export(m, mat_s);
    }
    if (cal_thd->parsed()) {
      if (thd_table) {
        std::cout << "thd_pct,curve1,curve2,curve3,curve4\n";
        for (double t : {5.0, 10.0}) {
          std::cout << format_double(t);
          for (int c = 1; c <= 4; ++c) std::cout << "," << format_double(std::round(calibrate_alpha(static_cast<Curve>(c), t) * 1000.0) / 1000.0);
          std::cout << "\n";
        }
        return 0;
      }
      const auto curve = static_cast<Curve>(thd_curve);
      const double alpha = calibrate_alpha(curve, thd_target);
      std::cout << "curve=" << thd_curve << " thd_pct=" << format_double(thd_target)
                << " alpha=" << format_double(alpha)
                << " measured_thd_pct=" << format_double(calibration_thd(curve, alpha)) << "\n";
      return 0;
    }
    if (cal_cc->parsed()) {
      const SampleBuffer s = prepare_speech(read_wav(cc_speech), cc_rate, 0.0);
      const Eigen::VectorXd h = prepare_ir(read_wav(cc_ir), cc_rate, cc_eq);
      const auto c = calibrate_coupling(h, s.samples, cc_target, cc_delay);
      std::cout << "measured_db=" << format_double(c.measured_db) << " factor=" << format_double(c.factor)
                << " calibrated_db=" << format_double(measure_coupling_db(c.h, s.samples, cc_delay)) << "\n";
      if (!cc_out.empty()) write_wav(cc_out, {c.h, cc_rate});
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
