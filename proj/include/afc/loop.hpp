#pragma once

#include "afc/decorrelate.hpp"
#include "afc/dsp.hpp"
#include "afc/kalman.hpp"
#include "afc/metrics.hpp"
#include "afc/prediction.hpp"

#include <optional>
#include <string>
#include <vector>

namespace afc {

/// Forward path and experiment settings of the closed loop.
struct LoopConfig {
  double gain_db = 0.0;
  std::optional<double> ramp_s;  // unset: default_ramp_seconds(gain_db)
  int fixed_delay = 256;
  double limiter_headroom_db = 6.0;
  // Threshold relative to the gain-scaled full scale (headroom over g(t) * 1.0)
  // instead of a fixed level over 1.0.
  bool limiter_tracks_gain = true;
  double coupling_db = -10.0;
  double duration_s = 0.0;  // <= 0: whole speech signal

  double effective_ramp() const;
  void validate(const MdfConfig& mdf) const;
};

/// Ramp length used for a final gain: 0 dB -> 0 s, 6 -> 1 s, 12 -> 2 s,
/// 30 -> 10 s; values in between take the next larger setting.
double default_ramp_seconds(double final_db);

/// All decorrelation blocks, each with its own enable flag. When
/// `distortion_thd` is set, the mix alpha is calibrated to that THD.
struct DecorrelationConfig {
  VibratoParams vibrato;
  DistortionParams distortion;
  std::optional<double> distortion_thd;
  EdoParams edo;
  PredictionParams prediction;

  void validate(const MdfConfig& mdf) const;
};

/// Linear loop gain at time t: dB value rising linearly from 0 dB at t = 0
/// to final_db at ramp_s, constant afterwards.
double gain_ramp(double t, double final_db, double ramp_s);

struct LimiterOutput {
  double value;
  bool clipped;
};

inline LimiterOutput hard_limiter(double x, double threshold) {
  if (x > threshold) return {threshold, true};
  if (x < -threshold) return {-threshold, true};
  return {x, false};
}

struct CouplingCalibration {
  Eigen::VectorXd h;  // scaled response
  double factor = 1.0;
  double measured_db = 0.0;  // coupling before scaling
};

/// Scales h so that an open-loop pass (x = s delayed by fixed_delay, g = 0 dB)
/// gives RMS(h * x) / RMS(s) = target_db.
CouplingCalibration calibrate_coupling(const Eigen::Ref<const Eigen::VectorXd>& h,
                                       const Eigen::Ref<const Eigen::VectorXd>& s,
                                       double target_db, int fixed_delay = 256);

/// Coupling level RMS(h * delayed s) / RMS(s) in dB.
double measure_coupling_db(const Eigen::Ref<const Eigen::VectorXd>& h,
                           const Eigen::Ref<const Eigen::VectorXd>& s, int fixed_delay);

struct RunResult {
  SampleBuffer s_signal;  // peak-normalized speech actually used
  SampleBuffer e_signal;
  SampleBuffer x_signal;
  std::vector<double> sd_trace;  // linear, one per block; ||h_hat|| when h is all zero
  std::size_t overflow_count = 0;
  std::size_t total_samples = 0;
  double distortion_sc = 1.0;
  double distortion_alpha = 0.0;
  std::optional<std::size_t> fault_block;
  std::string fault;

  LoopConfig loop;
  MdfConfig mdf;
  KalmanParams kalman;
  DecorrelationConfig decorrelation;

  double overflow_pct() const { return overflow_percent(overflow_count, total_samples); }
  bool ok() const { return !fault_block.has_value(); }
};

/// Block-synchronous closed loop. Per hop: loudspeaker samples from the
/// forward path (fixed delay, vibrato, distortion, ramped gain, limiter),
/// room echo by direct convolution with h, y = s + r, one Kalman filter step,
/// system distance of the current estimate. Numeric faults end the run early
/// and are reported in the result.
RunResult run_simulation(const SampleBuffer& speech, const Eigen::Ref<const Eigen::VectorXd>& h,
                         const LoopConfig& loop, const MdfConfig& mdf, const KalmanParams& kalman,
                         const DecorrelationConfig& decorrelation);

// ---------------------------------------------------------------------------
// Batch evaluation

struct SpeechItem {
  std::string id;
  std::string speaker;  // grouping tag, e.g. "male" / "female"
  std::string path;
  std::optional<SampleBuffer> audio;  // used instead of path when set
};

struct IrItem {
  std::string id;
  std::string path;
  std::optional<SampleBuffer> audio;
};

struct Variant {
  std::string name;
  DecorrelationConfig decorrelation;
};

struct MatrixOptions {
  LoopConfig loop;  // gain_db and duration_s are overridden per row
  MdfConfig mdf;
  KalmanParams kalman;
  double target_duration_s = 42.0;
  double eq_cutoff_hz = 100.0;
  SdWindows windows;
  int threads = 1;
};

struct MatrixRow {
  std::size_t ordinal = 0;
  std::string speech_id;
  std::string speaker;
  std::string ir_id;
  std::string variant;
  double gain_db = 0.0;
  std::string error;  // non-empty when the row failed before or during the run
  std::optional<RunResult> result;
  EarlyLate sd;

  bool failed() const { return !error.empty(); }
};

struct AggregateRow {
  std::string variant;
  double gain_db = 0.0;
  std::string speaker;
  std::size_t count = 0;
  std::optional<double> sd5_db;
  std::optional<double> sd20plus_db;
  double overflow_pct = 0.0;
};

struct MatrixResult {
  std::vector<MatrixRow> rows;  // ordered by ordinal
  std::vector<AggregateRow> aggregates;

  std::size_t failures() const;
};

/// Speech preparation: resample, peak-normalize, repeat to duration.
SampleBuffer prepare_speech(const SampleBuffer& raw, double sample_rate, double duration_s);

/// Impulse response preparation: resample and low-frequency equalization.
Eigen::VectorXd prepare_ir(const SampleBuffer& raw, double sample_rate, double eq_cutoff_hz);

/// Mean over rows sharing (variant, gain, speaker); system distances are
/// averaged in the linear domain.
std::vector<AggregateRow> aggregate(const std::vector<MatrixRow>& rows);

/// Cross product speech x IR x gain x variant. Unreadable inputs mark the
/// row failed; the remaining rows still run.
MatrixResult run_matrix(const std::vector<SpeechItem>& speech, const std::vector<IrItem>& irs,
                        const std::vector<double>& gains_db, const std::vector<Variant>& variants,
                        const MatrixOptions& options);

}  // namespace afc
