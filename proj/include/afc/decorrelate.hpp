#pragma once

#include "afc/dsp.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace afc {

// ---------------------------------------------------------------------------
// Variable delay line (vibrato)
// ---------------------------------------------------------------------------

struct VibratoParams {
  bool enabled = false;
  double max_delay_ms = 2.0;
  double mod_freq_hz = 1.0;

  void validate() const;
};

/// Time-domain vibrato: sinusoidally modulated tap of a delay line, the
/// fractional part realized with a first-order allpass interpolator.
///
/// The delay is d(k) = Dc + Dm sin(2 pi f k / fs) with Dm = max_delay_ms * fs
/// / 1000 and Dc = Dm + 2, so d(k) >= 2 and the allpass fraction stays in
/// [0.5, 1.5). The oscillator phase starts at zero.
class Vibrato {
 public:
  Vibrato(const VibratoParams& params, double sample_rate);

  double process(double x);
  Eigen::VectorXd process(const Eigen::Ref<const Eigen::VectorXd>& x);

  /// Delay in samples applied to sample index k.
  double delay_at(std::int64_t k) const;
  double center_delay() const { return center_; }

  /// Allpass coefficient for a fractional delay in [0.5, 1.5).
  static double allpass_coefficient(double frac) { return (1.0 - frac) / (1.0 + frac); }

 private:
  double tap(std::int64_t offset) const;

  VibratoParams params_;
  double fs_;
  double depth_ = 0.0;
  double center_ = 0.0;
  std::vector<double> line_;
  std::size_t write_ = 0;
  std::int64_t k_ = 0;
  double y_prev_ = 0.0;
};

// ---------------------------------------------------------------------------
// Non-linear distortion
// ---------------------------------------------------------------------------

enum class Curve : int {
  HalfWave = 1,
  SignedSquare = 2,
  Combined = 3,
  SmoothedHalfWave = 4,
};

struct DistortionParams {
  bool enabled = false;
  Curve curve = Curve::HalfWave;
  double mix_alpha = 0.202;
  double sc = 1.0;
  double beta = 0.005;
  double knee_factor = 0.65;

  void validate() const;
};

/// Static curves y1..y4. `c` is the soft-knee offset of the smoothed
/// half-wave rectifier and is ignored by the other curves.
template <typename Scalar>
Scalar nonlinear_curve(Scalar x, Curve curve, Scalar c = Scalar(0)) {
  using std::abs;
  using std::sqrt;
  const Scalar half = Scalar(0.5);
  switch (curve) {
    case Curve::HalfWave:
      return half * (x + abs(x));
    case Curve::SignedSquare:
      return x * abs(x);
    case Curve::Combined:
      return half * (half * (x + abs(x)) + x * abs(x));
    case Curve::SmoothedHalfWave:
      return half * (x + sqrt(x * x + c * c));
  }
  return x;
}

/// First-order recursive power estimate feeding the soft-knee offset.
struct VarianceTracker {
  double beta = 0.005;
  double knee_factor = 0.65;
  double sigma2 = 0.0;

  // Returns the updated variance.
  double update(double x) {
    sigma2 = (1.0 - beta) * sigma2 + beta * x * x;
    return sigma2;
  }
  double knee() const { return knee_factor * std::sqrt(sigma2); }
};

/// Per-sample distortion stage: curve, clean/effect mix and power scale.
class Distortion {
 public:
  explicit Distortion(const DistortionParams& params);

  double process(double x);
  Eigen::VectorXd process(const Eigen::Ref<const Eigen::VectorXd>& x);

  // Curve output only (alpha and sc not applied), advancing the tracker.
  double curve_only(double x);

 private:
  DistortionParams params_;
  VarianceTracker tracker_;
};

/// sc * ((1 - alpha) x + alpha y_cnb).
Eigen::VectorXd scaled_mix(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y_cnb, double mix_alpha,
                           double sc);

/// Total harmonic distortion in percent of a distorted sinusoid at f0. The
/// analysis length must hold an integer number of f0 cycles.
double measure_thd(const SampleBuffer& signal, double f0);

/// THD of a 400 Hz, magnitude 0.5 sine passed through `curve` mixed at `alpha`.
double calibration_thd(Curve curve, double alpha, double magnitude = 0.5);

/// Bisection for the mix alpha that yields `target_thd` percent on the
/// calibration sine. Throws ConfigError naming the maximum reachable THD.
double calibrate_alpha(Curve curve, double target_thd, double tolerance_pp = 0.05);

/// Power-matching scale RMS(x) / RMS(mixed).
double calibrate_sc(const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y_mixed_unscaled);

/// sc for a full signal: runs the configured curve and mix with sc = 1.
double calibrate_sc(const Eigen::Ref<const Eigen::VectorXd>& x, const DistortionParams& params);

// ---------------------------------------------------------------------------
// Energy-decay operator (reverberation model)
// ---------------------------------------------------------------------------

enum class EdoVariant { Elementwise, CurveFit, MeanRatio };

struct EdoParams {
  bool enabled = false;
  EdoVariant variant = EdoVariant::CurveFit;
  double r_min = 0.2;
  double r_max = 2.0;
  // Keep the raw least-squares slope (present over past) instead of its
  // reciprocal for the curve-fit variant.
  bool literal_fit = false;

  void validate() const;
};

/// Least-squares slope a minimizing sum (a |X| - |Xh|)^2.
double edo_fit_slope(const Eigen::Ref<const Eigen::VectorXd>& past_mag,
                     const Eigen::Ref<const Eigen::VectorXd>& present_mag);

/// Unclamped EDO for one partition. `past_mag` is |X| of the partition's input
/// block, `error_half_mag` is |E_h| and `gain` the linear loop gain, so the
/// present magnitude is gain * |E_h|. Returns N values for the elementwise
/// variant and a single value otherwise. Zero denominators give r_max.
Eigen::VectorXd edo_compute(const Eigen::Ref<const Eigen::VectorXd>& past_mag,
                            const Eigen::Ref<const Eigen::VectorXd>& error_half_mag, double gain,
                            const EdoParams& params);

Eigen::VectorXd edo_clamp(const Eigen::Ref<const Eigen::VectorXd>& edo, const EdoParams& params);
double edo_clamp(double edo, const EdoParams& params);

/// Clamped per-bin step scale for all partitions (N x M), scalar variants
/// broadcast across the bins of their partition.
Eigen::MatrixXd edo_step_scale(const PartitionedSpectrum& x_hist, const Spectrum& error_half,
                               double gain, const EdoParams& params);

}  // namespace afc
