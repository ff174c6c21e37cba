#include "afc/decorrelate.hpp"

#include "afc/conditioning.hpp"
#include "afc/errors.hpp"

#include <algorithm>
#include <numbers>
#include <sstream>

namespace afc {

namespace {

constexpr double kCalibrationRate = 16000.0;
constexpr double kCalibrationFreq = 400.0;

}  // namespace

// ---------------------------------------------------------------------------
// Vibrato

void VibratoParams::validate() const {
  if (!(max_delay_ms >= 0.0)) throw ConfigError("vibrato max_delay_ms must be >= 0");
  if (!(mod_freq_hz >= 0.0)) throw ConfigError("vibrato mod_freq_hz must be >= 0");
}

Vibrato::Vibrato(const VibratoParams& params, double sample_rate)
    : params_(params), fs_(sample_rate) {
  params_.validate();
  if (!(sample_rate > 0.0)) throw ConfigError("vibrato sample rate must be positive");
  depth_ = params_.max_delay_ms * fs_ / 1000.0;
  center_ = depth_ + 2.0;
  const auto longest = static_cast<std::size_t>(std::ceil(center_ + depth_)) + 4;
  line_.assign(longest, 0.0);
}

double Vibrato::delay_at(std::int64_t k) const {
  return center_ +
         depth_ * std::sin(2.0 * std::numbers::pi * params_.mod_freq_hz *
                           static_cast<double>(k) / fs_);
}

double Vibrato::tap(std::int64_t offset) const {
  // offset 0 is the newest sample
  const auto n = static_cast<std::int64_t>(line_.size());
  const std::int64_t idx = ((static_cast<std::int64_t>(write_) - offset) % n + n) % n;
  return line_[static_cast<std::size_t>(idx)];
}

double Vibrato::process(double x) {
  if (!params_.enabled) return x;
  line_[write_] = x;

  const double d = delay_at(k_);
  const double whole = std::floor(d - 0.5);
  const double frac = d - whole;
  const auto i = static_cast<std::int64_t>(whole);
  const double a = allpass_coefficient(frac);

  const double v = tap(i);
  const double v_prev = tap(i + 1);
  const double y = a * (v - y_prev_) + v_prev;

  y_prev_ = y;
  write_ = (write_ + 1) % line_.size();
  ++k_;
  return y;
}

Eigen::VectorXd Vibrato::process(const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd y(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) y[k] = process(x[k]);
  return y;
}

// ---------------------------------------------------------------------------
// Distortion

void DistortionParams::validate() const {
  if (!(mix_alpha >= 0.0 && mix_alpha <= 1.0)) throw ConfigError("mix_alpha must be in [0, 1]");
  if (!(sc > 0.0)) throw ConfigError("sc must be positive");
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("beta must be in (0, 1)");
  const int id = static_cast<int>(curve);
  if (id < 1 || id > 4) throw ConfigError("curve id must be 1..4");
}

Distortion::Distortion(const DistortionParams& params) : params_(params) {
  params_.validate();
  tracker_.beta = params_.beta;
  tracker_.knee_factor = params_.knee_factor;
}

double Distortion::curve_only(double x) {
  double c = 0.0;
  if (params_.curve == Curve::SmoothedHalfWave) {
    tracker_.update(x);
    c = tracker_.knee();
  }
  return nonlinear_curve(x, params_.curve, c);
}

double Distortion::process(double x) {
  if (!params_.enabled) return x;
  const double y = curve_only(x);
  return params_.sc * ((1.0 - params_.mix_alpha) * x + params_.mix_alpha * y);
}

Eigen::VectorXd Distortion::process(const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd y(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) y[k] = process(x[k]);
  return y;
}

Eigen::VectorXd scaled_mix(const Eigen::Ref<const Eigen::VectorXd>& x,
                           const Eigen::Ref<const Eigen::VectorXd>& y_cnb, double mix_alpha,
                           double sc) {
  if (x.size() != y_cnb.size()) {
    throw ConfigError("scaled_mix: length mismatch (" + std::to_string(x.size()) + " vs " +
                      std::to_string(y_cnb.size()) + ")");
  }
  return sc * ((1.0 - mix_alpha) * x + mix_alpha * y_cnb);
}

double measure_thd(const SampleBuffer& signal, double f0) {
  const Eigen::Index len = signal.size();
  const double fs = signal.sample_rate;
  if (len == 0 || !(f0 > 0.0) || !(fs > 0.0)) throw ConfigError("measure_thd: empty signal or bad rate");
  const double cycles = f0 * static_cast<double>(len) / fs;
  const double whole = std::round(cycles);
  if (whole < 1.0 || std::abs(cycles - whole) > 1e-6) {
    std::ostringstream msg;
    msg << "measure_thd: " << f0 << " Hz is not on the analysis grid (" << cycles
        << " cycles in " << len << " samples)";
    throw ConfigError(msg.str());
  }
  const auto fundamental_bin = static_cast<Eigen::Index>(whole);

  // Power of a real sinusoid at DFT bin b (Nyquist bin counts once).
  auto bin_power = [&](Eigen::Index b) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index n = 0; n < len; ++n) {
      const auto phase_idx = static_cast<double>((b * n) % len);
      const double phase = -2.0 * std::numbers::pi * phase_idx / static_cast<double>(len);
      acc += signal.samples[n] * std::polar(1.0, phase);
    }
    const double weight = (2 * b == len) ? 1.0 : 2.0;
    return weight * std::norm(acc) / (static_cast<double>(len) * static_cast<double>(len));
  };

  const double p1 = bin_power(fundamental_bin);
  if (p1 <= 0.0) throw ConfigError("measure_thd: no energy at the fundamental");
  double harmonics = 0.0;
  for (Eigen::Index b = 2 * fundamental_bin; 2 * b <= len; b += fundamental_bin) {
    harmonics += bin_power(b);
  }
  return 100.0 * std::sqrt(harmonics / p1);
}

double calibration_thd(Curve curve, double alpha, double magnitude) {
  // one second of settling for the variance tracker, one second analysed
  const auto settle = static_cast<Eigen::Index>(kCalibrationRate);
  const auto analysed = static_cast<Eigen::Index>(kCalibrationRate);

  DistortionParams params;
  params.enabled = true;
  params.curve = curve;
  params.mix_alpha = alpha;
  params.sc = 1.0;
  Distortion stage(params);

  SampleBuffer out;
  out.sample_rate = kCalibrationRate;
  out.samples.resize(analysed);
  for (Eigen::Index k = 0; k < settle + analysed; ++k) {
    const double x = magnitude * std::sin(2.0 * std::numbers::pi * kCalibrationFreq *
                                          static_cast<double>(k) / kCalibrationRate);
    const double y = stage.process(x);
    if (k >= settle) out.samples[k - settle] = y;
  }
  return measure_thd(out, kCalibrationFreq);
}

double calibrate_alpha(Curve curve, double target_thd, double tolerance_pp) {
  if (!(target_thd >= 0.0)) throw ConfigError("target THD must be >= 0");
  const double reachable = calibration_thd(curve, 1.0);
  if (reachable < target_thd) {
    std::ostringstream msg;
    msg << "curve " << static_cast<int>(curve) << " reaches at most " << reachable
        << " % THD, requested " << target_thd << " %";
    throw ConfigError(msg.str());
  }
  double lo = 0.0;
  double hi = 1.0;
  double mid = 0.5;
  for (int iter = 0; iter < 60; ++iter) {
    mid = 0.5 * (lo + hi);
    const double thd = calibration_thd(curve, mid);
    if (std::abs(thd - target_thd) <= tolerance_pp) break;
    if (thd < target_thd) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

double calibrate_sc(const Eigen::Ref<const Eigen::VectorXd>& x,
                    const Eigen::Ref<const Eigen::VectorXd>& y_mixed_unscaled) {
  if (x.size() != y_mixed_unscaled.size()) throw ConfigError("calibrate_sc: length mismatch");
  const double px = rms(x);
  const double py = rms(y_mixed_unscaled);
  if (px <= 0.0 || py <= 0.0) throw ConfigError("calibrate_sc: zero-power signal");
  return px / py;
}

double calibrate_sc(const Eigen::Ref<const Eigen::VectorXd>& x, const DistortionParams& params) {
  DistortionParams unscaled = params;
  unscaled.enabled = true;
  unscaled.sc = 1.0;
  Distortion stage(unscaled);
  return calibrate_sc(x, stage.process(x));
}

// ---------------------------------------------------------------------------
// EDO

void EdoParams::validate() const {
  if (!(r_min > 0.0 && r_min <= r_max)) throw ConfigError("EDO bounds must satisfy 0 < r_min <= r_max");
}

double edo_fit_slope(const Eigen::Ref<const Eigen::VectorXd>& past_mag,
                     const Eigen::Ref<const Eigen::VectorXd>& present_mag) {
  const double den = past_mag.squaredNorm();
  if (den <= 0.0) return 0.0;
  return past_mag.dot(present_mag) / den;
}

Eigen::VectorXd edo_compute(const Eigen::Ref<const Eigen::VectorXd>& past_mag,
                            const Eigen::Ref<const Eigen::VectorXd>& error_half_mag, double gain,
                            const EdoParams& params) {
  if (past_mag.size() != error_half_mag.size()) throw ConfigError("edo_compute: size mismatch");
  const Eigen::VectorXd present = std::abs(gain) * error_half_mag;

  switch (params.variant) {
    case EdoVariant::Elementwise: {
      Eigen::VectorXd out(past_mag.size());
      for (Eigen::Index n = 0; n < out.size(); ++n) {
        out[n] = present[n] > 0.0 ? past_mag[n] / present[n] : params.r_max;
      }
      return out;
    }
    case EdoVariant::CurveFit: {
      const double past_energy = past_mag.squaredNorm();
      const double cross = past_mag.dot(present);
      double value = params.r_max;
      if (params.literal_fit) {
        if (past_energy > 0.0) value = cross / past_energy;
      } else if (cross > 0.0) {
        value = past_energy / cross;
      }
      return Eigen::VectorXd::Constant(1, value);
    }
    case EdoVariant::MeanRatio: {
      const double den = present.mean();
      return Eigen::VectorXd::Constant(1, den > 0.0 ? past_mag.mean() / den : params.r_max);
    }
  }
  return Eigen::VectorXd::Constant(1, 1.0);
}

double edo_clamp(double edo, const EdoParams& params) {
  return std::max(params.r_min, std::min(params.r_max, edo));
}

Eigen::VectorXd edo_clamp(const Eigen::Ref<const Eigen::VectorXd>& edo, const EdoParams& params) {
  return edo.cwiseMin(params.r_max).cwiseMax(params.r_min);
}

Eigen::MatrixXd edo_step_scale(const PartitionedSpectrum& x_hist, const Spectrum& error_half,
                               double gain, const EdoParams& params) {
  params.validate();
  const Eigen::VectorXd err_mag = error_half.cwiseAbs();
  Eigen::MatrixXd scale(x_hist.bins(), x_hist.partitions());
  for (int m = 0; m < x_hist.partitions(); ++m) {
    const Eigen::VectorXd past = x_hist[m].cwiseAbs();
    const Eigen::VectorXd edo = edo_clamp(edo_compute(past, err_mag, gain, params), params);
    if (edo.size() == 1) {
      scale.col(m).setConstant(edo[0]);
    } else {
      scale.col(m) = edo;
    }
  }
  return scale;
}

}  // namespace afc
