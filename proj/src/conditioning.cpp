#include "afc/conditioning.hpp"

#include "afc/errors.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

namespace afc {

namespace {

// Zeroth-order modified Bessel function of the first kind.
double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = 0.25 * x * x;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

SampleBuffer resample(const SampleBuffer& x, double target_rate) {
  if (!(x.sample_rate > 0.0) || !(target_rate > 0.0)) throw ConfigError("resample: rates must be positive");
  if (x.sample_rate == target_rate) return x;

  const auto in_rate = static_cast<long long>(std::llround(x.sample_rate));
  const auto out_rate = static_cast<long long>(std::llround(target_rate));
  const long long g = std::gcd(in_rate, out_rate);
  const long long up = out_rate / g;
  const long long down = in_rate / g;

  const double low = static_cast<double>(std::min(in_rate, out_rate));
  const double virtual_rate = static_cast<double>(in_rate) * static_cast<double>(up);
  const double pass_edge = 0.45 * low;
  const double stop_edge = 0.5 * low;
  const double cutoff = 0.5 * (pass_edge + stop_edge);
  const double atten_db = 70.0;
  const double beta = 0.1102 * (atten_db - 8.7);
  const double width = 2.0 * std::numbers::pi * (stop_edge - pass_edge) / virtual_rate;
  auto taps = static_cast<long long>(std::ceil((atten_db - 7.95) / (2.285 * width))) + 1;
  if (taps % 2 == 0) ++taps;
  const long long center = (taps - 1) / 2;

  std::vector<double> h(static_cast<std::size_t>(taps));
  const double fc = cutoff / virtual_rate;  // cycles per virtual sample
  const double norm = bessel_i0(beta);
  for (long long q = 0; q < taps; ++q) {
    const double t = static_cast<double>(q - center);
    const double arg = 2.0 * fc * t;
    const double sinc = t == 0.0 ? 1.0 : std::sin(std::numbers::pi * arg) / (std::numbers::pi * arg);
    const double r = t / static_cast<double>(center);
    const double w = bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / norm;
    h[static_cast<std::size_t>(q)] = 2.0 * fc * sinc * w;
  }
  // unit DC gain per polyphase branch
  std::vector<double> branch_sum(static_cast<std::size_t>(up), 0.0);
  for (long long q = 0; q < taps; ++q) branch_sum[static_cast<std::size_t>(q % up)] += h[static_cast<std::size_t>(q)];
  for (long long q = 0; q < taps; ++q) h[static_cast<std::size_t>(q)] /= branch_sum[static_cast<std::size_t>(q % up)];

  const long long in_len = x.samples.size();
  const long long out_len = (in_len * up + down - 1) / down;
  SampleBuffer out;
  out.sample_rate = target_rate;
  out.samples = Eigen::VectorXd::Zero(out_len);
  for (long long j = 0; j < out_len; ++j) {
    const long long pos = j * down + center;  // virtual index of tap 0
    // input i contributes through tap q = pos - i * up, 0 <= q < taps
    long long i_hi = pos / up;
    long long i_lo = pos - taps + 1 <= 0 ? 0 : (pos - taps + 1 + up - 1) / up;
    i_hi = std::min(i_hi, in_len - 1);
    double acc = 0.0;
    for (long long i = i_lo; i <= i_hi; ++i) {
      acc += x.samples[i] * h[static_cast<std::size_t>(pos - i * up)];
    }
    out.samples[j] = acc;
  }
  return out;
}

HighPass::HighPass(double cutoff_hz, double sample_rate) {
  if (!(sample_rate > 0.0)) throw ConfigError("high-pass: sample rate must be positive");
  if (cutoff_hz >= 0.5 * sample_rate) {
    throw ConfigError("high-pass: cutoff " + std::to_string(cutoff_hz) + " Hz is not below fs/2");
  }
  if (cutoff_hz <= 0.0) return;
  active_ = true;
  const double w0 = 2.0 * std::numbers::pi * cutoff_hz / sample_rate;
  const double cw = std::cos(w0);
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double a0 = 1.0 + alpha;
  b0_ = 0.5 * (1.0 + cw) / a0;
  b1_ = -(1.0 + cw) / a0;
  b2_ = b0_;
  a1_ = -2.0 * cw / a0;
  a2_ = (1.0 - alpha) / a0;
}

double HighPass::process(double x) {
  if (!active_) return x;
  const double y = b0_ * x + b1_ * x1_ + b2_ * x2_ - a1_ * y1_ - a2_ * y2_;
  x2_ = x1_;
  x1_ = x;
  y2_ = y1_;
  y1_ = y;
  return y;
}

Eigen::VectorXd low_freq_eq(const Eigen::Ref<const Eigen::VectorXd>& h, double sample_rate,
                            double cutoff_hz) {
  HighPass hp(cutoff_hz, sample_rate);
  Eigen::VectorXd out(h.size());
  for (Eigen::Index k = 0; k < h.size(); ++k) out[k] = hp.process(h[k]);
  return out;
}

double rms(const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() == 0) return 0.0;
  return std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
}

Eigen::VectorXd peak_normalize(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const double peak = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
  if (!(peak > 0.0)) return x;
  return x / peak;
}

Eigen::VectorXd repeat_to_length(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index samples) {
  if (x.size() == 0) throw ConfigError("repeat_to_length: empty signal");
  Eigen::VectorXd out(samples);
  for (Eigen::Index k = 0; k < samples; k += x.size()) {
    const Eigen::Index count = std::min(x.size(), samples - k);
    out.segment(k, count) = x.head(count);
  }
  return out;
}

}  // namespace afc
