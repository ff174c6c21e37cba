#pragma once

#include "afc/dsp.hpp"

namespace afc {

/// Rational polyphase resampler with a Kaiser-windowed sinc prototype
/// (passband to 0.45 of the lower rate, >= 70 dB stopband from its Nyquist
/// frequency). Each polyphase branch has unit DC gain. Equal rates return the
/// input unchanged.
SampleBuffer resample(const SampleBuffer& x, double target_rate);

/// Streaming second-order Butterworth high-pass (RBJ biquad, Q = 1/sqrt(2)).
/// Cutoff <= 0 gives a passthrough; cutoff >= fs/2 throws.
class HighPass {
 public:
  HighPass() = default;
  HighPass(double cutoff_hz, double sample_rate);

  double process(double x);
  void reset() { x1_ = x2_ = y1_ = y2_ = 0.0; }

 private:
  bool active_ = false;
  double b0_ = 1, b1_ = 0, b2_ = 0, a1_ = 0, a2_ = 0;
  double x1_ = 0, x2_ = 0, y1_ = 0, y2_ = 0;
};

/// Second-order Butterworth high-pass at `cutoff_hz` applied to an impulse
/// response. Cutoff <= 0 returns h unchanged; cutoff >= fs/2 throws.
Eigen::VectorXd low_freq_eq(const Eigen::Ref<const Eigen::VectorXd>& h, double sample_rate,
                            double cutoff_hz = 100.0);

double rms(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Scales so the largest magnitude is 1. Silent input is returned as is.
Eigen::VectorXd peak_normalize(const Eigen::Ref<const Eigen::VectorXd>& x);

/// Repeats x end to end until `samples` long (truncating the last copy).
Eigen::VectorXd repeat_to_length(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Index samples);

}  // namespace afc
