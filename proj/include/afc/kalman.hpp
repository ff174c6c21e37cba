#pragma once

#include "afc/decorrelate.hpp"
#include "afc/dsp.hpp"
#include "afc/prediction.hpp"

#include <cstddef>

namespace afc {

/// Frequency-domain Kalman parameters. `kalman_alpha` scales the
/// observation-noise PSD in the gain denominator, `delta` is an additive
/// regularization floor, `gamma` smooths the noise PSD estimate and
/// `transition` is the state-transition factor A.
struct KalmanParams {
  double kalman_alpha = 1.0;
  double gamma = 0.1;
  double delta = 0.2;
  double transition = 0.99999;

  void validate() const;
};

/// Partitioned Kalman state. Matrices are N x M, column m belongs to
/// partition m (newest input block first).
struct MdfState {
  Eigen::MatrixXcd h_hat;
  Eigen::MatrixXd p;
  Eigen::VectorXd psi_s;
  PartitionedSpectrum x_hist;        // filtering path
  PartitionedSpectrum x_hist_white;  // adaptation path
  Eigen::VectorXd x_prev_hop;        // older half of the next input block
  std::size_t block = 0;

  /// H = 0, P = 1, psi_s = delta, empty histories.
  static MdfState initial(const MdfConfig& cfg, const KalmanParams& params);
};

/// H <- A H, P <- A^2 P + (1 - A^2) |H|^2 (with H before scaling).
void kalman_predict(MdfState& state, const KalmanParams& params);

/// psi <- (1 - gamma) psi + gamma |E|^2, per bin.
Eigen::VectorXd estimate_noise_psd(const Eigen::Ref<const Eigen::VectorXd>& psi_s,
                                   const Spectrum& error, const KalmanParams& params);

/// Measurement update with the half-segment error spectrum. `step_scale`
/// (N x M, e.g. clamped EDO values) multiplies the gain; pass nullptr for 1.
/// Throws NumericFault if the state turns non-finite.
void kalman_update(MdfState& state, const Spectrum& error_half, const KalmanParams& params,
                   const Eigen::MatrixXd* step_scale, const Transform& fft);

/// Optional extensions applied inside one filter step.
struct AdaptationHooks {
  const EdoParams* edo = nullptr;  // step-size scaling when enabled
  double loop_gain = 1.0;          // linear g relating X_h and E_h
  Prewhitener* prewhitener = nullptr;
  bool adapt = true;               // false freezes H, P and psi_s
};

struct StepOutput {
  Eigen::VectorXd e;      // y - r_hat, hop samples
  Eigen::VectorXd r_hat;  // echo estimate, hop samples
};

/// One hop of the multi-delay Kalman filter: shift in x, filter, subtract,
/// adapt.
StepOutput mdf_step(MdfState& state, const Eigen::Ref<const Eigen::VectorXd>& x_new,
                    const Eigen::Ref<const Eigen::VectorXd>& y_new, const KalmanParams& params,
                    const Transform& fft, const AdaptationHooks& hooks = {});

/// Half-segment spectrum: N/2 zeros followed by the hop samples.
Spectrum half_segment_spectrum(const Eigen::Ref<const Eigen::VectorXd>& hop_samples,
                               const Transform& fft);

/// Owns configuration, transform and state of one filter instance.
class KalmanMdf {
 public:
  KalmanMdf(const MdfConfig& cfg, const KalmanParams& params);

  StepOutput step(const Eigen::Ref<const Eigen::VectorXd>& x_new,
                  const Eigen::Ref<const Eigen::VectorXd>& y_new,
                  const AdaptationHooks& hooks = {});

  /// Current estimate as one impulse response of partitions * hop taps.
  Eigen::VectorXd impulse_response() const;

  const MdfConfig& config() const { return cfg_; }
  const KalmanParams& params() const { return params_; }
  const MdfState& state() const { return state_; }
  MdfState& state() { return state_; }
  const Transform& transform() const { return fft_; }

 private:
  MdfConfig cfg_;
  KalmanParams params_;
  Transform fft_;
  MdfState state_;
};

}  // namespace afc
