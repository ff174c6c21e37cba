#include "afc/kalman.hpp"

#include "afc/errors.hpp"

#include <string>

namespace afc {

void KalmanParams::validate() const {
  if (!(transition > 0.0 && transition <= 1.0)) throw ConfigError("transition A must be in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must be in (0, 1]");
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(kalman_alpha > 0.0)) throw ConfigError("kalman_alpha must be positive");
}

MdfState MdfState::initial(const MdfConfig& cfg, const KalmanParams& params) {
  cfg.validate();
  params.validate();
  const int n = cfg.block_len;
  const int m = cfg.partitions;
  MdfState s;
  s.h_hat = Eigen::MatrixXcd::Zero(n, m);
  s.p = Eigen::MatrixXd::Ones(n, m);
  s.psi_s = Eigen::VectorXd::Constant(n, params.delta);
  s.x_hist = PartitionedSpectrum(n, m);
  s.x_hist_white = PartitionedSpectrum(n, m);
  s.x_prev_hop = Eigen::VectorXd::Zero(cfg.hop());
  return s;
}

void kalman_predict(MdfState& state, const KalmanParams& params) {
  const double a = params.transition;
  const double a2 = a * a;
  state.p = a2 * state.p + (1.0 - a2) * state.h_hat.cwiseAbs2();
  state.h_hat *= a;
}

Eigen::VectorXd estimate_noise_psd(const Eigen::Ref<const Eigen::VectorXd>& psi_s,
                                   const Spectrum& error, const KalmanParams& params) {
  return (1.0 - params.gamma) * psi_s + params.gamma * error.cwiseAbs2();
}

void kalman_update(MdfState& state, const Spectrum& error_half, const KalmanParams& params,
                   const Eigen::MatrixXd* step_scale, const Transform& fft) {
  const Eigen::MatrixXcd& xw = state.x_hist_white.matrix();
  const Eigen::Index n = xw.rows();
  const Eigen::Index parts = xw.cols();
  if (error_half.size() != n) throw ConfigError("kalman_update: error spectrum size mismatch");
  if (step_scale && (step_scale->rows() != n || step_scale->cols() != parts)) {
    throw ConfigError("kalman_update: step scale must be N x M");
  }

  const Eigen::VectorXd denom = xw.cwiseAbs2().cwiseProduct(state.p).rowwise().sum() +
                                params.kalman_alpha * state.psi_s +
                                Eigen::VectorXd::Constant(n, params.delta);

  for (Eigen::Index m = 0; m < parts; ++m) {
    Spectrum gain = state.p.col(m).cwiseProduct(xw.col(m).conjugate()).cwiseQuotient(denom.cast<std::complex<double>>());
    if (step_scale) gain = gain.cwiseProduct(step_scale->col(m).cast<std::complex<double>>());

    const Spectrum update = gain.cwiseProduct(error_half);
    state.h_hat.col(m) = gradient_constraint(state.h_hat.col(m) + update, fft);

    const Eigen::VectorXd kx = gain.cwiseProduct(xw.col(m)).real();
    state.p.col(m) = (Eigen::VectorXd::Ones(n) - kx).cwiseProduct(state.p.col(m)).cwiseMax(0.0);
  }

  if (!state.h_hat.allFinite() || !state.p.allFinite() || !state.psi_s.allFinite()) {
    throw NumericFault(state.block, "non-finite Kalman state");
  }
}

Spectrum half_segment_spectrum(const Eigen::Ref<const Eigen::VectorXd>& hop_samples,
                               const Transform& fft) {
  const int hop = fft.size() / 2;
  if (hop_samples.size() != hop) throw ConfigError("half segment needs hop samples");
  TimeBlock t(fft.size());
  t << Eigen::VectorXd::Zero(hop), hop_samples;
  return fft.forward(t);
}

StepOutput mdf_step(MdfState& state, const Eigen::Ref<const Eigen::VectorXd>& x_new,
                    const Eigen::Ref<const Eigen::VectorXd>& y_new, const KalmanParams& params,
                    const Transform& fft, const AdaptationHooks& hooks) {
  const int hop = fft.size() / 2;
  if (x_new.size() != hop || y_new.size() != hop) {
    throw ConfigError("mdf_step: expected " + std::to_string(hop) + " samples per hop");
  }

  TimeBlock block(fft.size());
  block << state.x_prev_hop, x_new;
  state.x_hist.push(fft.forward(block));
  state.x_prev_hop = x_new;

  if (hooks.prewhitener) {
    hooks.prewhitener->push_input(x_new);
    state.x_hist_white = hooks.prewhitener->partitions(fft);
  } else {
    state.x_hist_white = state.x_hist;
  }

  StepOutput out;
  out.r_hat = partitioned_filter(state.x_hist, state.h_hat, fft);
  out.e = y_new - out.r_hat;
  if (!out.e.allFinite()) throw NumericFault(state.block, "non-finite error signal");

  const Eigen::VectorXd e_adapt =
      hooks.prewhitener ? hooks.prewhitener->whiten_error(out.e) : Eigen::VectorXd(out.e);

  if (hooks.adapt) {
    const Spectrum e_half_adapt = half_segment_spectrum(e_adapt, fft);
    state.psi_s = estimate_noise_psd(state.psi_s, e_half_adapt, params);
    kalman_predict(state, params);

    if (hooks.edo && hooks.edo->enabled) {
      const Spectrum e_half = half_segment_spectrum(out.e, fft);
      const Eigen::MatrixXd scale = edo_step_scale(state.x_hist, e_half, hooks.loop_gain, *hooks.edo);
      kalman_update(state, e_half_adapt, params, &scale, fft);
    } else {
      kalman_update(state, e_half_adapt, params, nullptr, fft);
    }
  }
  ++state.block;
  return out;
}

KalmanMdf::KalmanMdf(const MdfConfig& cfg, const KalmanParams& params)
    : cfg_(cfg), params_(params), fft_(cfg.block_len), state_(MdfState::initial(cfg, params)) {}

StepOutput KalmanMdf::step(const Eigen::Ref<const Eigen::VectorXd>& x_new,
                           const Eigen::Ref<const Eigen::VectorXd>& y_new,
                           const AdaptationHooks& hooks) {
  return mdf_step(state_, x_new, y_new, params_, fft_, hooks);
}

Eigen::VectorXd KalmanMdf::impulse_response() const {
  return assemble_impulse_response(state_.h_hat, fft_);
}

}  // namespace afc
