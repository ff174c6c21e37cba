#include "afc/prediction.hpp"

#include "afc/errors.hpp"

#include <string>

namespace afc {

void PredictionParams::validate(int block_len) const {
  if (order < 1) throw ConfigError("prediction order must be >= 1");
  if (order >= block_len / 2) {
    throw ConfigError("prediction order " + std::to_string(order) + " too large for blocks of " +
                      std::to_string(block_len));
  }
}

Eigen::VectorXd prewhiten(const Eigen::Ref<const Eigen::VectorXd>& block,
                          const Eigen::Ref<const Eigen::VectorXd>& a, Eigen::VectorXd& carry) {
  const Eigen::Index order = a.size();
  if (carry.size() != order) carry = Eigen::VectorXd::Zero(order);

  // past inputs followed by the block, so x(k - j) is a plain index
  Eigen::VectorXd ext(order + block.size());
  ext << carry, block;
  Eigen::VectorXd out(block.size());
  for (Eigen::Index k = 0; k < block.size(); ++k) {
    double v = ext[order + k];
    for (Eigen::Index j = 1; j <= order; ++j) v -= a[j - 1] * ext[order + k - j];
    out[k] = v;
  }
  carry = ext.tail(order);
  return out;
}

Eigen::VectorXd estimate_predictor(const Eigen::Ref<const Eigen::VectorXd>& span, int order) {
  const auto ac = autocorrelation<double>(span, order);
  if (ac.degenerate) return Eigen::VectorXd::Zero(order);
  return levinson_durbin<double>(ac.lags).coeffs;
}

PredictorBank::PredictorBank(int order, int depth) : order_(order), capacity_(depth) {
  for (int i = 0; i < depth; ++i) entries_.push_back(Eigen::VectorXd::Zero(order));
}

void PredictorBank::push(Eigen::VectorXd coeffs) {
  if (coeffs.size() != order_) throw ConfigError("predictor order mismatch");
  entries_.push_front(std::move(coeffs));
  while (static_cast<int>(entries_.size()) > capacity_) entries_.pop_back();
}

std::vector<Eigen::VectorXd> assign_predictors(const PredictorBank& bank, PredictionScheme scheme,
                                               int partitions) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(partitions));
  switch (scheme) {
    case PredictionScheme::NewestForAll:
      if (bank.depth() < 1) throw ConfigError("predictor bank is empty");
      for (int m = 0; m < partitions; ++m) out.push_back(bank.at(0));
      break;
    case PredictionScheme::PairwiseCommon:
      if (partitions % 2 != 0) {
        throw ConfigError("pairwise predictor scheme needs an even partition count, got " +
                          std::to_string(partitions));
      }
      if (bank.depth() < partitions / 2) throw ConfigError("predictor bank too shallow");
      for (int m = 0; m < partitions; ++m) out.push_back(bank.at(m / 2));
      break;
  }
  return out;
}

Prewhitener::Prewhitener(const PredictionParams& params, const MdfConfig& cfg)
    : params_(params), cfg_(cfg), bank_(params.order, std::max(cfg.partitions, 1)) {
  cfg_.validate();
  params_.validate(cfg_.block_len);
  if (params_.scheme == PredictionScheme::PairwiseCommon && cfg_.partitions % 2 != 0) {
    throw ConfigError("pairwise predictor scheme needs an even partition count");
  }
  history_ = Eigen::VectorXd::Zero((cfg_.partitions + 1) * cfg_.hop() + params_.order);
  error_carry_ = Eigen::VectorXd::Zero(params_.order);
}

void Prewhitener::push_input(const Eigen::Ref<const Eigen::VectorXd>& x_new) {
  const Eigen::Index hop = cfg_.hop();
  if (x_new.size() != hop) throw ConfigError("push_input: expected hop samples");
  const Eigen::Index keep = history_.size() - hop;
  history_.head(keep) = history_.tail(keep).eval();
  history_.tail(hop) = x_new;

  switch (params_.scheme) {
    case PredictionScheme::NewestForAll:
      bank_.push(estimate_predictor(history_.tail(cfg_.block_len), params_.order));
      ++estimations_;
      break;
    case PredictionScheme::PairwiseCommon:
      // joint span of the two newest partition blocks, every second hop
      if (pushes_ % 2 == 0) {
        bank_.push(estimate_predictor(history_.tail(cfg_.block_len + hop), params_.order));
        ++estimations_;
      }
      break;
  }
  ++pushes_;
}

PartitionedSpectrum Prewhitener::partitions(const Transform& fft) const {
  const int n = cfg_.block_len;
  const int hop = cfg_.hop();
  const int order = params_.order;
  const auto predictors = assign_predictors(bank_, params_.scheme, cfg_.partitions);

  PartitionedSpectrum out(n, cfg_.partitions);
  const Eigen::Index total = history_.size();
  for (int m = 0; m < cfg_.partitions; ++m) {
    const Eigen::Index start = total - static_cast<Eigen::Index>(m) * hop - n;
    Eigen::VectorXd carry = history_.segment(start - order, order);
    const Eigen::VectorXd white = prewhiten(history_.segment(start, n), predictors[m], carry);
    out.matrix().col(m) = fft.forward(white);
  }
  return out;
}

Eigen::VectorXd Prewhitener::whiten_error(const Eigen::Ref<const Eigen::VectorXd>& e_new) {
  const auto predictors = assign_predictors(bank_, params_.scheme, cfg_.partitions);
  return prewhiten(e_new, predictors.front(), error_carry_);
}

}  // namespace afc
