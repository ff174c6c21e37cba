#pragma once

#include "afc/dsp.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <deque>
#include <vector>

namespace afc {

enum class PredictionScheme {
  NewestForAll,     // A: h_p(l) for all partitions
  PairwiseCommon,   // B: one predictor per pair of partitions
};

struct PredictionParams {
  bool enabled = false;
  int order = 2;
  PredictionScheme scheme = PredictionScheme::NewestForAll;

  void validate(int block_len) const;
};

template <typename Scalar>
struct Autocorrelation {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lags;
  bool degenerate = false;
};

/// Biased autocorrelation r[j] = sum_k x(k) x(k - j) for j = 0..order, with
/// r[0] loaded by (1 + 1e-9). An all-zero block is flagged degenerate.
template <typename Scalar>
Autocorrelation<Scalar> autocorrelation(
    const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& block, int order) {
  Autocorrelation<Scalar> out;
  out.lags = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(order + 1);
  const Eigen::Index n = block.size();
  for (int j = 0; j <= order && j < n; ++j) {
    out.lags[j] = block.tail(n - j).dot(block.head(n - j));
  }
  out.degenerate = !(out.lags[0] > Scalar(0));
  out.lags[0] *= Scalar(1) + Scalar(1e-9);
  return out;
}

template <typename Scalar>
struct LpcSolution {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector coeffs;          // a[1..Np], prediction x^(k) = sum_j a_j x(k - j)
  Vector reflection;      // k[1..Np], zero past the reached order
  Vector error_by_order;  // prediction-error power for orders 0..Np
  Scalar error = Scalar(0);
  int order_reached = 0;
};

/// Levinson-Durbin recursion on lags r[0..Np]. If a reflection coefficient
/// reaches magnitude 1 the recursion stops at the previous order and the
/// remaining coefficients stay zero.
template <typename Scalar>
LpcSolution<Scalar> levinson_durbin(
    const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& r) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const int order = static_cast<int>(r.size()) - 1;
  LpcSolution<Scalar> sol;
  sol.coeffs = Vector::Zero(std::max(order, 0));
  sol.reflection = Vector::Zero(std::max(order, 0));
  sol.error_by_order = Vector::Zero(std::max(order, 0) + 1);
  if (order < 0 || !(r[0] > Scalar(0))) return sol;

  Scalar err = r[0];
  sol.error_by_order.setConstant(err);
  Vector a = Vector::Zero(order);
  Vector prev(order);
  for (int i = 1; i <= order; ++i) {
    Scalar acc = r[i];
    for (int j = 1; j < i; ++j) acc -= a[j - 1] * r[i - j];
    const Scalar k = acc / err;
    if (!(std::abs(k) < Scalar(1))) break;

    prev = a;
    a[i - 1] = k;
    for (int j = 1; j < i; ++j) a[j - 1] = prev[j - 1] - k * prev[i - j - 1];
    err *= (Scalar(1) - k * k);

    sol.reflection[i - 1] = k;
    sol.order_reached = i;
    sol.error_by_order.tail(order + 1 - i).setConstant(err);
  }
  sol.coeffs = a;
  sol.error = err;
  return sol;
}

/// Prediction-error FIR e(k) = x(k) - sum_j a_j x(k - j). `carry` holds the
/// last Np inputs of the previous call (oldest first) and is updated in place.
Eigen::VectorXd prewhiten(const Eigen::Ref<const Eigen::VectorXd>& block,
                          const Eigen::Ref<const Eigen::VectorXd>& a, Eigen::VectorXd& carry);

/// LPC predictor for one analysis span; zero coefficients when degenerate.
Eigen::VectorXd estimate_predictor(const Eigen::Ref<const Eigen::VectorXd>& span, int order);

/// Recent predictors, newest first, bounded depth.
class PredictorBank {
 public:
  PredictorBank(int order, int depth);

  void push(Eigen::VectorXd coeffs);
  const Eigen::VectorXd& at(int age) const { return entries_.at(static_cast<std::size_t>(age)); }
  int depth() const { return static_cast<int>(entries_.size()); }
  int order() const { return order_; }

 private:
  int order_;
  int capacity_;
  std::deque<Eigen::VectorXd> entries_;
};

/// Predictor for each of `partitions` slots under the given scheme.
std::vector<Eigen::VectorXd> assign_predictors(const PredictorBank& bank, PredictionScheme scheme,
                                               int partitions);

/// Adaptation-path whitening for the partitioned filter. Keeps the input
/// history needed to refilter every partition block with its assigned
/// predictor, and the error history for the matching error whitening.
class Prewhitener {
 public:
  Prewhitener(const PredictionParams& params, const MdfConfig& cfg);

  /// Appends hop new input samples and refreshes the predictor bank.
  void push_input(const Eigen::Ref<const Eigen::VectorXd>& x_new);

  /// Transforms of the predictor-filtered partition blocks.
  PartitionedSpectrum partitions(const Transform& fft) const;

  /// Whitens hop error samples with the predictor of the newest partition.
  Eigen::VectorXd whiten_error(const Eigen::Ref<const Eigen::VectorXd>& e_new);

  const PredictorBank& bank() const { return bank_; }
  std::size_t estimations() const { return estimations_; }

 private:
  PredictionParams params_;
  MdfConfig cfg_;
  PredictorBank bank_;
  Eigen::VectorXd history_;  // newest sample last
  Eigen::VectorXd error_carry_;
  std::size_t pushes_ = 0;
  std::size_t estimations_ = 0;
};

}  // namespace afc
