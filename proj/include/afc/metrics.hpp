#pragma once

#include "afc/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

namespace afc {

inline double to_db(double linear) { return 20.0 * std::log10(linear); }
inline double from_db(double db) { return std::pow(10.0, db / 20.0); }

/// Normalized L2 distance ||h - h_hat|| / ||h||. The estimate is truncated or
/// zero-padded to the length of h.
template <typename Derived, typename OtherDerived>
typename Derived::Scalar system_distance(const Eigen::MatrixBase<Derived>& h,
                                         const Eigen::MatrixBase<OtherDerived>& h_hat) {
  using Scalar = typename Derived::Scalar;
  const Scalar ref = h.norm();
  if (!(ref > Scalar(0))) throw ConfigError("system_distance: true response has zero norm");
  const Eigen::Index common = std::min(h.size(), h_hat.size());
  Scalar err2 = (h.head(common) - h_hat.head(common)).squaredNorm();
  if (h.size() > common) err2 += h.tail(h.size() - common).squaredNorm();
  return std::sqrt(err2) / ref;
}

struct SdWindows {
  double early_begin_s = 4.0;
  double early_end_s = 6.0;
  double late_begin_s = 20.0;
  // Open end when negative.
  double late_end_s = -1.0;
};

struct EarlyLate {
  std::optional<double> sd5_db;
  std::optional<double> sd20plus_db;
};

/// Window averages of a per-block system-distance trace (linear values),
/// reported in dB. Block l is stamped at its center time (l + 0.5) hop / fs.
/// sd5 needs at least early_end_s of trace, sd20+ more than late_begin_s.
EarlyLate sd_early_late(const std::vector<double>& sd_trace, double sample_rate, int hop,
                        const SdWindows& windows = {});

inline double block_center_time(std::size_t block, double sample_rate, int hop) {
  return (static_cast<double>(block) + 0.5) * hop / sample_rate;
}

/// Clipped samples over total samples, in percent.
inline double overflow_percent(std::size_t clipped, std::size_t total) {
  return total == 0 ? 0.0 : 100.0 * static_cast<double>(clipped) / static_cast<double>(total);
}

}  // namespace afc
