#include "afc/metrics.hpp"

namespace afc {

EarlyLate sd_early_late(const std::vector<double>& sd_trace, double sample_rate, int hop,
                        const SdWindows& windows) {
  EarlyLate out;
  const double duration = static_cast<double>(sd_trace.size()) * hop / sample_rate;

  auto window_mean = [&](double begin, double end, bool closed_begin) -> std::optional<double> {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t l = 0; l < sd_trace.size(); ++l) {
      const double t = block_center_time(l, sample_rate, hop);
      const bool after = closed_begin ? t >= begin : t > begin;
      const bool before = end < 0.0 || t <= end;
      if (after && before) {
        sum += sd_trace[l];
        ++count;
      }
    }
    if (count == 0) return std::nullopt;
    return to_db(sum / static_cast<double>(count));
  };

  if (duration >= windows.early_end_s) {
    out.sd5_db = window_mean(windows.early_begin_s, windows.early_end_s, true);
  }
  if (duration > windows.late_begin_s) {
    out.sd20plus_db = window_mean(windows.late_begin_s, windows.late_end_s, false);
  }
  return out;
}

}  // namespace afc
