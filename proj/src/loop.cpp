#include "afc/loop.hpp"

#include "afc/conditioning.hpp"
#include "afc/errors.hpp"
#include "afc/wav.hpp"

#include <atomic>
#include <cmath>
#include <map>
#include <memory>
#include <thread>
#include <tuple>

namespace afc {

namespace {

// Causal FIR y = h * x, truncated to the length of x.
Eigen::VectorXd convolve_truncated(const Eigen::Ref<const Eigen::VectorXd>& h,
                                   const Eigen::Ref<const Eigen::VectorXd>& x) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const Eigen::Index taps = std::min<Eigen::Index>(h.size(), k + 1);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < taps; ++j) acc += h[j] * x[k - j];
    y[k] = acc;
  }
  return y;
}

}  // namespace

double default_ramp_seconds(double final_db) {
  if (!(final_db > 0.0)) return 0.0;
  if (final_db <= 6.0) return 1.0;
  if (final_db <= 12.0) return 2.0;
  return 10.0;
}

double LoopConfig::effective_ramp() const {
  return ramp_s.value_or(default_ramp_seconds(gain_db));
}

void LoopConfig::validate(const MdfConfig& mdf) const {
  if (fixed_delay < mdf.hop()) {
    throw ConfigError("fixed_delay " + std::to_string(fixed_delay) +
                      " is shorter than one hop (" + std::to_string(mdf.hop()) +
                      "); the block loop needs at least one hop of delay");
  }
  if (effective_ramp() < 0.0) throw ConfigError("ramp_s must be >= 0");
  if (std::isnan(gain_db)) throw ConfigError("gain_db is NaN");
}

void DecorrelationConfig::validate(const MdfConfig& mdf) const {
  vibrato.validate();
  if (distortion.enabled) {
    DistortionParams probe = distortion;
    if (distortion_thd) probe.mix_alpha = 0.5;
    probe.validate();
  }
  if (edo.enabled) edo.validate();
  if (prediction.enabled) {
    prediction.validate(mdf.block_len);
    if (prediction.scheme == PredictionScheme::PairwiseCommon && mdf.partitions % 2 != 0) {
      throw ConfigError("pairwise predictor scheme needs an even partition count");
    }
  }
}

double gain_ramp(double t, double final_db, double ramp_s) {
  if (std::isinf(final_db) && final_db < 0.0) return 0.0;
  if (ramp_s <= 0.0 || t >= ramp_s) return from_db(final_db);
  return from_db(final_db * std::max(t, 0.0) / ramp_s);
}

double measure_coupling_db(const Eigen::Ref<const Eigen::VectorXd>& h,
                           const Eigen::Ref<const Eigen::VectorXd>& s, int fixed_delay) {
  const double s_rms = rms(s);
  if (!(s_rms > 0.0)) throw ConfigError("coupling: speech has zero power");
  if (!(h.squaredNorm() > 0.0)) throw ConfigError("coupling: impulse response has zero power");
  Eigen::VectorXd x = Eigen::VectorXd::Zero(s.size());
  const Eigen::Index delay = std::clamp<Eigen::Index>(fixed_delay, 0, s.size());
  x.tail(s.size() - delay) = s.head(s.size() - delay);
  const double r_rms = rms(convolve_truncated(h, x));
  if (!(r_rms > 0.0)) throw ConfigError("coupling: echo has zero power");
  return to_db(r_rms / s_rms);
}

CouplingCalibration calibrate_coupling(const Eigen::Ref<const Eigen::VectorXd>& h,
                                       const Eigen::Ref<const Eigen::VectorXd>& s,
                                       double target_db, int fixed_delay) {
  CouplingCalibration out;
  out.measured_db = measure_coupling_db(h, s, fixed_delay);
  out.factor = from_db(target_db - out.measured_db);
  out.h = out.factor * h;
  return out;
}

RunResult run_simulation(const SampleBuffer& speech, const Eigen::Ref<const Eigen::VectorXd>& h,
                         const LoopConfig& loop, const MdfConfig& mdf, const KalmanParams& kalman,
                         const DecorrelationConfig& decorrelation) {
  mdf.validate();
  kalman.validate();
  loop.validate(mdf);
  decorrelation.validate(mdf);
  if (speech.sample_rate != mdf.sample_rate) {
    throw ConfigError("speech sample rate " + std::to_string(speech.sample_rate) +
                      " differs from filter rate " + std::to_string(mdf.sample_rate));
  }
  if (h.size() == 0) throw ConfigError("impulse response is empty");
  // an all-zero room has no normalized distance; the trace then holds ||h_hat||
  const bool open_room = !(h.squaredNorm() > 0.0);

  const double fs = mdf.sample_rate;
  const int hop = mdf.hop();

  RunResult res;
  res.loop = loop;
  res.mdf = mdf;
  res.kalman = kalman;
  res.decorrelation = decorrelation;

  Eigen::VectorXd s = peak_normalize(speech.samples);
  if (loop.duration_s > 0.0) {
    s = repeat_to_length(s, static_cast<Eigen::Index>(std::llround(loop.duration_s * fs)));
  }
  const Eigen::Index blocks = s.size() / hop;
  const Eigen::Index total = blocks * hop;
  s.conservativeResize(total);

  // forward path
  Vibrato vibrato(decorrelation.vibrato, fs);
  DistortionParams dist = decorrelation.distortion;
  if (dist.enabled) {
    if (decorrelation.distortion_thd) {
      dist.mix_alpha = calibrate_alpha(dist.curve, *decorrelation.distortion_thd);
    }
    dist.sc = calibrate_sc(s, dist);
  }
  res.distortion_sc = dist.sc;
  res.distortion_alpha = dist.enabled ? dist.mix_alpha : 0.0;
  Distortion distortion(dist);
  const double threshold = from_db(loop.limiter_headroom_db);
  const double ramp = loop.effective_ramp();

  KalmanMdf filter(mdf, kalman);
  std::unique_ptr<Prewhitener> whitener;
  if (decorrelation.prediction.enabled) {
    whitener = std::make_unique<Prewhitener>(decorrelation.prediction, mdf);
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(total);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(total);
  res.sd_trace.reserve(static_cast<std::size_t>(blocks));

  Eigen::Index done = 0;
  try {
    for (Eigen::Index l = 0; l < blocks; ++l) {
      const Eigen::Index begin = l * hop;
      double g_block = 0.0;
      for (Eigen::Index k = begin; k < begin + hop; ++k) {
        double u = k >= loop.fixed_delay ? e[k - loop.fixed_delay] : 0.0;
        u = vibrato.process(u);
        u = distortion.process(u);
        g_block = gain_ramp(static_cast<double>(k) / fs, loop.gain_db, ramp);
        const double level = loop.limiter_tracks_gain ? threshold * g_block : threshold;
        const LimiterOutput lim = hard_limiter(g_block * u, level);
        if (lim.clipped) ++res.overflow_count;
        x[k] = lim.value;
      }

      Eigen::VectorXd y(hop);
      for (Eigen::Index k = begin; k < begin + hop; ++k) {
        const Eigen::Index taps = std::min<Eigen::Index>(h.size(), k + 1);
        double r = 0.0;
        for (Eigen::Index j = 0; j < taps; ++j) r += h[j] * x[k - j];
        y[k - begin] = s[k] + r;
      }
      if (!y.allFinite()) throw NumericFault(static_cast<std::size_t>(l), "non-finite microphone signal");

      AdaptationHooks hooks;
      hooks.edo = decorrelation.edo.enabled ? &decorrelation.edo : nullptr;
      hooks.loop_gain = g_block;
      hooks.prewhitener = whitener.get();
      const StepOutput out = filter.step(x.segment(begin, hop), y, hooks);
      e.segment(begin, hop) = out.e;

      const Eigen::VectorXd h_hat = filter.impulse_response();
      res.sd_trace.push_back(open_room ? h_hat.norm() : system_distance(h, h_hat));
      done = l + 1;
    }
  } catch (const NumericFault& fault) {
    res.fault_block = fault.block();
    res.fault = fault.what();
  }

  const Eigen::Index kept = done * hop;
  res.total_samples = static_cast<std::size_t>(kept);
  res.s_signal = SampleBuffer{s.head(kept), fs};
  res.e_signal = SampleBuffer{e.head(kept), fs};
  res.x_signal = SampleBuffer{x.head(kept), fs};
  return res;
}

// ---------------------------------------------------------------------------

SampleBuffer prepare_speech(const SampleBuffer& raw, double sample_rate, double duration_s) {
  SampleBuffer s = resample(raw, sample_rate);
  s.samples = peak_normalize(s.samples);
  if (duration_s > 0.0) {
    s.samples = repeat_to_length(s.samples, static_cast<Eigen::Index>(std::llround(duration_s * sample_rate)));
  }
  return s;
}

Eigen::VectorXd prepare_ir(const SampleBuffer& raw, double sample_rate, double eq_cutoff_hz) {
  const SampleBuffer h = resample(raw, sample_rate);
  return low_freq_eq(h.samples, sample_rate, eq_cutoff_hz);
}

std::size_t MatrixResult::failures() const {
  std::size_t n = 0;
  for (const auto& row : rows) n += row.failed() ? 1 : 0;
  return n;
}

std::vector<AggregateRow> aggregate(const std::vector<MatrixRow>& rows) {
  struct Acc {
    std::size_t count = 0;
    double sd5 = 0.0, sd20 = 0.0, overflow = 0.0;
    std::size_t n5 = 0, n20 = 0;
  };
  std::map<std::tuple<std::string, double, std::string>, Acc> groups;
  std::vector<std::tuple<std::string, double, std::string>> order;
  for (const auto& row : rows) {
    if (row.failed() || !row.result) continue;
    const auto key = std::make_tuple(row.variant, row.gain_db, row.speaker);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    Acc& acc = it->second;
    ++acc.count;
    acc.overflow += row.result->overflow_pct();
    if (row.sd.sd5_db) {
      acc.sd5 += from_db(*row.sd.sd5_db);
      ++acc.n5;
    }
    if (row.sd.sd20plus_db) {
      acc.sd20 += from_db(*row.sd.sd20plus_db);
      ++acc.n20;
    }
  }
  std::vector<AggregateRow> out;
  for (const auto& key : order) {
    const Acc& acc = groups.at(key);
    AggregateRow agg;
    std::tie(agg.variant, agg.gain_db, agg.speaker) = key;
    agg.count = acc.count;
    agg.overflow_pct = acc.overflow / static_cast<double>(acc.count);
    if (acc.n5) agg.sd5_db = to_db(acc.sd5 / static_cast<double>(acc.n5));
    if (acc.n20) agg.sd20plus_db = to_db(acc.sd20 / static_cast<double>(acc.n20));
    out.push_back(std::move(agg));
  }
  return out;
}

MatrixResult run_matrix(const std::vector<SpeechItem>& speech, const std::vector<IrItem>& irs,
                        const std::vector<double>& gains_db, const std::vector<Variant>& variants,
                        const MatrixOptions& options) {
  if (speech.empty() || irs.empty() || gains_db.empty() || variants.empty()) {
    throw ConfigError("run_matrix: every input set must be non-empty");
  }
  const double fs = options.mdf.sample_rate;

  MatrixResult result;
  for (const auto& sp : speech) {
    for (const auto& ir : irs) {
      for (double g : gains_db) {
        for (const auto& v : variants) {
          MatrixRow row;
          row.ordinal = result.rows.size();
          row.speech_id = sp.id;
          row.speaker = sp.speaker;
          row.ir_id = ir.id;
          row.variant = v.name;
          row.gain_db = g;
          result.rows.push_back(std::move(row));
        }
      }
    }
  }

  // inputs are loaded once per file; each worker only reads them
  std::vector<std::optional<SampleBuffer>> speech_data(speech.size());
  std::vector<std::string> speech_err(speech.size());
  for (std::size_t i = 0; i < speech.size(); ++i) {
    try {
      const SampleBuffer raw = speech[i].audio ? *speech[i].audio : read_wav(speech[i].path);
      speech_data[i] = prepare_speech(raw, fs, options.target_duration_s);
    } catch (const std::exception& ex) {
      speech_err[i] = ex.what();
    }
  }
  std::vector<std::optional<Eigen::VectorXd>> ir_data(irs.size());
  std::vector<std::string> ir_err(irs.size());
  for (std::size_t i = 0; i < irs.size(); ++i) {
    try {
      const SampleBuffer raw = irs[i].audio ? *irs[i].audio : read_wav(irs[i].path);
      ir_data[i] = prepare_ir(raw, fs, options.eq_cutoff_hz);
    } catch (const std::exception& ex) {
      ir_err[i] = ex.what();
    }
  }

  const std::size_t per_speech = irs.size() * gains_db.size() * variants.size();
  const std::size_t per_ir = gains_db.size() * variants.size();

  auto run_row = [&](MatrixRow& row) {
    const std::size_t si = row.ordinal / per_speech;
    const std::size_t ii = (row.ordinal % per_speech) / per_ir;
    const std::size_t vi = row.ordinal % variants.size();
    if (!speech_data[si]) {
      row.error = "speech " + speech[si].id + ": " + speech_err[si];
      return;
    }
    if (!ir_data[ii]) {
      row.error = "ir " + irs[ii].id + ": " + ir_err[ii];
      return;
    }
    try {
      LoopConfig loop = options.loop;
      loop.gain_db = row.gain_db;
      loop.duration_s = 0.0;  // speech already repeated to the target length
      const SampleBuffer& s = *speech_data[si];
      const auto coupling = calibrate_coupling(*ir_data[ii], s.samples, loop.coupling_db, loop.fixed_delay);
      RunResult run = run_simulation(s, coupling.h, loop, options.mdf, options.kalman,
                                     variants[vi].decorrelation);
      row.sd = sd_early_late(run.sd_trace, fs, options.mdf.hop(), options.windows);
      if (!run.ok()) row.error = run.fault;
      row.result = std::move(run);
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
  };

  const int threads = std::max(1, options.threads);
  if (threads == 1) {
    for (auto& row : result.rows) run_row(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < result.rows.size(); i = next++) run_row(result.rows[i]);
      });
    }
  }

  result.aggregates = aggregate(result.rows);
  return result;
}

}  // namespace afc
