#include "afc/conditioning.hpp"
#include "afc/errors.hpp"
#include "afc/metrics.hpp"
#include "afc/report.hpp"
#include "afc/wav.hpp"

#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace {

using namespace afc;
namespace fs = std::filesystem;

Eigen::VectorXd noise(Eigen::Index n, unsigned seed, double sigma = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "afc_unit_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Minimal little-endian WAV writer for integer PCM fixtures.
void put(std::vector<std::uint8_t>& b, std::uint32_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::vector<std::uint8_t> pcm_wav(int bits, int channels, std::uint32_t rate,
                                  const std::vector<std::int32_t>& interleaved) {
  const int bps = bits / 8;
  const auto data_len = static_cast<std::uint32_t>(interleaved.size() * bps);
  std::vector<std::uint8_t> b;
  for (char c : std::string("RIFF")) b.push_back(static_cast<std::uint8_t>(c));
  put(b, 36 + data_len, 4);
  for (char c : std::string("WAVEfmt ")) b.push_back(static_cast<std::uint8_t>(c));
  put(b, 16, 4);
  put(b, 1, 2);
  put(b, static_cast<std::uint32_t>(channels), 2);
  put(b, rate, 4);
  put(b, rate * channels * bps, 4);
  put(b, static_cast<std::uint32_t>(channels * bps), 2);
  put(b, static_cast<std::uint32_t>(bits), 2);
  for (char c : std::string("data")) b.push_back(static_cast<std::uint8_t>(c));
  put(b, data_len, 4);
  for (std::int32_t v : interleaved) put(b, static_cast<std::uint32_t>(v), bps);
  return b;
}

void dump(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

double tone_amplitude(const Eigen::VectorXd& x, double freq, double fs) {
  double c = 0.0, s = 0.0;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    c += x[k] * std::cos(2.0 * M_PI * freq * k / fs);
    s += x[k] * std::sin(2.0 * M_PI * freq * k / fs);
  }
  return 2.0 * std::hypot(c, s) / static_cast<double>(x.size());
}

// |H(f)| of a short FIR by direct evaluation.
double fir_gain(const Eigen::VectorXd& h, double freq, double fs) {
  std::complex<double> acc = 0.0;
  for (Eigen::Index k = 0; k < h.size(); ++k) acc += h[k] * std::polar(1.0, -2.0 * M_PI * freq * k / fs);
  return std::abs(acc);
}

TEST(SystemDistance, Examples) {
  const Eigen::VectorXd h = noise(64, 1);
  EXPECT_EQ(system_distance(h, h), 0.0);
  EXPECT_DOUBLE_EQ(system_distance(h, Eigen::VectorXd::Zero(64)), 1.0);
  EXPECT_NEAR(system_distance(Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.9, 0.1)), std::sqrt(0.02), 1e-15);
  EXPECT_THROW(system_distance(Eigen::VectorXd::Zero(4), h.head(4)), ConfigError);
}

TEST(SystemDistance, ScaleAware) {
  const Eigen::VectorXd h = noise(128, 2);
  for (double c : {0.0, 0.5, 0.9, 1.1, 2.0, -1.0}) {
    EXPECT_NEAR(system_distance(h, (c * h).eval()), std::abs(1.0 - c), 1e-14);
  }
}

TEST(SystemDistance, LengthMismatch) {
  const Eigen::VectorXd h = noise(100, 3);
  Eigen::VectorXd longer = Eigen::VectorXd::Zero(150);
  longer.head(100) = h;
  longer.tail(50).setOnes();  // beyond the true length, ignored
  EXPECT_EQ(system_distance(h, longer), 0.0);
  EXPECT_NEAR(system_distance(h, h.head(50).eval()), h.tail(50).norm() / h.norm(), 1e-15);
}

TEST(SdWindowsTest, ConstantTrace) {
  const std::vector<double> trace(2000, 0.1);
  const auto w = sd_early_late(trace, 16000.0, 256);
  EXPECT_NEAR(*w.sd5_db, -20.0, 1e-12);
  EXPECT_NEAR(*w.sd20plus_db, -20.0, 1e-12);
}

TEST(SdWindowsTest, ShortTraceHasNoWindows) {
  const std::vector<double> trace(3 * 62, 0.1);  // under 4 s
  const auto w = sd_early_late(trace, 16000.0, 256);
  EXPECT_FALSE(w.sd5_db.has_value());
  EXPECT_FALSE(w.sd20plus_db.has_value());
  const std::vector<double> mid(10 * 62, 0.1);
  const auto m = sd_early_late(mid, 16000.0, 256);
  EXPECT_TRUE(m.sd5_db.has_value());
  EXPECT_FALSE(m.sd20plus_db.has_value());
}

TEST(SdWindowsTest, StepTrace) {
  std::vector<double> trace;
  for (std::size_t l = 0; l < 30 * 16000 / 256; ++l) {
    trace.push_back(block_center_time(l, 16000.0, 256) < 10.0 ? 1.0 : 0.01);
  }
  const auto w = sd_early_late(trace, 16000.0, 256);
  EXPECT_NEAR(*w.sd5_db, 0.0, 1e-12);
  EXPECT_NEAR(*w.sd20plus_db, -40.0, 1e-12);
}

TEST(SdWindowsTest, LateWindowEnd) {
  std::vector<double> trace(40 * 62, 0.01);
  for (std::size_t l = 30 * 62; l < trace.size(); ++l) trace[l] = 1.0;
  SdWindows w;
  w.late_end_s = 28.0;
  EXPECT_NEAR(*sd_early_late(trace, 16000.0, 256, w).sd20plus_db, -40.0, 1e-12);
  EXPECT_GT(*sd_early_late(trace, 16000.0, 256).sd20plus_db, -40.0);
}

TEST(Overflow, Percent) {
  EXPECT_EQ(overflow_percent(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(overflow_percent(5, 1000), 0.5);
}

TEST(Wav, FloatRoundTrip) {
  Eigen::VectorXd x = noise(5000, 4, 0.3);
  x = x.cast<float>().cast<double>();  // float WAV stores floats
  const fs::path p = scratch("round.wav");
  write_wav(p, {x, 22050.0});
  const SampleBuffer back = read_wav(p);
  EXPECT_EQ(back.sample_rate, 22050.0);
  EXPECT_EQ(back.samples, x);
}

TEST(Wav, Pcm16Scaling) {
  const fs::path p = scratch("pcm16.wav");
  dump(p, pcm_wav(16, 1, 8000, {-32768, 0, 16384, 32767}));
  const SampleBuffer b = read_wav(p);
  ASSERT_EQ(b.size(), 4);
  EXPECT_EQ(b.sample_rate, 8000.0);
  EXPECT_EQ(b.samples[0], -1.0);
  EXPECT_EQ(b.samples[1], 0.0);
  EXPECT_EQ(b.samples[2], 0.5);
  EXPECT_EQ(b.samples[3], 32767.0 / 32768.0);
}

TEST(Wav, Pcm24And32) {
  const fs::path p24 = scratch("pcm24.wav");
  dump(p24, pcm_wav(24, 1, 16000, {-8388608, 4194304}));
  const SampleBuffer b24 = read_wav(p24);
  EXPECT_EQ(b24.samples[0], -1.0);
  EXPECT_EQ(b24.samples[1], 0.5);
  const fs::path p32 = scratch("pcm32.wav");
  dump(p32, pcm_wav(32, 1, 16000, {INT32_MIN, 1 << 29}));
  const SampleBuffer b32 = read_wav(p32);
  EXPECT_EQ(b32.samples[0], -1.0);
  EXPECT_EQ(b32.samples[1], 0.25);
}

TEST(Wav, Pcm8Unsigned) {
  const fs::path p = scratch("pcm8.wav");
  dump(p, pcm_wav(8, 1, 16000, {0, 128, 192}));
  const SampleBuffer b = read_wav(p);
  EXPECT_EQ(b.samples, Eigen::Vector3d(-1.0, 0.0, 0.5));
}

TEST(Wav, StereoTakesFirstChannel) {
  const fs::path p = scratch("stereo.wav");
  dump(p, pcm_wav(16, 2, 16000, {16384, -1, -16384, -1, 0, -1}));
  const SampleBuffer b = read_wav(p);
  ASSERT_EQ(b.size(), 3);
  EXPECT_EQ(b.samples[0], 0.5);
  EXPECT_EQ(b.samples[1], -0.5);
  EXPECT_EQ(b.samples[2], 0.0);
}

TEST(Wav, MalformedInput) {
  EXPECT_THROW(read_wav(scratch("does_not_exist.wav")), IoError);

  auto bytes = pcm_wav(16, 1, 16000, {1, 2, 3});
  bytes[0] = 'X';
  dump(scratch("bad_tag.wav"), bytes);
  try {
    read_wav(scratch("bad_tag.wav"));
    FAIL() << "expected IoError";
  } catch (const IoError& err) {
    EXPECT_NE(std::string(err.what()).find("offset 0"), std::string::npos) << err.what();
  }

  auto truncated = pcm_wav(16, 1, 16000, {1, 2, 3});
  truncated.resize(30);
  dump(scratch("truncated.wav"), truncated);
  EXPECT_THROW(read_wav(scratch("truncated.wav")), IoError);

  auto odd_bits = pcm_wav(16, 1, 16000, {1, 2});
  odd_bits[34] = 12;  // bits per sample
  dump(scratch("twelve_bit.wav"), odd_bits);
  EXPECT_THROW(read_wav(scratch("twelve_bit.wav")), IoError);
}

TEST(Resample, SameRatePassthrough) {
  const SampleBuffer x{noise(1000, 5), 16000.0};
  EXPECT_EQ(resample(x, 16000.0).samples, x.samples);
}

TEST(Resample, ToneKeepsAmplitude) {
  const double src = 48000.0;
  Eigen::VectorXd x(48000);
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = 0.8 * std::sin(2.0 * M_PI * 1000.0 * k / src);
  const SampleBuffer y = resample({x, src}, 16000.0);
  EXPECT_EQ(y.sample_rate, 16000.0);
  EXPECT_NEAR(static_cast<double>(y.size()), 16000.0, 2.0);
  // skip the filter edges
  const Eigen::VectorXd mid = y.samples.segment(1000, 14000);
  EXPECT_NEAR(to_db(tone_amplitude(mid, 1000.0, 16000.0) / 0.8), 0.0, 0.1);
}

TEST(Resample, RejectsAliasedTone) {
  Eigen::VectorXd x(48000);
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = std::sin(2.0 * M_PI * 12000.0 * k / 48000.0);
  const SampleBuffer y = resample({x, 48000.0}, 16000.0);
  // 12 kHz would fold to 4 kHz
  EXPECT_LT(to_db(tone_amplitude(y.samples.segment(1000, 14000), 4000.0, 16000.0)), -60.0);
}

TEST(Resample, DcPreserved) {
  for (double src : {44100.0, 48000.0, 8000.0}) {
    const SampleBuffer y = resample({Eigen::VectorXd::Constant(static_cast<Eigen::Index>(src), 0.3), src}, 16000.0);
    const Eigen::VectorXd mid = y.samples.segment(200, y.size() - 400);
    EXPECT_LT((mid.array() - 0.3).abs().maxCoeff(), 1e-6) << src;
  }
}

TEST(LowFreqEq, CutoffIsMinus3dB) {
  Eigen::VectorXd impulse = Eigen::VectorXd::Zero(16000);
  impulse[0] = 1.0;
  const Eigen::VectorXd h = low_freq_eq(impulse, 16000.0, 100.0);
  EXPECT_NEAR(to_db(fir_gain(h, 100.0, 16000.0)), -3.0, 0.5);
  EXPECT_NEAR(to_db(fir_gain(h, 2000.0, 16000.0)), 0.0, 0.05);
  EXPECT_LT(to_db(fir_gain(h, 25.0, 16000.0)), -20.0);
}

TEST(LowFreqEq, VanishingCutoffPassesThrough) {
  const Eigen::VectorXd h = noise(512, 6);
  EXPECT_EQ(low_freq_eq(h, 16000.0, 0.0), h);
  const Eigen::VectorXd tiny = low_freq_eq(h, 16000.0, 1.0);
  for (double f : {50.0, 200.0, 1000.0, 5000.0}) {
    EXPECT_NEAR(to_db(fir_gain(tiny, f, 16000.0) / fir_gain(h, f, 16000.0)), 0.0, 0.1) << f;
  }
}

TEST(LowFreqEq, RemovesDc) {
  Eigen::VectorXd h = noise(1024, 7).cwiseAbs();  // strong DC
  for (int k = 0; k < 1024; ++k) h[k] *= std::exp(-k / 100.0);
  Eigen::VectorXd padded = Eigen::VectorXd::Zero(16000);
  padded.head(1024) = h;
  const Eigen::VectorXd out = low_freq_eq(padded, 16000.0, 100.0);
  EXPECT_LT(std::abs(out.sum()), 1e-3 * out.lpNorm<1>());
}

TEST(LowFreqEq, CutoffAboveNyquistRejected) {
  EXPECT_THROW(low_freq_eq(Eigen::VectorXd::Ones(10), 16000.0, 8000.0), ConfigError);
  EXPECT_THROW(HighPass(9000.0, 16000.0), ConfigError);
}

TEST(Conditioning, Helpers) {
  EXPECT_DOUBLE_EQ(rms(Eigen::Vector4d(1, -1, 1, -1)), 1.0);
  const Eigen::VectorXd p = peak_normalize(Eigen::Vector3d(0.5, -2.0, 1.0));
  EXPECT_EQ(p, Eigen::Vector3d(0.25, -1.0, 0.5));
  EXPECT_EQ(peak_normalize(Eigen::VectorXd::Zero(3)), Eigen::VectorXd::Zero(3));
  const Eigen::VectorXd r = repeat_to_length(Eigen::Vector3d(1, 2, 3), 7);
  Eigen::VectorXd want(7);
  want << 1, 2, 3, 1, 2, 3, 1;
  EXPECT_EQ(r, want);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-20.0), "-20");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng);
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

MetricsReport sample_report(std::size_t ordinal) {
  MetricsReport r;
  r.ordinal = ordinal;
  r.speech_id = "sent, \"quoted\"";
  r.speaker = "female";
  r.ir_id = "ir\nwith newline";
  r.variant = "vib+pred";
  r.gain_db = 30.0;
  r.vibrato = true;
  r.prediction = true;
  r.sd5_db = -7.123456789012345;
  r.sd20plus_db = std::nullopt;
  r.overflow_pct = 0.1;
  r.overflow_count = 672;
  r.total_samples = 672000;
  r.blocks = 2625;
  return r;
}

TEST(ReportCsv, EmptyIsHeaderOnly) {
  const fs::path p = scratch("empty.csv");
  write_report_csv({}, p);
  std::string header;
  for (std::size_t i = 0; i < report_columns().size(); ++i) header += (i ? "," : "") + report_columns()[i];
  EXPECT_EQ(slurp(p), header + "\n");
  EXPECT_TRUE(read_report_csv(p).empty());
}

TEST(ReportCsv, RoundTrip) {
  std::vector<MetricsReport> rows{sample_report(0), sample_report(1)};
  rows[1].status = "failed";
  rows[1].error = "ir missing: cannot open x.wav";
  rows[1].sd5_db.reset();
  const fs::path p = scratch("rows.csv");
  write_report_csv(rows, p);
  EXPECT_EQ(read_report_csv(p), rows);
}

TEST(ReportCsv, BadHeaderRejected) {
  const fs::path p = scratch("bad.csv");
  std::ofstream(p) << "a,b\n1,2\n";
  EXPECT_THROW(read_report_csv(p), IoError);
}

TEST(TraceCsv, OneLinePerBlock) {
  const std::vector<double> trace{1.0, 0.1, 0.01};
  const fs::path p = scratch("trace.csv");
  write_trace_csv(trace, 16000.0, 256, p);
  EXPECT_EQ(slurp(p), "block,time_s,sd_db\n0,0.008,0\n1,0.024,-20\n2,0.04,-40\n");
}

TEST(Svg, WritesPolylinePerSeries) {
  const fs::path p = scratch("plot.svg");
  write_sd_svg({{"a", {1.0, 0.5}}, {"b", {0.1, 0.01}}}, 16000.0, 256, "gain 30 dB", p);
  const std::string text = slurp(p);
  EXPECT_EQ(text.rfind("<svg", 0), 0u);
  std::size_t count = 0;
  for (std::size_t at = text.find("<polyline"); at != std::string::npos; at = text.find("<polyline", at + 1)) ++count;
  EXPECT_EQ(count, 2u);
}

TEST(Export, UnwritableDirectory) {
  const fs::path file = scratch("plain_file");
  std::ofstream(file) << "x";
  EXPECT_THROW(export_report(MatrixResult{}, file / "sub"), IoError);
}

}  // namespace
