// Generates the bundled test material in data/: a speech-like test sentence
// (formant synthesis with voiced/unvoiced segments and pauses) for a low and
// a high voice, and a car-cabin-like room impulse response of 1024 taps.
//
//   make_fixtures <output dir>

#include "afc/conditioning.hpp"
#include "afc/wav.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <random>
#include <vector>

namespace {

constexpr double kRate = 16000.0;
constexpr double kPi = std::numbers::pi;
// Voice source: cycle-to-cycle jitter and shimmer (relative), aspiration
// noise giving roughly 12 dB harmonic-to-noise ratio.
constexpr double kJitter = 0.01;
constexpr double kShimmer = 0.05;
constexpr double kBreath = 0.02;

// Portable normal deviates (Box-Muller on a fixed engine).
class Noise {
 public:
  explicit Noise(std::uint64_t seed) : eng_(seed) {}
  double uniform() { return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53; }
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 eng_;
};

struct Resonator {
  double b1 = 0, b2 = 0, gain = 0, y1 = 0, y2 = 0;

  void tune(double freq, double bandwidth) {
    const double r = std::exp(-kPi * bandwidth / kRate);
    b1 = 2.0 * r * std::cos(2.0 * kPi * freq / kRate);
    b2 = -r * r;
    gain = 1.0 - b1 - b2;
  }
  double process(double x) {
    const double y = gain * x + b1 * y1 + b2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

struct Vowel {
  double f1, f2, f3;
};

constexpr std::array<Vowel, 6> kVowels = {{
    {730, 1090, 2440},  // a
    {530, 1840, 2480},  // e
    {270, 2290, 3010},  // i
    {570, 840, 2410},   // o
    {300, 870, 2240},   // u
    {660, 1720, 2410},  // ae
}};

struct Segment {
  enum Kind { Voiced, Fricative, Pause } kind;
  double seconds;
  int vowel;
  double accent;  // f0 factor of the syllable
};

Eigen::VectorXd synth_sentence(double base_f0, double formant_scale, std::uint64_t seed) {
  Noise rnd(seed);
  std::vector<Segment> plan;
  double total = 0.0;
  int syllable = 0;
  while (total < 7.5) {
    const int word_len = 1 + static_cast<int>(rnd.uniform() * 3.0);
    for (int s = 0; s < word_len; ++s) {
      if (rnd.uniform() < 0.35) {
        plan.push_back({Segment::Fricative, 0.05 + 0.07 * rnd.uniform(), 0, 1.0});
      }
      plan.push_back({Segment::Voiced, 0.12 + 0.18 * rnd.uniform(), syllable++ % 6,
                      1.0 + 0.3 * (rnd.uniform() - 0.5)});
    }
    plan.push_back({Segment::Pause, 0.05 + 0.2 * rnd.uniform(), 0, 1.0});
    if (rnd.uniform() < 0.2) plan.push_back({Segment::Pause, 0.3, 0, 1.0});
    total = 0.0;
    for (const auto& p : plan) total += p.seconds;
  }

  std::vector<double> out;
  std::array<Resonator, 3> formants;
  double phase = 0.0;
  double glottal_lp = 0.0;
  Vowel current = kVowels[0];
  double accent = 1.0;
  double hp_prev_in = 0.0, hp_prev_out = 0.0;

  const double sentence_len = total;
  for (const auto& seg : plan) {
    const auto n = static_cast<std::size_t>(seg.seconds * kRate);
    const Vowel target = kVowels[static_cast<std::size_t>(seg.vowel)];
    for (std::size_t k = 0; k < n; ++k) {
      const double pos = static_cast<double>(k) / static_cast<double>(n);
      const double t = static_cast<double>(out.size()) / kRate;
      double v = 0.0;
      if (seg.kind == Segment::Voiced) {
        // glide the formants toward the target vowel
        const double glide = std::min(1.0, 4.0 * pos);
        const Vowel f{current.f1 + glide * (target.f1 - current.f1),
                      current.f2 + glide * (target.f2 - current.f2),
                      current.f3 + glide * (target.f3 - current.f3)};
        formants[0].tune(formant_scale * f.f1, 80.0);
        formants[1].tune(formant_scale * f.f2, 110.0);
        formants[2].tune(formant_scale * f.f3, 160.0);

        const double declination = 1.0 - 0.2 * t / sentence_len;
        const double a = accent + glide * (seg.accent - accent);
        const double f0 = base_f0 * a * declination * (1.0 + 0.08 * std::sin(2.0 * kPi * 3.0 * t)) *
                          (1.0 + kJitter * rnd.normal());
        phase += f0 / kRate;
        double pulse = 0.0;
        if (phase >= 1.0) {
          phase -= 1.0;
          pulse = 1.0;
        }
        glottal_lp = 0.96 * glottal_lp + pulse * (1.0 + kShimmer * rnd.normal()) + kBreath * rnd.normal();
        double y = glottal_lp;
        y = formants[0].process(y) + 0.5 * formants[1].process(y) + 0.25 * formants[2].process(y);
        const double env = std::sin(kPi * pos) * (0.7 + 0.3 * std::sin(kPi * pos));
        v = env * y;
        if (k + 1 == n) {
          current = target;
          accent = seg.accent;
        }
      } else if (seg.kind == Segment::Fricative) {
        const double w = rnd.normal();
        const double hp = 0.9 * (hp_prev_out + w - hp_prev_in);
        hp_prev_in = w;
        hp_prev_out = hp;
        v = 0.25 * std::sin(kPi * pos) * hp;
      }
      out.push_back(v);
    }
  }
  Eigen::VectorXd s = Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
  // recordings carry no subsonic content; the glottal source does
  s = afc::low_freq_eq(s, kRate, 80.0);
  return s / s.cwiseAbs().maxCoeff();
}

Eigen::VectorXd synth_ir(std::uint64_t seed) {
  Noise rnd(seed);
  constexpr int taps = 1024;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(taps);
  h[24] = 1.0;  // direct path, 1.5 ms
  for (int i = 0; i < 12; ++i) {
    const int at = 40 + static_cast<int>(rnd.uniform() * 200.0);
    h[at] += (rnd.uniform() < 0.5 ? -1.0 : 1.0) * (0.2 + 0.5 * rnd.uniform()) * std::exp(-(at - 24) / 150.0);
  }
  // diffuse tail, T60 of roughly 70 ms
  const double tau = 0.07 * kRate / 6.9;
  for (int k = 30; k < taps; ++k) h[k] += 0.25 * rnd.normal() * std::exp(-(k - 30) / tau);
  // mild low-pass coloration
  double lp = 0.0;
  for (int k = 0; k < taps; ++k) {
    lp = 0.6 * lp + 0.4 * h[k];
    h[k] = lp;
  }
  for (int k = taps - 64; k < taps; ++k) h[k] *= 0.5 * (1.0 + std::cos(kPi * (k - taps + 64) / 64.0));
  return h / h.cwiseAbs().maxCoeff();
}

}  // namespace

int main(int argc, char** argv) {
  const std::filesystem::path dir = argc > 1 ? argv[1] : "data";
  std::filesystem::create_directories(dir);
  afc::write_wav(dir / "test_sentence.wav", {synth_sentence(115.0, 1.0, 11), kRate});
  afc::write_wav(dir / "test_sentence_high.wav", {synth_sentence(210.0, 1.15, 23), kRate});
  afc::write_wav(dir / "test_ir.wav", {synth_ir(5), kRate});
  std::cout << "wrote fixtures to " << dir << "\n";
  return 0;
}
