#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <complex>
#include <cstddef>
#include <vector>

namespace afc {

using Spectrum = Eigen::VectorXcd;
using TimeBlock = Eigen::VectorXd;

/// Mono time-domain signal tagged with its sample rate.
struct SampleBuffer {
  Eigen::VectorXd samples;
  double sample_rate = 16000.0;

  Eigen::Index size() const { return samples.size(); }
  double duration() const { return samples.size() / sample_rate; }
};

/// Block geometry of the multi-delay structure. Blocks of `block_len`
/// samples advance by half a block; `partitions` blocks together cover
/// partitions * hop taps of impulse response.
struct MdfConfig {
  int block_len = 512;
  int partitions = 4;
  double sample_rate = 16000.0;

  int hop() const { return block_len / 2; }
  int filter_len() const { return partitions * hop(); }

  // Throws ConfigError.
  void validate() const;
};

/// Length-N real FFT pair: unnormalized forward, 1/N on the inverse.
/// Holds plan caches, so one instance per execution context.
class Transform {
 public:
  explicit Transform(int n);

  int size() const { return n_; }

  Spectrum forward(const Eigen::Ref<const TimeBlock>& block) const;
  TimeBlock inverse(const Spectrum& spec) const;

 private:
  int n_;
  mutable Eigen::FFT<double> fft_;
};

/// FIFO of the M most recent block spectra; column m holds X(l - m).
class PartitionedSpectrum {
 public:
  PartitionedSpectrum() = default;
  PartitionedSpectrum(int bins, int partitions);

  int partitions() const { return static_cast<int>(parts_.cols()); }
  int bins() const { return static_cast<int>(parts_.rows()); }

  // Newest spectrum enters slot 0, everything else moves down one slot.
  void push(const Spectrum& newest);

  auto operator[](int m) { return parts_.col(m); }
  auto operator[](int m) const { return parts_.col(m); }

  const Eigen::MatrixXcd& matrix() const { return parts_; }
  Eigen::MatrixXcd& matrix() { return parts_; }

  bool operator==(const PartitionedSpectrum& other) const { return parts_ == other.parts_; }

 private:
  Eigen::MatrixXcd parts_;
};

/// Splits a stream into half-overlapped blocks. Block l holds stream samples
/// [l*hop - N + hop, l*hop + hop); samples before 0 and past the end are zero.
std::vector<TimeBlock> segment_stream(const Eigen::Ref<const Eigen::VectorXd>& signal,
                                      const MdfConfig& cfg);

/// Overlap-save output of the partitioned filter: last hop samples of
/// inverse(sum_m X(m) .* H(m)).
TimeBlock partitioned_filter(const PartitionedSpectrum& x, const Eigen::MatrixXcd& h,
                             const Transform& fft);

/// Projects a filter spectrum onto responses supported on the first N/2 taps.
Spectrum gradient_constraint(const Spectrum& update, const Transform& fft);

/// Spectrum of a length-hop FIR segment zero-padded to N.
Spectrum partition_spectrum(const Eigen::Ref<const Eigen::VectorXd>& taps, const Transform& fft);

/// Splits an impulse response into M constrained partition spectra (N x M).
Eigen::MatrixXcd partition_impulse_response(const Eigen::Ref<const Eigen::VectorXd>& h,
                                            const MdfConfig& cfg, const Transform& fft);

/// Inverse of partition_impulse_response: concatenates the first hop taps of
/// each partition into one response of length M*hop.
Eigen::VectorXd assemble_impulse_response(const Eigen::MatrixXcd& h_parts, const Transform& fft);

}  // namespace afc
