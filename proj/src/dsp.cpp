#include "afc/dsp.hpp"

#include "afc/errors.hpp"

#include <algorithm>
#include <string>

namespace afc {

void MdfConfig::validate() const {
  if (block_len < 4 || (block_len & (block_len - 1)) != 0) {
    throw ConfigError("block_len must be a power of two >= 4, got " + std::to_string(block_len));
  }
  if (partitions < 1) {
    throw ConfigError("partitions must be >= 1, got " + std::to_string(partitions));
  }
  if (!(sample_rate > 0.0)) {
    throw ConfigError("sample_rate must be positive");
  }
}

Transform::Transform(int n) : n_(n) {
  if (n < 2) throw ConfigError("transform length must be >= 2");
}

Spectrum Transform::forward(const Eigen::Ref<const TimeBlock>& block) const {
  if (block.size() != n_) {
    throw ConfigError("forward: expected block of " + std::to_string(n_) + " samples, got " +
                      std::to_string(block.size()));
  }
  TimeBlock in = block;
  Spectrum out(n_);
  fft_.fwd(out, in);
  return out;
}

TimeBlock Transform::inverse(const Spectrum& spec) const {
  if (spec.size() != n_) {
    throw ConfigError("inverse: expected " + std::to_string(n_) + " bins, got " +
                      std::to_string(spec.size()));
  }
  TimeBlock out(n_);
  fft_.inv(out, spec);
  return out;
}

PartitionedSpectrum::PartitionedSpectrum(int bins, int partitions)
    : parts_(Eigen::MatrixXcd::Zero(bins, partitions)) {}

void PartitionedSpectrum::push(const Spectrum& newest) {
  if (newest.size() != parts_.rows()) throw ConfigError("push: bin count mismatch");
  for (Eigen::Index m = parts_.cols() - 1; m > 0; --m) parts_.col(m) = parts_.col(m - 1);
  parts_.col(0) = newest;
}

std::vector<TimeBlock> segment_stream(const Eigen::Ref<const Eigen::VectorXd>& signal,
                                      const MdfConfig& cfg) {
  cfg.validate();
  std::vector<TimeBlock> blocks;
  const Eigen::Index len = signal.size();
  if (len == 0) return blocks;

  const Eigen::Index n = cfg.block_len;
  const Eigen::Index hop = cfg.hop();
  const Eigen::Index count = (len + hop - 1) / hop;
  blocks.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index l = 0; l < count; ++l) {
    TimeBlock block = TimeBlock::Zero(n);
    const Eigen::Index start = l * hop - n + hop;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index k = start + i;
      if (k >= 0 && k < len) block[i] = signal[k];
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

TimeBlock partitioned_filter(const PartitionedSpectrum& x, const Eigen::MatrixXcd& h,
                             const Transform& fft) {
  if (x.partitions() != h.cols() || x.bins() != h.rows()) {
    throw ConfigError("partitioned_filter: X has " + std::to_string(x.partitions()) +
                      " partitions, H has " + std::to_string(h.cols()));
  }
  const Spectrum acc = x.matrix().cwiseProduct(h).rowwise().sum();
  const TimeBlock y = fft.inverse(acc);
  const int hop = fft.size() / 2;
  return y.tail(hop);
}

Spectrum gradient_constraint(const Spectrum& update, const Transform& fft) {
  TimeBlock t = fft.inverse(update);
  const int hop = fft.size() / 2;
  t.tail(hop).setZero();
  return fft.forward(t);
}

Spectrum partition_spectrum(const Eigen::Ref<const Eigen::VectorXd>& taps, const Transform& fft) {
  const int hop = fft.size() / 2;
  if (taps.size() > hop) throw ConfigError("partition_spectrum: more taps than hop");
  TimeBlock t = TimeBlock::Zero(fft.size());
  t.head(taps.size()) = taps;
  return fft.forward(t);
}

Eigen::MatrixXcd partition_impulse_response(const Eigen::Ref<const Eigen::VectorXd>& h,
                                            const MdfConfig& cfg, const Transform& fft) {
  const int hop = cfg.hop();
  if (h.size() > cfg.filter_len()) {
    throw ConfigError("impulse response of " + std::to_string(h.size()) +
                      " taps exceeds partitions * hop = " + std::to_string(cfg.filter_len()));
  }
  Eigen::MatrixXcd parts(cfg.block_len, cfg.partitions);
  for (int m = 0; m < cfg.partitions; ++m) {
    const Eigen::Index begin = static_cast<Eigen::Index>(m) * hop;
    const Eigen::Index count = std::clamp<Eigen::Index>(h.size() - begin, 0, hop);
    parts.col(m) = partition_spectrum(h.segment(begin, count), fft);
  }
  return parts;
}

Eigen::VectorXd assemble_impulse_response(const Eigen::MatrixXcd& h_parts, const Transform& fft) {
  const int hop = fft.size() / 2;
  Eigen::VectorXd h(h_parts.cols() * hop);
  for (Eigen::Index m = 0; m < h_parts.cols(); ++m) {
    h.segment(m * hop, hop) = fft.inverse(h_parts.col(m)).head(hop);
  }
  return h;
}

}  // namespace afc
