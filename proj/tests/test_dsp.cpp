#include "afc/dsp.hpp"
#include "afc/errors.hpp"

#include <gtest/gtest.h>

#include <random>

namespace {

using namespace afc;

Eigen::VectorXd random_vector(Eigen::Index n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

// y[k] = sum_j h[j] x[k - j]
Eigen::VectorXd direct_convolution(const Eigen::VectorXd& h, const Eigen::VectorXd& x) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    for (Eigen::Index j = 0; j < h.size() && j <= k; ++j) y[k] += h[j] * x[k - j];
  }
  return y;
}

TEST(Segmentation, ConstantSignalBlockCount) {
  MdfConfig cfg;
  const Eigen::VectorXd x = Eigen::VectorXd::Ones(1024);
  const auto blocks = segment_stream(x, cfg);
  ASSERT_EQ(blocks.size(), 4u);  // one head-padded block plus three full ones
  int full = 0;
  for (const auto& b : blocks) {
    ASSERT_EQ(b.size(), 512);
    if ((b.array() == 1.0).all()) ++full;
  }
  EXPECT_EQ(full, 3);
  for (std::size_t l = 1; l < blocks.size(); ++l) {
    EXPECT_EQ(blocks[l - 1].tail(256), blocks[l].head(256));
  }
}

TEST(Segmentation, ImpulseInTwoBlocks) {
  MdfConfig cfg;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1024);
  x[256] = 1.0;
  const auto blocks = segment_stream(x, cfg);
  std::vector<std::size_t> hits;
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    if (blocks[l].cwiseAbs().maxCoeff() > 0.0) hits.push_back(l);
  }
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[1], hits[0] + 1);
}

TEST(Segmentation, LastHopReconstruction) {
  MdfConfig cfg;
  const Eigen::VectorXd x = random_vector(5 * 256 + 100, 3);
  const auto blocks = segment_stream(x, cfg);
  Eigen::VectorXd rebuilt(static_cast<Eigen::Index>(blocks.size()) * 256);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    rebuilt.segment(static_cast<Eigen::Index>(l) * 256, 256) = blocks[l].tail(256);
  }
  EXPECT_EQ(rebuilt.head(x.size()), x);
  EXPECT_TRUE((rebuilt.tail(rebuilt.size() - x.size()).array() == 0.0).all());
}

TEST(Segmentation, EmptySignal) {
  EXPECT_TRUE(segment_stream(Eigen::VectorXd(), MdfConfig{}).empty());
}

TEST(MdfConfigTest, Validation) {
  MdfConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.hop(), 256);
  EXPECT_EQ(cfg.filter_len(), 1024);
  cfg.block_len = 500;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = MdfConfig{};
  cfg.partitions = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(TransformTest, ZerosAndImpulse) {
  Transform fft(512);
  const Spectrum zeros = fft.forward(TimeBlock::Zero(512));
  EXPECT_EQ(zeros.size(), 512);
  EXPECT_EQ(zeros.cwiseAbs().maxCoeff(), 0.0);

  TimeBlock impulse = TimeBlock::Zero(512);
  impulse[0] = 1.0;
  const Spectrum flat = fft.forward(impulse);
  for (const auto& bin : flat) EXPECT_NEAR(std::abs(bin - std::complex<double>(1.0, 0.0)), 0.0, 1e-15);
}

TEST(TransformTest, RoundTrip) {
  Transform fft(512);
  for (unsigned seed = 0; seed < 20; ++seed) {
    const Eigen::VectorXd x = random_vector(512, seed);
    const Eigen::VectorXd back = fft.inverse(fft.forward(x));
    EXPECT_LT((back - x).cwiseAbs().maxCoeff(), 1e-10 * x.cwiseAbs().maxCoeff());
  }
}

TEST(TransformTest, UnnormalizedForward) {
  Transform fft(8);
  const Spectrum s = fft.forward(TimeBlock::Ones(8));
  EXPECT_NEAR(s[0].real(), 8.0, 1e-14);
}

TEST(TransformTest, WrongLength) {
  Transform fft(512);
  EXPECT_THROW(fft.forward(TimeBlock::Zero(256)), ConfigError);
  EXPECT_THROW(fft.inverse(Spectrum::Zero(100)), ConfigError);
}

TEST(PartitionedSpectrumTest, FifoShift) {
  PartitionedSpectrum ps(4, 3);
  for (int i = 1; i <= 4; ++i) ps.push(Spectrum::Constant(4, std::complex<double>(i, 0)));
  EXPECT_EQ(ps[0][0].real(), 4.0);
  EXPECT_EQ(ps[1][0].real(), 3.0);
  EXPECT_EQ(ps[2][0].real(), 2.0);
}

TEST(PartitionedFilter, ImpulsePassthrough) {
  MdfConfig cfg;
  Transform fft(cfg.block_len);
  Eigen::VectorXd h = Eigen::VectorXd::Zero(cfg.filter_len());
  h[0] = 1.0;
  const Eigen::MatrixXcd H = partition_impulse_response(h, cfg, fft);
  const Eigen::VectorXd x = random_vector(8 * 256, 5);
  PartitionedSpectrum hist(cfg.block_len, cfg.partitions);
  const auto blocks = segment_stream(x, cfg);
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    hist.push(fft.forward(blocks[l]));
    const Eigen::VectorXd out = partitioned_filter(hist, H, fft);
    EXPECT_LT((out - x.segment(static_cast<Eigen::Index>(l) * 256, 256)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(PartitionedFilter, ZeroFilter) {
  MdfConfig cfg;
  Transform fft(cfg.block_len);
  PartitionedSpectrum hist(cfg.block_len, cfg.partitions);
  hist.push(fft.forward(random_vector(512, 9)));
  const Eigen::VectorXd out =
      partitioned_filter(hist, Eigen::MatrixXcd::Zero(cfg.block_len, cfg.partitions), fft);
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PartitionedFilter, MatchesDirectConvolution) {
  MdfConfig cfg;
  Transform fft(cfg.block_len);
  for (unsigned seed = 0; seed < 5; ++seed) {
    const Eigen::VectorXd h = random_vector(cfg.filter_len(), 100 + seed, 0.1);
    const Eigen::VectorXd x = random_vector(20 * 256, 200 + seed);
    const Eigen::VectorXd y = direct_convolution(h, x);
    const Eigen::MatrixXcd H = partition_impulse_response(h, cfg, fft);
    PartitionedSpectrum hist(cfg.block_len, cfg.partitions);
    const auto blocks = segment_stream(x, cfg);
    for (std::size_t l = 0; l < blocks.size(); ++l) {
      hist.push(fft.forward(blocks[l]));
      const Eigen::VectorXd out = partitioned_filter(hist, H, fft);
      EXPECT_LT((out - y.segment(static_cast<Eigen::Index>(l) * 256, 256)).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(PartitionedFilter, PartitionMismatch) {
  Transform fft(512);
  PartitionedSpectrum hist(512, 4);
  EXPECT_THROW(partitioned_filter(hist, Eigen::MatrixXcd::Zero(512, 3), fft), ConfigError);
}

TEST(PartitionedFilter, AssembleInvertsPartitioning) {
  MdfConfig cfg;
  Transform fft(cfg.block_len);
  const Eigen::VectorXd h = random_vector(cfg.filter_len(), 12);
  const Eigen::VectorXd back = assemble_impulse_response(partition_impulse_response(h, cfg, fft), fft);
  EXPECT_LT((back - h).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradientConstraint, SupportedResponseUnchanged) {
  Transform fft(512);
  TimeBlock t = TimeBlock::Zero(512);
  t.head(256) = random_vector(256, 4);
  const Spectrum s = fft.forward(t);
  EXPECT_LT((gradient_constraint(s, fft) - s).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GradientConstraint, LastSampleRemoved) {
  Transform fft(512);
  TimeBlock t = TimeBlock::Zero(512);
  t[511] = 1.0;
  EXPECT_LT(gradient_constraint(fft.forward(t), fft).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradientConstraint, IdempotentProjection) {
  Transform fft(512);
  for (unsigned seed = 0; seed < 10; ++seed) {
    const Spectrum s = fft.forward(random_vector(512, seed + 40));
    const Spectrum once = gradient_constraint(s, fft);
    const Spectrum twice = gradient_constraint(once, fft);
    EXPECT_LT((once - twice).cwiseAbs().maxCoeff(), 1e-12 * s.cwiseAbs().maxCoeff());
    EXPECT_LE(fft.inverse(once).squaredNorm(), fft.inverse(s).squaredNorm() * (1.0 + 1e-12));
  }
}

}  // namespace
