#include "afc/wav.hpp"

#include "afc/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

namespace afc {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path)
      : bytes_(bytes), path_(path) {}

  [[noreturn]] void fail(std::size_t offset, const std::string& what) const {
    std::ostringstream msg;
    msg << path_.string() << ": " << what << " at byte offset " << offset;
    throw IoError(msg.str());
  }

  void need(std::size_t offset, std::size_t count, const char* what) const {
    if (offset + count > bytes_.size()) fail(offset, std::string("truncated ") + what);
  }

  std::uint32_t u32(std::size_t offset) const {
    need(offset, 4, "field");
    return static_cast<std::uint32_t>(bytes_[offset]) |
           static_cast<std::uint32_t>(bytes_[offset + 1]) << 8 |
           static_cast<std::uint32_t>(bytes_[offset + 2]) << 16 |
           static_cast<std::uint32_t>(bytes_[offset + 3]) << 24;
  }

  std::uint16_t u16(std::size_t offset) const {
    need(offset, 2, "field");
    return static_cast<std::uint16_t>(bytes_[offset] | bytes_[offset + 1] << 8);
  }

  bool tag(std::size_t offset, const char* id) const {
    need(offset, 4, "chunk id");
    return std::memcmp(bytes_.data() + offset, id, 4) == 0;
  }

  const std::uint8_t* at(std::size_t offset) const { return bytes_.data() + offset; }
  std::size_t size() const { return bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const std::filesystem::path& path_;
};

void put_u32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                     static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF)};
  out.write(b, 2);
}

}  // namespace

SampleBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  ByteReader rd(bytes, path);

  if (!rd.tag(0, "RIFF")) rd.fail(0, "missing RIFF tag");
  if (!rd.tag(8, "WAVE")) rd.fail(8, "missing WAVE tag");

  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t data_offset = 0, data_size = 0;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= rd.size() && !have_data) {
    const std::uint32_t size = rd.u32(pos + 4);
    const std::size_t body = pos + 8;
    if (rd.tag(pos, "fmt ")) {
      if (size < 16) rd.fail(pos + 4, "fmt chunk shorter than 16 bytes");
      rd.need(body, size, "fmt chunk");
      format = rd.u16(body);
      channels = rd.u16(body + 2);
      rate = rd.u32(body + 4);
      block_align = rd.u16(body + 12);
      bits = rd.u16(body + 14);
      if (format == kFormatExtensible) {
        if (size < 26) rd.fail(body, "extensible fmt chunk too short");
        format = rd.u16(body + 24);
      }
      have_fmt = true;
    } else if (rd.tag(pos, "data")) {
      if (!have_fmt) rd.fail(pos, "data chunk before fmt chunk");
      data_offset = body;
      data_size = std::min<std::size_t>(size, rd.size() - body);
      have_data = true;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) rd.fail(pos, "no fmt chunk");
  if (!have_data) rd.fail(pos, "no data chunk");
  if (channels == 0) rd.fail(22, "zero channels");
  if (rate == 0) rd.fail(24, "zero sample rate");

  const std::size_t bytes_per_sample = bits / 8;
  const bool pcm_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!pcm_ok && !float_ok) {
    rd.fail(20, "unsupported format " + std::to_string(format) + " with " + std::to_string(bits) +
                    " bits");
  }
  if (block_align < channels * bytes_per_sample) rd.fail(32, "inconsistent block align");

  const std::size_t frames = data_size / block_align;
  SampleBuffer out;
  out.sample_rate = rate;
  out.samples.resize(static_cast<Eigen::Index>(frames));
  for (std::size_t f = 0; f < frames; ++f) {
    const std::uint8_t* p = rd.at(data_offset + f * block_align);
    double v = 0.0;
    if (format == kFormatFloat && bits == 32) {
      float x;
      std::memcpy(&x, p, 4);
      v = x;
    } else if (format == kFormatFloat) {
      std::memcpy(&v, p, 8);
    } else if (bits == 8) {
      v = (static_cast<int>(p[0]) - 128) / 128.0;
    } else if (bits == 16) {
      const auto s = static_cast<std::int16_t>(p[0] | p[1] << 8);
      v = s / 32768.0;
    } else if (bits == 24) {
      std::int32_t s = p[0] | p[1] << 8 | p[2] << 16;
      if (s & 0x800000) s -= 0x1000000;
      v = s / 8388608.0;
    } else {
      const auto s = static_cast<std::int32_t>(static_cast<std::uint32_t>(p[0]) |
                                               static_cast<std::uint32_t>(p[1]) << 8 |
                                               static_cast<std::uint32_t>(p[2]) << 16 |
                                               static_cast<std::uint32_t>(p[3]) << 24);
      v = s / 2147483648.0;
    }
    out.samples[static_cast<Eigen::Index>(f)] = v;
  }
  return out;
}

void write_wav(const std::filesystem::path& path, const SampleBuffer& buffer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());

  const auto frames = static_cast<std::uint32_t>(buffer.samples.size());
  const std::uint32_t data_bytes = frames * 4;
  const auto rate = static_cast<std::uint32_t>(std::lround(buffer.sample_rate));

  out.write("RIFF", 4);
  put_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, kFormatFloat);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 4);
  put_u16(out, 4);
  put_u16(out, 32);
  out.write("data", 4);
  put_u32(out, data_bytes);
  for (Eigen::Index k = 0; k < buffer.samples.size(); ++k) {
    const auto f = static_cast<float>(buffer.samples[k]);
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace afc
