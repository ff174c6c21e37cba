#pragma once

#include "afc/dsp.hpp"

#include <filesystem>

namespace afc {

// Reads PCM 16/24/32-bit or IEEE float32/64 WAV (plain or extensible header).
// Multichannel files yield channel 0. Integer samples are scaled by 2^-(bits-1),
// so -32768 maps to -1.0. Throws IoError with the byte offset on malformed input.
SampleBuffer read_wav(const std::filesystem::path& path);

// Writes mono 32-bit float WAV. Samples are rounded to float.
void write_wav(const std::filesystem::path& path, const SampleBuffer& buffer);

}  // namespace afc
