// SPDX-License-Identifier: Apache-2.0
/**
 * @file   wav.hpp
 * @brief  PCM WAV reading (mono reduction) and 16-bit writing.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace mvgb::dsp {

class AudioFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Waveform {
  std::vector<double> samples; // [-1, 1]
  std::uint32_t sample_rate = 0;

  double duration() const {
    return sample_rate ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Reads 8/16/24/32-bit integer or 32-bit float PCM. Multi-channel audio is
/// averaged to mono; integer samples are scaled into [-1, 1].
Waveform load_wav(const std::filesystem::path &path);

/// Writes mono 16-bit PCM. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path &path, const Waveform &wave);

} // namespace mvgb::dsp
