// SPDX-License-Identifier: Apache-2.0
/**
 * @file   spectrogram.hpp
 * @brief  Log Mel, log Gammatone and log constant-Q spectrograms.
 *
 * Mel and Gammatone views share one STFT front end (Hann window, no
 * centering, T = floor((N - win) / hop) + 1 frames) and differ only in the
 * filterbank applied to the magnitude spectrum. The CQT view uses a bank of
 * time-domain constant-Q kernels centred on frames m * hop, giving
 * ceil(N / hop) frames.
 */
#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "mvgb/dsp/wav.hpp"
#include "mvgb/views.hpp"

namespace mvgb::dsp {

class SignalTooShort : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kLogFloor = 1e-10;

/// Row-major (rows x cols) float matrix; rows are time.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  float at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  friend bool operator==(const FeatureMatrix &, const FeatureMatrix &) = default;
};

struct SpectrogramConfig {
  View view_kind = View::mel;
  std::size_t n_bands = 64;
  double window_seconds = 0.040;
  double overlap = 0.5;
  std::size_t cqt_bins_per_octave = 12;
  std::size_t cqt_hop = 0;  // 0: derived from the sample rate
  double cqt_fmin = 0.0;    // 0: derived from the sample rate
  double gammatone_fmin = 50.0;

  /// Throws std::invalid_argument when the configuration is unusable.
  void validate() const;
};

struct Spectrogram {
  FeatureMatrix frames; // T x F log magnitudes
  SpectrogramConfig config;
  std::uint32_t source_rate = 0;

  std::size_t time_frames() const { return frames.rows; }
  std::size_t bands() const { return frames.cols; }
};

/// Per-band weights over the rfft bins of an STFT (mel, gammatone).
struct FilterBank {
  std::vector<double> center_freqs;
  std::size_t n_bins = 0;              // rfft bins, n_fft / 2 + 1
  std::vector<std::vector<double>> weights; // [band][bin]
};

struct StftGeometry {
  std::size_t window = 0;
  std::size_t hop = 0;
  std::size_t n_fft = 0;

  static StftGeometry from(const SpectrogramConfig &cfg, std::uint32_t rate);
  std::size_t frames(std::size_t n_samples) const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);
double erb_bandwidth(double hz);
double hz_to_erb_rate(double hz);
double erb_rate_to_hz(double erb);

FilterBank mel_filterbank(std::size_t n_bands, std::uint32_t rate, std::size_t n_fft);
FilterBank gammatone_filterbank(std::size_t n_bands, std::uint32_t rate, std::size_t n_fft,
                                double fmin = 50.0);

/// Magnitude STFT, (frames x (n_fft / 2 + 1)).
std::vector<std::vector<double>> stft_magnitude(const Waveform &w, const StftGeometry &geo);

Spectrogram mel_spectrogram(const Waveform &w, const SpectrogramConfig &cfg);
Spectrogram gammatone_spectrogram(const Waveform &w, const SpectrogramConfig &cfg);

struct CqtBank {
  std::vector<double> center_freqs;
  std::size_t hop = 0;
  double q = 0.0;
  std::vector<std::vector<double>> kernel_re; // [bin][n], Hann-windowed, unit-gain
  std::vector<std::vector<double>> kernel_im;

  std::size_t longest_kernel() const { return kernel_re.empty() ? 0 : kernel_re.front().size(); }
};

/// Hop rule: 512 at 22.05 kHz, 1024 at 44.1 kHz; other rates use the power of
/// two nearest to rate * 512 / 22050.
std::size_t default_cqt_hop(std::uint32_t rate);
/// Largest equal-tempered pitch (A4 = 440 Hz grid) not above
/// nyquist / 2^(n_bins / bins_per_octave).
double default_cqt_fmin(std::uint32_t rate, std::size_t n_bins, std::size_t bins_per_octave);

CqtBank cqt_bank(const SpectrogramConfig &cfg, std::uint32_t rate);
Spectrogram cqt_spectrogram(const Waveform &w, const SpectrogramConfig &cfg);

/// Dispatches on cfg.view_kind (mel, gam or cqt).
Spectrogram extract(const Waveform &w, const SpectrogramConfig &cfg);

/// Framed raw waveform as a (N x 1) matrix.
FeatureMatrix raw_view(const Waveform &w);

} // namespace mvgb::dsp
