// SPDX-License-Identifier: Apache-2.0
#include "mvgb/dsp/spectrogram.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

namespace mvgb::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> hann(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n)
    p <<= 1;
  return p;
}

float log_floor(double v) { return static_cast<float>(std::log(std::max(v, kLogFloor))); }

Spectrogram apply_bank(const Waveform &w, const SpectrogramConfig &cfg, View expected,
                       bool gammatone) {
  cfg.validate();
  if (cfg.view_kind != expected)
    throw std::invalid_argument(std::string("spectrogram: config is for view ") +
                                std::string(name_of(cfg.view_kind)) + ", expected " +
                                std::string(name_of(expected)));
  const StftGeometry geo = StftGeometry::from(cfg, w.sample_rate);
  const FilterBank bank =
      gammatone ? gammatone_filterbank(cfg.n_bands, w.sample_rate, geo.n_fft, cfg.gammatone_fmin)
                : mel_filterbank(cfg.n_bands, w.sample_rate, geo.n_fft);
  const auto mag = stft_magnitude(w, geo);

  Spectrogram s;
  s.config = cfg;
  s.source_rate = w.sample_rate;
  s.frames.rows = mag.size();
  s.frames.cols = cfg.n_bands;
  s.frames.values.resize(s.frames.rows * s.frames.cols);
  for (std::size_t t = 0; t < mag.size(); ++t)
    for (std::size_t b = 0; b < cfg.n_bands; ++b) {
      const auto &wt = bank.weights[b];
      double e = 0.0;
      for (std::size_t k = 0; k < bank.n_bins; ++k)
        e += wt[k] * mag[t][k];
      s.frames.values[t * cfg.n_bands + b] = log_floor(e);
    }
  return s;
}

} // namespace

void SpectrogramConfig::validate() const {
  if (n_bands == 0)
    throw std::invalid_argument("spectrogram: n_bands must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0))
    throw std::invalid_argument("spectrogram: overlap must be in [0, 1)");
  if (!(window_seconds > 0.0))
    throw std::invalid_argument("spectrogram: window length must be positive");
  if (view_kind == View::cqt && cqt_bins_per_octave == 0)
    throw std::invalid_argument("spectrogram: cqt_bins_per_octave must be positive");
  if (view_kind == View::raw)
    throw std::invalid_argument("spectrogram: raw is not a spectrogram view");
}

StftGeometry StftGeometry::from(const SpectrogramConfig &cfg, std::uint32_t rate) {
  if (rate == 0)
    throw std::invalid_argument("stft: sample rate must be positive");
  StftGeometry g;
  g.window = static_cast<std::size_t>(std::lround(cfg.window_seconds * rate));
  g.hop = std::max<std::size_t>(1, static_cast<std::size_t>(
                                       std::lround(static_cast<double>(g.window) * (1.0 - cfg.overlap))));
  g.n_fft = next_pow2(g.window);
  return g;
}

std::size_t StftGeometry::frames(std::size_t n_samples) const {
  if (n_samples < window)
    throw SignalTooShort("stft: " + std::to_string(n_samples) +
                         " samples is shorter than one window of " + std::to_string(window));
  return (n_samples - window) / hop + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }
double erb_bandwidth(double hz) { return 24.7 * (4.37 * hz / 1000.0 + 1.0); }
double hz_to_erb_rate(double hz) { return 21.4 * std::log10(1.0 + 0.00437 * hz); }
double erb_rate_to_hz(double erb) { return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437; }

FilterBank mel_filterbank(std::size_t n_bands, std::uint32_t rate, std::size_t n_fft) {
  const double nyquist = rate / 2.0;
  const double top = hz_to_mel(nyquist);
  std::vector<double> edges(n_bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_bands + 1));

  FilterBank fb;
  fb.n_bins = n_fft / 2 + 1;
  fb.center_freqs.assign(edges.begin() + 1, edges.end() - 1);
  fb.weights.assign(n_bands, std::vector<double>(fb.n_bins, 0.0));
  for (std::size_t b = 0; b < n_bands; ++b) {
    const double lo = edges[b], mid = edges[b + 1], hi = edges[b + 2];
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = static_cast<double>(k) * rate / static_cast<double>(n_fft);
      double v = 0.0;
      if (f > lo && f <= mid)
        v = (f - lo) / (mid - lo);
      else if (f > mid && f < hi)
        v = (hi - f) / (hi - mid);
      fb.weights[b][k] = v;
    }
  }
  return fb;
}

FilterBank gammatone_filterbank(std::size_t n_bands, std::uint32_t rate, std::size_t n_fft,
                                double fmin) {
  const double nyquist = rate / 2.0;
  fmin = std::min(fmin, nyquist / 4.0);
  const double e_lo = hz_to_erb_rate(fmin), e_hi = hz_to_erb_rate(nyquist);

  FilterBank fb;
  fb.n_bins = n_fft / 2 + 1;
  fb.center_freqs.resize(n_bands);
  for (std::size_t b = 0; b < n_bands; ++b) {
    const double frac = n_bands == 1 ? 1.0 : static_cast<double>(b) / (n_bands - 1);
    fb.center_freqs[b] = std::min(erb_rate_to_hz(e_lo + frac * (e_hi - e_lo)), nyquist);
  }
  fb.weights.assign(n_bands, std::vector<double>(fb.n_bins, 0.0));
  for (std::size_t b = 0; b < n_bands; ++b) {
    const double fc = fb.center_freqs[b];
    const double bw = 1.019 * erb_bandwidth(fc);
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = static_cast<double>(k) * rate / static_cast<double>(n_fft);
      const double x = (f - fc) / bw;
      // 4th-order gammatone magnitude response.
      fb.weights[b][k] = 1.0 / ((1.0 + x * x) * (1.0 + x * x));
    }
  }
  return fb;
}

std::vector<std::vector<double>> stft_magnitude(const Waveform &w, const StftGeometry &geo) {
  const std::size_t n_frames = geo.frames(w.samples.size());
  const std::size_t n_bins = geo.n_fft / 2 + 1;
  const std::vector<double> win = hann(geo.window);

  std::unique_ptr<double, decltype(&fftw_free)> in(
      static_cast<double *>(fftw_malloc(sizeof(double) * geo.n_fft)), &fftw_free);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out(
      static_cast<fftw_complex *>(fftw_malloc(sizeof(fftw_complex) * n_bins)), &fftw_free);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(geo.n_fft), in.get(), out.get(), FFTW_ESTIMATE);
  }

  std::vector<std::vector<double>> mag(n_frames, std::vector<double>(n_bins));
  for (std::size_t t = 0; t < n_frames; ++t) {
    const double *x = w.samples.data() + t * geo.hop;
    std::fill(in.get(), in.get() + geo.n_fft, 0.0);
    for (std::size_t i = 0; i < geo.window; ++i)
      in.get()[i] = x[i] * win[i];
    fftw_execute(plan);
    for (std::size_t k = 0; k < n_bins; ++k)
      mag[t][k] = std::hypot(out.get()[k][0], out.get()[k][1]);
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return mag;
}

Spectrogram mel_spectrogram(const Waveform &w, const SpectrogramConfig &cfg) {
  return apply_bank(w, cfg, View::mel, false);
}

Spectrogram gammatone_spectrogram(const Waveform &w, const SpectrogramConfig &cfg) {
  return apply_bank(w, cfg, View::gam, true);
}

std::size_t default_cqt_hop(std::uint32_t rate) {
  if (rate == 44100)
    return 1024;
  if (rate == 22050)
    return 512;
  const double target = static_cast<double>(rate) * 512.0 / 22050.0;
  return std::size_t{1} << static_cast<unsigned>(std::max(0.0, std::round(std::log2(target))));
}

double default_cqt_fmin(std::uint32_t rate, std::size_t n_bins, std::size_t bins_per_octave) {
  const double target = (rate / 2.0) / std::pow(2.0, static_cast<double>(n_bins) / bins_per_octave);
  const double semis = std::floor(12.0 * std::log2(target / 440.0) + 1e-9);
  return 440.0 * std::pow(2.0, semis / 12.0);
}

CqtBank cqt_bank(const SpectrogramConfig &cfg, std::uint32_t rate) {
  cfg.validate();
  const std::size_t bpo = cfg.cqt_bins_per_octave;
  CqtBank bank;
  bank.hop = cfg.cqt_hop ? cfg.cqt_hop : default_cqt_hop(rate);
  const double fmin = cfg.cqt_fmin > 0.0 ? cfg.cqt_fmin : default_cqt_fmin(rate, cfg.n_bands, bpo);
  bank.q = 1.0 / (std::pow(2.0, 1.0 / static_cast<double>(bpo)) - 1.0);
  const double nyquist = rate / 2.0;
  for (std::size_t k = 0; k < cfg.n_bands; ++k) {
    const double fk = fmin * std::pow(2.0, static_cast<double>(k) / static_cast<double>(bpo));
    if (fk >= nyquist)
      throw std::invalid_argument("cqt: bin " + std::to_string(k) + " at " + std::to_string(fk) +
                                  " Hz is above Nyquist");
    bank.center_freqs.push_back(fk);
    const auto len = static_cast<std::size_t>(std::ceil(bank.q * rate / fk));
    const std::vector<double> win = hann(len);
    double norm = 0.0;
    for (double v : win)
      norm += v;
    std::vector<double> re(len), im(len);
    for (std::size_t n = 0; n < len; ++n) {
      const double phase = 2.0 * kPi * fk * static_cast<double>(n) / rate;
      re[n] = win[n] * std::cos(phase) / norm;
      im[n] = -win[n] * std::sin(phase) / norm;
    }
    bank.kernel_re.push_back(std::move(re));
    bank.kernel_im.push_back(std::move(im));
  }
  return bank;
}

Spectrogram cqt_spectrogram(const Waveform &w, const SpectrogramConfig &cfg) {
  if (cfg.view_kind != View::cqt)
    throw std::invalid_argument("cqt_spectrogram: config is not a cqt config");
  const CqtBank bank = cqt_bank(cfg, w.sample_rate);
  const std::size_t n = w.samples.size();
  if (n < bank.longest_kernel())
    throw SignalTooShort("cqt: " + std::to_string(n) +
                         " samples is shorter than the lowest-frequency kernel (" +
                         std::to_string(bank.longest_kernel()) + ")");
  const std::size_t frames = (n + bank.hop - 1) / bank.hop;

  Spectrogram s;
  s.config = cfg;
  s.source_rate = w.sample_rate;
  s.frames.rows = frames;
  s.frames.cols = cfg.n_bands;
  s.frames.values.resize(frames * cfg.n_bands);
  for (std::size_t t = 0; t < frames; ++t) {
    const long centre = static_cast<long>(t * bank.hop);
    for (std::size_t k = 0; k < cfg.n_bands; ++k) {
      const auto &kr = bank.kernel_re[k];
      const auto &ki = bank.kernel_im[k];
      const long len = static_cast<long>(kr.size());
      const long start = centre - len / 2;
      const long lo = std::max(0L, -start);
      const long hi = std::min(len, static_cast<long>(n) - start);
      double re = 0.0, im = 0.0;
      for (long i = lo; i < hi; ++i) {
        const double x = w.samples[static_cast<std::size_t>(start + i)];
        re += x * kr[static_cast<std::size_t>(i)];
        im += x * ki[static_cast<std::size_t>(i)];
      }
      s.frames.values[t * cfg.n_bands + k] = log_floor(std::hypot(re, im));
    }
  }
  return s;
}

Spectrogram extract(const Waveform &w, const SpectrogramConfig &cfg) {
  switch (cfg.view_kind) {
  case View::mel:
    return mel_spectrogram(w, cfg);
  case View::gam:
    return gammatone_spectrogram(w, cfg);
  case View::cqt:
    return cqt_spectrogram(w, cfg);
  case View::raw:
    break;
  }
  throw std::invalid_argument("extract: raw is not a spectrogram view");
}

FeatureMatrix raw_view(const Waveform &w) {
  FeatureMatrix m;
  m.rows = w.samples.size();
  m.cols = 1;
  m.values.assign(w.samples.begin(), w.samples.end());
  return m;
}

} // namespace mvgb::dsp
