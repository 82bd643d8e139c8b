// SPDX-License-Identifier: Apache-2.0
#include "mvgb/data/synth.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mvgb::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLevel = 0.2; // output RMS before clipping

std::mt19937_64 rng_for(std::uint64_t seed, std::size_t label, std::size_t index, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(label), static_cast<std::uint32_t>(index), tag};
  return std::mt19937_64(seq);
}

std::vector<double> tone_pair(std::size_t label, double jitter, double phase, std::size_t n,
                              double rate) {
  const double f0 = (label % 2 == 0 ? 400.0 : 560.0) * jitter;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    x[i] = std::sin(kTwoPi * f0 * t + phase) + 0.5 * std::sin(kTwoPi * 2.0 * f0 * t + 2.0 * phase);
  }
  return x;
}

std::vector<double> chirp(std::size_t label, double jitter, double offset, std::size_t n, double rate) {
  constexpr double period = 0.25;
  const std::size_t k = label / 2;
  const double lo = (1000.0 + 400.0 * static_cast<double>(k / 2)) * jitter;
  const double hi = lo * 2.0;
  const bool up = k % 2 == 0;
  std::vector<double> x(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate + offset;
    const double frac = t / period - std::floor(t / period);
    const double f = up ? lo + (hi - lo) * frac : hi - (hi - lo) * frac;
    x[i] = std::sin(phase);
    phase += kTwoPi * f / rate;
  }
  return x;
}

std::vector<double> envelope(std::size_t label, double jitter, double phase, std::size_t n,
                             double rate) {
  const double carrier = 2500.0 * jitter;
  const double am = 3.0 + 2.0 * static_cast<double>(label);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    x[i] = (0.5 + 0.5 * std::sin(kTwoPi * am * t + phase)) * std::sin(kTwoPi * carrier * t);
  }
  return x;
}

double rms(const std::vector<double> &x) {
  double s = 0.0;
  for (double v : x)
    s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

} // namespace

void SynthSpec::validate() const {
  if (n_classes < 2)
    throw std::invalid_argument("synth: at least 2 classes");
  if (n_views != 4)
    throw std::invalid_argument("synth: n_views must be 4 (mel, gam, cqt, raw)");
  if (samples_per_class == 0)
    throw std::invalid_argument("synth: samples_per_class must be positive");
  if (sample_rate < 1000)
    throw std::invalid_argument("synth: sample_rate below 1 kHz");
  if (!(duration > 0.0))
    throw std::invalid_argument("synth: duration must be positive");
  for (double s : snr)
    if (!(s >= 0.0) || !std::isfinite(s))
      throw std::invalid_argument("synth: per-view SNR must be finite and >= 0");
  if (n_folds == 0 || n_folds > samples_per_class)
    throw std::invalid_argument("synth: n_folds must be in [1, samples_per_class]");
}

kv::Map SynthSpec::to_key_values() const {
  kv::Map m{
      {"n_classes", std::to_string(n_classes)},
      {"n_views", std::to_string(n_views)},
      {"samples_per_class", std::to_string(samples_per_class)},
      {"sample_rate", std::to_string(sample_rate)},
      {"duration", kv::to_text(duration)},
      {"n_folds", std::to_string(n_folds)},
      {"seed", std::to_string(seed)},
  };
  for (View v : kAllViews)
    m["snr_" + std::string(name_of(v))] = kv::to_text(snr[index_of(v)]);
  return m;
}

SynthSpec SynthSpec::from_key_values(const kv::Map &m) {
  SynthSpec s;
  s.n_classes = kv::get_size(m, "n_classes", s.n_classes);
  s.n_views = kv::get_size(m, "n_views", s.n_views);
  s.samples_per_class = kv::get_size(m, "samples_per_class", s.samples_per_class);
  s.sample_rate = static_cast<std::uint32_t>(kv::get_size(m, "sample_rate", s.sample_rate));
  s.duration = kv::get_double(m, "duration", s.duration);
  s.n_folds = kv::get_size(m, "n_folds", s.n_folds);
  s.seed = kv::get_size(m, "seed", s.seed);
  for (View v : kAllViews)
    s.snr[index_of(v)] = kv::get_double(m, "snr_" + std::string(name_of(v)), s.snr[index_of(v)]);
  return s;
}

dsp::Waveform synth_view(const SynthSpec &spec, View view, std::size_t label, std::size_t index) {
  if (label >= spec.n_classes)
    throw std::invalid_argument("synth: label outside the class range");
  const auto n = static_cast<std::size_t>(std::llround(spec.duration * spec.sample_rate));
  const double rate = spec.sample_rate;

  // shared per-sample randomness, then per-view noise
  auto base_rng = rng_for(spec.seed, label, index, 0xba5eu);
  std::uniform_real_distribution<double> jit(0.97, 1.03), ph(0.0, kTwoPi), off(0.0, 0.25);
  const double j1 = jit(base_rng), p1 = ph(base_rng);
  const double j2 = jit(base_rng), o2 = off(base_rng);
  const double j3 = jit(base_rng), p3 = ph(base_rng);

  std::vector<double> s;
  switch (view) {
  case View::mel:
    s = tone_pair(label, j1, p1, n, rate);
    break;
  case View::gam:
    s = chirp(label, j2, o2, n, rate);
    break;
  case View::cqt:
    s = envelope(label, j3, p3, n, rate);
    break;
  case View::raw: {
    s = tone_pair(label, j1, p1, n, rate);
    const auto b = chirp(label, j2, o2, n, rate), c = envelope(label, j3, p3, n, rate);
    for (std::size_t i = 0; i < n; ++i)
      s[i] += b[i] + c[i];
    break;
  }
  }
  const double snr = spec.snr[index_of(view)];
  const double gain = snr / rms(s);
  auto noise_rng = rng_for(spec.seed, label, index, 0x100u + static_cast<std::uint32_t>(view));
  std::normal_distribution<double> noise(0.0, 1.0);
  const double level = kLevel / std::sqrt(1.0 + snr * snr);

  dsp::Waveform w;
  w.sample_rate = spec.sample_rate;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = level * (gain * s[i] + noise(noise_rng));
  return w;
}

Manifest synth_dataset(const SynthSpec &spec, const std::filesystem::path &out) {
  spec.validate();
  Manifest m;
  m.root = out;
  m.n_folds = spec.n_folds;
  for (std::size_t k = 0; k < spec.n_classes; ++k)
    m.class_names.push_back("class" + std::to_string(k));
  for (View v : kAllViews)
    std::filesystem::create_directories(out / name_of(v));

  for (std::size_t k = 0; k < spec.n_classes; ++k)
    for (std::size_t i = 0; i < spec.samples_per_class; ++i) {
      const std::string stem = "c" + std::to_string(k) + "_" + std::to_string(i) + ".wav";
      Record r;
      r.label = k;
      r.fold = i % spec.n_folds + 1;
      r.source = "c" + std::to_string(k) + "_" + std::to_string(i);
      for (View v : kAllViews) {
        const std::string rel = std::string(name_of(v)) + "/" + stem;
        dsp::write_wav(out / rel, synth_view(spec, v, k, i));
        r.view_paths[index_of(v)] = rel;
      }
      r.path = r.view_paths[index_of(View::raw)];
      m.records.push_back(std::move(r));
    }

  std::ofstream f(out / "manifest.csv", std::ios::binary);
  if (!f)
    throw std::runtime_error("synth: cannot write " + (out / "manifest.csv").string());
  write_manifest(f, m);
  if (!f)
    throw std::runtime_error("synth: write failed for " + (out / "manifest.csv").string());
  return m;
}

} // namespace mvgb::data
