// SPDX-License-Identifier: Apache-2.0
/**
 * @file   synth.hpp
 * @brief  Synthetic multi-view dataset with complementary per-view cues.
 *
 * Each sample has a class-dependent base made of three parts, and each view
 * keeps a different part before white noise is added:
 *   mel  band emphasis:   low-band tone pair, picked by label % 2
 *   gam  chirp:           mid-band sawtooth chirp, direction by (label / 2) % 2,
 *                         band offset by label / 4
 *   cqt  envelope:        high carrier, amplitude-modulated at 3 + 2 * label Hz
 *   raw  passthrough:     the sum of all three
 * So mel and gam each resolve half of the label for four classes, and raw
 * carries all of it. SNR is the linear RMS ratio of signal to noise; 0 makes
 * a view pure noise.
 */
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "mvgb/data/manifest.hpp"
#include "mvgb/dsp/wav.hpp"
#include "mvgb/kv.hpp"

namespace mvgb::data {

struct SynthSpec {
  std::size_t n_classes = 4;
  std::size_t n_views = 4;
  std::size_t samples_per_class = 40;
  std::uint32_t sample_rate = 8000;
  double duration = 2.0; // seconds per clip
  std::array<double, 4> snr{1.0, 1.0, 0.0, 0.5}; // by View
  std::size_t n_folds = 5;
  std::uint64_t seed = 1;

  void validate() const;
  kv::Map to_key_values() const;
  static SynthSpec from_key_values(const kv::Map &m);
};

/// One view of one sample; deterministic in (spec.seed, label, index, view).
dsp::Waveform synth_view(const SynthSpec &spec, View view, std::size_t label, std::size_t index);

/// Writes <out>/<view>/c<label>_<index>.wav for every sample and view plus
/// <out>/manifest.csv. Sample i of a class goes to fold (i % n_folds) + 1
/// and is its own source. Returns the manifest.
Manifest synth_dataset(const SynthSpec &spec, const std::filesystem::path &out);

} // namespace mvgb::data
