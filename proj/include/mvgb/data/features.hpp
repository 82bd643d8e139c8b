// SPDX-License-Identifier: Apache-2.0
/**
 * @file   features.hpp
 * @brief  Per-view feature extraction for manifest records, with an optional
 *         on-disk cache.
 */
#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mvgb/data/manifest.hpp"
#include "mvgb/dsp/spectrogram.hpp"
#include "mvgb/net/network.hpp"
#include "mvgb/train/dataset.hpp"

namespace mvgb::data {

/// Spectrogram settings for a view: 40 ms window, 50 % overlap, bands from
/// the network input shape, CQT hop and fmin derived from the sample rate.
dsp::SpectrogramConfig spectrogram_config(View v, const net::NetworkConfig &cfg);

dsp::FeatureMatrix extract_view(const dsp::Waveform &w, View v, const net::NetworkConfig &cfg);

/// Reads the record's audio for every view in `views` and extracts features.
train::Clip extract_clip(const Manifest &m, const Record &r, std::span<const View> views,
                         const net::NetworkConfig &cfg);

/// Extracts every record and writes one cache file per view under `root`.
/// Files are processed on `threads` workers (0: hardware concurrency).
void write_cache(const Manifest &m, std::span<const View> views, const net::NetworkConfig &cfg,
                 const std::filesystem::path &root, unsigned threads = 0);

/// Clips for the given records. Cached matrices are used when `cache` is
/// set and a file exists; the clip duration always comes from the audio.
std::vector<train::Clip> load_clips(const Manifest &m, std::span<const std::size_t> records,
                                    std::span<const View> views, const net::NetworkConfig &cfg,
                                    const std::optional<std::filesystem::path> &cache = std::nullopt);

} // namespace mvgb::data
