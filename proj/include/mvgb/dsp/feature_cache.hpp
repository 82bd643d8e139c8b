// SPDX-License-Identifier: Apache-2.0
/**
 * @file   feature_cache.hpp
 * @brief  Binary per-file, per-view feature records.
 *
 * Layout (little-endian): "BCFV", u32 version, u8 view, u32 T, u32 F,
 * u32 sample_rate, then T * F float32 values in row-major order.
 */
#pragma once

#include <filesystem>
#include <stdexcept>

#include "mvgb/dsp/spectrogram.hpp"

namespace mvgb::dsp {

inline constexpr std::uint32_t kFeatureCacheVersion = 1;

class CacheFormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CachedFeature {
  View view = View::mel;
  std::uint32_t sample_rate = 0;
  FeatureMatrix matrix;
};

void write_feature_cache(const std::filesystem::path &path, View view, const FeatureMatrix &m,
                         std::uint32_t sample_rate);
CachedFeature read_feature_cache(const std::filesystem::path &path);

/// Cache location mirroring the manifest-relative audio path:
/// <root>/<relative without extension>.<view>.bcfv
std::filesystem::path feature_cache_path(const std::filesystem::path &root,
                                         const std::filesystem::path &relative_audio, View view);

} // namespace mvgb::dsp
