// SPDX-License-Identifier: Apache-2.0
/**
 * @file   segment.hpp
 * @brief  Fixed-length crops of a view along its time axis.
 */
#pragma once

#include <random>
#include <vector>

#include "mvgb/dsp/spectrogram.hpp"

namespace mvgb::dsp {

enum class SegmentMode { train, infer };

struct SegmentSpec {
  std::size_t length = 0; // rows (frames or samples)
};

/// Number of inference segments for a clip: one per second, at least one.
std::size_t segment_count(double duration_seconds);

/// `count` start offsets evenly spread over [0, total - length], rounded to
/// the nearest integer.
std::vector<std::size_t> evenly_spaced_offsets(std::size_t total, std::size_t length,
                                               std::size_t count);

/// Offset at relative position `fraction` in [0, 1] of the admissible range.
std::size_t offset_at(std::size_t total, std::size_t length, double fraction);

FeatureMatrix crop(const FeatureMatrix &m, std::size_t offset, std::size_t length);

/// Train mode returns one uniformly random crop; infer mode returns
/// segment_count(duration) evenly spaced crops.
std::vector<FeatureMatrix> segment(const FeatureMatrix &m, SegmentSpec spec, SegmentMode mode,
                                   double duration_seconds, std::mt19937_64 &rng);

} // namespace mvgb::dsp
