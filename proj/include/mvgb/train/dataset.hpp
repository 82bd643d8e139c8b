// SPDX-License-Identifier: Apache-2.0
/**
 * @file   dataset.hpp
 * @brief  In-memory clips and minibatch assembly.
 *
 * A clip holds the full-length feature matrix of every view. Segments are
 * aligned across views by relative position: a training crop draws one
 * fraction u and cuts every view at offset_at(total, length, u); inference
 * uses the same evenly spaced index for every view.
 */
#pragma once

#include <array>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mvgb/dsp/spectrogram.hpp"
#include "mvgb/net/network.hpp"

namespace mvgb::train {

struct Clip {
  std::string id;
  std::size_t label = 0;
  double duration = 0.0; // seconds
  std::array<std::optional<dsp::FeatureMatrix>, 4> views;
};

/// One segment request. With count == 0 the crop sits at relative position
/// `position` in [0, 1]; otherwise it is inference segment `index` of `count`.
struct SegmentRef {
  std::size_t clip = 0;
  double position = 0.0;
  std::size_t index = 0;
  std::size_t count = 0;
};

/// Per-view (B, T, F, 1) input tensors for the views the network uses.
using BatchTensors = std::array<ad::Tensor, 4>;

/// Throws std::invalid_argument when a clip lacks a view, has the wrong band
/// count or is shorter than one segment.
void check_clip(const Clip &clip, const net::NetworkConfig &cfg);

BatchTensors assemble(std::span<const Clip> clips, std::span<const SegmentRef> refs,
                      const net::NetworkConfig &cfg);

/// segment_count(duration) evenly spaced inference segments of a clip.
std::vector<SegmentRef> inference_segments(std::size_t clip_index, const Clip &clip);

/// One-hot (B, C) labels for the referenced clips.
ad::Tensor one_hot_labels(std::span<const Clip> clips, std::span<const SegmentRef> refs,
                          std::size_t n_classes);

} // namespace mvgb::train
