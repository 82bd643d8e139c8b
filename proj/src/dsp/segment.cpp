// SPDX-License-Identifier: Apache-2.0
#include "mvgb/dsp/segment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mvgb::dsp {

namespace {

void check_length(std::size_t total, std::size_t length) {
  if (length == 0)
    throw std::invalid_argument("segment: length must be positive");
  if (total < length)
    throw SignalTooShort("segment: input of length " + std::to_string(total) +
                         " is shorter than the segment length " + std::to_string(length));
}

} // namespace

std::size_t segment_count(double duration_seconds) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(duration_seconds)));
}

std::vector<std::size_t> evenly_spaced_offsets(std::size_t total, std::size_t length,
                                               std::size_t count) {
  check_length(total, length);
  if (count == 0)
    throw std::invalid_argument("segment: count must be positive");
  const double span = static_cast<double>(total - length);
  std::vector<std::size_t> out(count, 0);
  if (count == 1)
    return out;
  for (std::size_t i = 0; i < count; ++i)
    out[i] = static_cast<std::size_t>(
        std::llround(span * static_cast<double>(i) / static_cast<double>(count - 1)));
  return out;
}

std::size_t offset_at(std::size_t total, std::size_t length, double fraction) {
  check_length(total, length);
  fraction = std::clamp(fraction, 0.0, 1.0);
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total - length)));
}

FeatureMatrix crop(const FeatureMatrix &m, std::size_t offset, std::size_t length) {
  check_length(m.rows, length);
  if (offset + length > m.rows)
    throw std::out_of_range("crop: [" + std::to_string(offset) + ", " +
                            std::to_string(offset + length) + ") exceeds " +
                            std::to_string(m.rows) + " rows");
  FeatureMatrix out;
  out.rows = length;
  out.cols = m.cols;
  out.values.assign(m.values.begin() + static_cast<long>(offset * m.cols),
                    m.values.begin() + static_cast<long>((offset + length) * m.cols));
  return out;
}

std::vector<FeatureMatrix> segment(const FeatureMatrix &m, SegmentSpec spec, SegmentMode mode,
                                   double duration_seconds, std::mt19937_64 &rng) {
  check_length(m.rows, spec.length);
  std::vector<FeatureMatrix> out;
  if (mode == SegmentMode::train) {
    std::uniform_int_distribution<std::size_t> pick(0, m.rows - spec.length);
    out.push_back(crop(m, pick(rng), spec.length));
    return out;
  }
  for (std::size_t off : evenly_spaced_offsets(m.rows, spec.length, segment_count(duration_seconds)))
    out.push_back(crop(m, off, spec.length));
  return out;
}

} // namespace mvgb::dsp
