// SPDX-License-Identifier: Apache-2.0
#include "mvgb/train/dataset.hpp"

#include <stdexcept>
#include <string>

#include "mvgb/dsp/segment.hpp"

namespace mvgb::train {

void check_clip(const Clip &clip, const net::NetworkConfig &cfg) {
  for (View v : cfg.views) {
    const auto &m = clip.views[index_of(v)];
    const std::string where = "clip '" + clip.id + "' view " + std::string(name_of(v));
    if (!m)
      throw std::invalid_argument(where + " is missing");
    const ad::Shape in = cfg.input_shape(v);
    if (m->cols != in[1])
      throw std::invalid_argument(where + " has " + std::to_string(m->cols) + " bands, expected " +
                                  std::to_string(in[1]));
    if (m->rows < in[0])
      throw dsp::SignalTooShort(where + " has " + std::to_string(m->rows) +
                                " rows, shorter than one segment of " + std::to_string(in[0]));
  }
}

BatchTensors assemble(std::span<const Clip> clips, std::span<const SegmentRef> refs,
                      const net::NetworkConfig &cfg) {
  BatchTensors out;
  const std::size_t b = refs.size();
  for (View v : cfg.views) {
    const ad::Shape in = cfg.input_shape(v);
    const std::size_t len = in[0], f = in[1];
    ad::Tensor t(ad::Shape{b, len, f, 1});
    double *dst = t.data();
    for (const SegmentRef &r : refs) {
      const dsp::FeatureMatrix &m = *clips[r.clip].views[index_of(v)];
      const std::size_t off = r.count == 0
                                  ? dsp::offset_at(m.rows, len, r.position)
                                  : dsp::evenly_spaced_offsets(m.rows, len, r.count)[r.index];
      const float *src = m.values.data() + off * m.cols;
      for (std::size_t i = 0; i < len * f; ++i)
        *dst++ = static_cast<double>(src[i]);
    }
    out[index_of(v)] = std::move(t);
  }
  return out;
}

std::vector<SegmentRef> inference_segments(std::size_t clip_index, const Clip &clip) {
  const std::size_t s = dsp::segment_count(clip.duration);
  std::vector<SegmentRef> out(s);
  for (std::size_t i = 0; i < s; ++i)
    out[i] = SegmentRef{clip_index, 0.0, i, s};
  return out;
}

ad::Tensor one_hot_labels(std::span<const Clip> clips, std::span<const SegmentRef> refs,
                          std::size_t n_classes) {
  ad::Tensor y(ad::Shape{refs.size(), n_classes});
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::size_t label = clips[refs[i].clip].label;
    if (label >= n_classes)
      throw std::invalid_argument("label " + std::to_string(label) + " outside [0, " +
                                  std::to_string(n_classes) + ")");
    y[i * n_classes + label] = 1.0;
  }
  return y;
}

} // namespace mvgb::train
