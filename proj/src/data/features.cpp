// SPDX-License-Identifier: Apache-2.0
#include "mvgb/data/features.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "mvgb/dsp/feature_cache.hpp"

namespace mvgb::data {

dsp::SpectrogramConfig spectrogram_config(View v, const net::NetworkConfig &cfg) {
  if (v == View::raw)
    throw std::invalid_argument("the raw view has no spectrogram");
  dsp::SpectrogramConfig s;
  s.view_kind = v;
  s.n_bands = cfg.input_shape(v)[1];
  return s;
}

dsp::FeatureMatrix extract_view(const dsp::Waveform &w, View v, const net::NetworkConfig &cfg) {
  if (v == View::raw)
    return dsp::raw_view(w);
  return dsp::extract(w, spectrogram_config(v, cfg)).frames;
}

train::Clip extract_clip(const Manifest &m, const Record &r, std::span<const View> views,
                         const net::NetworkConfig &cfg) {
  train::Clip c;
  c.id = r.path;
  c.label = r.label;
  std::optional<double> duration;
  for (View v : views) {
    const dsp::Waveform w = dsp::load_wav(m.resolve(r.path_for(v)));
    if (r.path_for(v) == r.path)
      duration = w.duration();
    c.views[index_of(v)] = extract_view(w, v, cfg);
  }
  c.duration = duration ? *duration : dsp::load_wav(m.resolve(r.path)).duration();
  return c;
}

namespace {

template <class F> void parallel_for(std::size_t n, unsigned threads, F &&body) {
  if (threads == 0)
    threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < n;) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error)
              error = std::current_exception();
          }
        }
      });
  }
  if (error)
    std::rethrow_exception(error);
}

} // namespace

void write_cache(const Manifest &m, std::span<const View> views, const net::NetworkConfig &cfg,
                 const std::filesystem::path &root, unsigned threads) {
  parallel_for(m.records.size(), threads, [&](std::size_t i) {
    const Record &r = m.records[i];
    for (View v : views) {
      const dsp::Waveform w = dsp::load_wav(m.resolve(r.path_for(v)));
      dsp::write_feature_cache(dsp::feature_cache_path(root, r.path, v), v, extract_view(w, v, cfg),
                               w.sample_rate);
    }
  });
}

std::vector<train::Clip> load_clips(const Manifest &m, std::span<const std::size_t> records,
                                    std::span<const View> views, const net::NetworkConfig &cfg,
                                    const std::optional<std::filesystem::path> &cache) {
  std::vector<train::Clip> out(records.size());
  parallel_for(records.size(), 0, [&](std::size_t j) {
    const Record &r = m.records.at(records[j]);
    train::Clip c;
    c.id = r.path;
    c.label = r.label;
    c.duration = dsp::load_wav(m.resolve(r.path)).duration();
    for (View v : views) {
      std::optional<dsp::FeatureMatrix> got;
      if (cache) {
        const auto p = dsp::feature_cache_path(*cache, r.path, v);
        if (std::filesystem::exists(p)) {
          dsp::CachedFeature f = dsp::read_feature_cache(p);
          if (f.view != v || f.matrix.cols != cfg.input_shape(v)[1])
            throw dsp::CacheFormatError("stale feature cache " + p.string() +
                                        " (view or band count differs)");
          got = std::move(f.matrix);
        }
      }
      if (!got)
        got = extract_view(dsp::load_wav(m.resolve(r.path_for(v))), v, cfg);
      c.views[index_of(v)] = std::move(got);
    }
    out[j] = std::move(c);
  });
  return out;
}

} // namespace mvgb::data
