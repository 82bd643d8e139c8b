// SPDX-License-Identifier: Apache-2.0
#include "mvgb/dsp/feature_cache.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace mvgb::dsp {

namespace {

void put32(std::string &out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get32(const unsigned char *p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

constexpr std::size_t kHeaderBytes = 4 + 4 + 1 + 4 + 4 + 4;

} // namespace

void write_feature_cache(const std::filesystem::path &path, View view, const FeatureMatrix &m,
                         std::uint32_t sample_rate) {
  if (m.values.size() != m.rows * m.cols)
    throw std::invalid_argument("feature cache: matrix size does not match its extents");
  std::string out;
  out.reserve(kHeaderBytes + 4 * m.values.size());
  out += "BCFV";
  put32(out, kFeatureCacheVersion);
  out.push_back(static_cast<char>(view));
  put32(out, static_cast<std::uint32_t>(m.rows));
  put32(out, static_cast<std::uint32_t>(m.cols));
  put32(out, sample_rate);
  for (float v : m.values)
    put32(out, std::bit_cast<std::uint32_t>(v));

  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size())))
    throw std::runtime_error("cannot write " + path.string());
}

CachedFeature read_feature_cache(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CacheFormatError("cannot open " + path.string());
  std::vector<unsigned char> b((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (b.size() < kHeaderBytes || std::memcmp(b.data(), "BCFV", 4) != 0)
    throw CacheFormatError(where + "not a feature cache record");
  if (get32(b.data() + 4) != kFeatureCacheVersion)
    throw CacheFormatError(where + "unsupported version " + std::to_string(get32(b.data() + 4)));
  CachedFeature c;
  if (b[8] > static_cast<unsigned char>(View::raw))
    throw CacheFormatError(where + "unknown view kind " + std::to_string(b[8]));
  c.view = static_cast<View>(b[8]);
  c.matrix.rows = get32(b.data() + 9);
  c.matrix.cols = get32(b.data() + 13);
  c.sample_rate = get32(b.data() + 17);
  const std::size_t n = c.matrix.rows * c.matrix.cols;
  if (b.size() != kHeaderBytes + 4 * n)
    throw CacheFormatError(where + "payload size does not match header");
  c.matrix.values.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    c.matrix.values[i] = std::bit_cast<float>(get32(b.data() + kHeaderBytes + 4 * i));
  return c;
}

std::filesystem::path feature_cache_path(const std::filesystem::path &root,
                                         const std::filesystem::path &relative_audio, View view) {
  std::filesystem::path rel = relative_audio;
  rel.replace_extension(std::string(".") + std::string(name_of(view)) + ".bcfv");
  return root / rel;
}

} // namespace mvgb::dsp
