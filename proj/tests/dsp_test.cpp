// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <unistd.h>

#include "mvgb/dsp/feature_cache.hpp"
#include "mvgb/dsp/segment.hpp"
#include "mvgb/dsp/spectrogram.hpp"
#include "mvgb/dsp/wav.hpp"

using namespace mvgb;
using namespace mvgb::dsp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path p = fs::temp_directory_path() / ("mvgb_dsp_" + std::to_string(::getpid()));
  fs::create_directories(p);
  return p;
}

Waveform sine(double hz, double seconds, std::uint32_t rate, double amp = 1.0) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(i) / rate);
  return w;
}

Waveform noise(double seconds, std::uint32_t rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(static_cast<std::size_t>(seconds * rate));
  for (double &s : w.samples)
    s = u(rng);
  return w;
}

SpectrogramConfig config(View v) {
  SpectrogramConfig c;
  c.view_kind = v;
  return c;
}

// Raw RIFF writer for layouts write_wav does not produce.
void write_raw_wav(const fs::path &p, std::uint16_t format, std::uint16_t channels,
                   std::uint32_t rate, std::uint16_t bits, const std::string &payload) {
  auto u32 = [](std::string &s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
      s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  auto u16 = [](std::string &s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xff));
    s.push_back(static_cast<char>(v >> 8));
  };
  std::string s = "RIFF";
  u32(s, 36 + static_cast<std::uint32_t>(payload.size()));
  s += "WAVEfmt ";
  u32(s, 16);
  u16(s, format);
  u16(s, channels);
  u32(s, rate);
  u32(s, rate * channels * bits / 8);
  u16(s, static_cast<std::uint16_t>(channels * bits / 8));
  u16(s, bits);
  s += "data";
  u32(s, static_cast<std::uint32_t>(payload.size()));
  s += payload;
  std::ofstream(p, std::ios::binary).write(s.data(), static_cast<std::streamsize>(s.size()));
}

} // namespace

TEST(Wav, MonoSixteenBitSampleCount) {
  auto path = temp_dir() / "five.wav";
  write_wav(path, sine(440.0, 5.0, 44100, 0.5));
  Waveform w = load_wav(path);
  EXPECT_EQ(w.sample_rate, 44100u);
  EXPECT_EQ(w.samples.size(), 220500u);
  EXPECT_NEAR(w.samples[25], 0.5 * std::sin(2 * std::numbers::pi * 440 * 25 / 44100.0), 1e-4);
}

TEST(Wav, StereoOppositeChannelsAverageToZero) {
  std::string payload;
  for (int i = 0; i < 100; ++i) {
    auto v = static_cast<std::int16_t>((i * 311) % 20000 - 10000);
    auto nv = static_cast<std::int16_t>(-v);
    for (std::int16_t s : {v, nv}) {
      payload.push_back(static_cast<char>(s & 0xff));
      payload.push_back(static_cast<char>((s >> 8) & 0xff));
    }
  }
  auto path = temp_dir() / "stereo.wav";
  write_raw_wav(path, 1, 2, 22050, 16, payload);
  Waveform w = load_wav(path);
  ASSERT_EQ(w.samples.size(), 100u);
  for (double s : w.samples)
    EXPECT_EQ(s, 0.0);
}

TEST(Wav, TwentyFourBitAndFloat) {
  auto dir = temp_dir();
  std::string p24;
  for (std::int32_t v : {0x400000, -0x400000}) // +-0.5
    for (int b = 0; b < 3; ++b)
      p24.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  write_raw_wav(dir / "w24.wav", 1, 1, 8000, 24, p24);
  Waveform a = load_wav(dir / "w24.wav");
  EXPECT_DOUBLE_EQ(a.samples[0], 0.5);
  EXPECT_DOUBLE_EQ(a.samples[1], -0.5);

  std::string pf;
  float f = -0.25f;
  pf.append(reinterpret_cast<const char *>(&f), 4);
  write_raw_wav(dir / "wf.wav", 3, 1, 8000, 32, pf);
  EXPECT_DOUBLE_EQ(load_wav(dir / "wf.wav").samples[0], -0.25);
}

TEST(Wav, RejectsBadInput) {
  auto dir = temp_dir();
  std::ofstream(dir / "junk.wav") << "OggS this is not a wave file";
  EXPECT_THROW(load_wav(dir / "junk.wav"), AudioFormatError);
  std::ofstream(dir / "short.wav") << "RIFF";
  EXPECT_THROW(load_wav(dir / "short.wav"), AudioFormatError);
  write_raw_wav(dir / "alaw.wav", 6, 1, 8000, 8, "abcd");
  EXPECT_THROW(load_wav(dir / "alaw.wav"), AudioFormatError);
  EXPECT_THROW(load_wav(dir / "missing.wav"), AudioFormatError);
}

TEST(Stft, FrameCountFormula) {
  StftGeometry g = StftGeometry::from(config(View::mel), 44100);
  EXPECT_EQ(g.window, 1764u);
  EXPECT_EQ(g.hop, 882u);
  EXPECT_EQ(g.frames(30 * 44100), 1499u);
  EXPECT_THROW(g.frames(1000), SignalTooShort);
}

TEST(Mel, ThirtySecondsShape) {
  Spectrogram s = mel_spectrogram(noise(30.0, 44100, 1), config(View::mel));
  EXPECT_EQ(s.time_frames(), 1499u);
  EXPECT_EQ(s.bands(), 64u);
}

TEST(Mel, SilenceIsLogFloor) {
  Waveform w;
  w.sample_rate = 44100;
  w.samples.assign(44100, 0.0);
  Spectrogram s = mel_spectrogram(w, config(View::mel));
  for (float v : s.frames.values)
    EXPECT_EQ(v, static_cast<float>(std::log(kLogFloor)));
}

TEST(Mel, ToneLandsInContainingTriangle) {
  const std::uint32_t rate = 44100;
  StftGeometry g = StftGeometry::from(config(View::mel), rate);
  FilterBank fb = mel_filterbank(64, rate, g.n_fft);
  // Oracle: the band whose triangle carries the largest weight at 1 kHz,
  // evaluated from the band edges directly.
  std::size_t expected = 0;
  double best = -1.0;
  for (std::size_t b = 0; b < 64; ++b) {
    double lo = b == 0 ? 0.0 : fb.center_freqs[b - 1];
    double hi = b + 1 < 64 ? fb.center_freqs[b + 1] : rate / 2.0;
    double c = fb.center_freqs[b];
    double f = 1000.0;
    double wgt = (f > lo && f <= c) ? (f - lo) / (c - lo) : (f > c && f < hi) ? (hi - f) / (hi - c) : 0.0;
    if (wgt > best) {
      best = wgt;
      expected = b;
    }
  }
  Spectrogram s = mel_spectrogram(sine(1000.0, 1.0, rate), config(View::mel));
  for (std::size_t t = 0; t < s.time_frames(); ++t) {
    std::size_t arg = 0;
    for (std::size_t b = 1; b < 64; ++b)
      if (s.frames.at(t, b) > s.frames.at(t, arg))
        arg = b;
    EXPECT_EQ(arg, expected) << "frame " << t;
  }
}

TEST(Gammatone, ShapeAndCentres) {
  Spectrogram s = gammatone_spectrogram(noise(30.0, 44100, 2), config(View::gam));
  EXPECT_EQ(s.time_frames(), 1499u);
  EXPECT_EQ(s.bands(), 64u);
  FilterBank fb = gammatone_filterbank(64, 44100, 2048);
  for (std::size_t b = 1; b < 64; ++b)
    EXPECT_GT(fb.center_freqs[b], fb.center_freqs[b - 1]);
  EXPECT_GT(fb.center_freqs.front(), 0.0);
  EXPECT_LE(fb.center_freqs.back(), 22050.0);
}

TEST(Gammatone, WhiteNoiseEnergiesPositive) {
  Spectrogram s = gammatone_spectrogram(noise(1.0, 22050, 3), config(View::gam));
  const float floor = static_cast<float>(std::log(kLogFloor));
  for (float v : s.frames.values) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(v, floor);
  }
}

TEST(Filterbanks, NonnegativeAndIncreasing) {
  for (const FilterBank &fb : {mel_filterbank(64, 44100, 2048), gammatone_filterbank(64, 44100, 2048),
                               mel_filterbank(16, 8000, 512), gammatone_filterbank(16, 8000, 512)}) {
    for (std::size_t b = 1; b < fb.center_freqs.size(); ++b)
      EXPECT_GT(fb.center_freqs[b], fb.center_freqs[b - 1]);
    for (const auto &row : fb.weights)
      for (double w : row)
        EXPECT_GE(w, 0.0);
  }
  SpectrogramConfig c = config(View::cqt);
  CqtBank bank = cqt_bank(c, 44100);
  for (std::size_t k = 1; k < bank.center_freqs.size(); ++k)
    EXPECT_GT(bank.center_freqs[k], bank.center_freqs[k - 1]);
  EXPECT_LT(bank.center_freqs.back(), 22050.0);
}

TEST(Cqt, ThirtySecondsShape) {
  Spectrogram s = cqt_spectrogram(noise(30.0, 44100, 4), config(View::cqt));
  EXPECT_EQ(s.time_frames(), 1292u);
  EXPECT_EQ(s.bands(), 64u);
  EXPECT_EQ(default_cqt_hop(22050), 512u);
}

TEST(Cqt, SemitoneSpacing) {
  CqtBank bank = cqt_bank(config(View::cqt), 44100);
  ASSERT_EQ(bank.center_freqs.size(), 64u);
  for (std::size_t k = 1; k < 64; ++k)
    EXPECT_NEAR(bank.center_freqs[k] / bank.center_freqs[k - 1], std::pow(2.0, 1.0 / 12.0), 1e-12);
}

TEST(Cqt, ToneAtBinCentreWins) {
  SpectrogramConfig c = config(View::cqt);
  c.n_bands = 16;
  const std::uint32_t rate = 8000;
  CqtBank bank = cqt_bank(c, rate);
  for (std::size_t target : {2u, 9u, 15u}) {
    Spectrogram s = cqt_spectrogram(sine(bank.center_freqs[target], 1.0, rate), c);
    const std::size_t margin = bank.longest_kernel() / bank.hop + 1;
    for (std::size_t t = margin; t + margin < s.time_frames(); ++t) {
      std::size_t arg = 0;
      for (std::size_t b = 1; b < 16; ++b)
        if (s.frames.at(t, b) > s.frames.at(t, arg))
          arg = b;
      EXPECT_EQ(arg, target) << "frame " << t;
    }
  }
}

TEST(Cqt, TooShortForLowestKernel) {
  Waveform w = sine(600.0, 0.01, 44100);
  EXPECT_THROW(cqt_spectrogram(w, config(View::cqt)), SignalTooShort);
}

TEST(Features, DeterministicAcrossRuns) {
  Waveform w = noise(2.0, 22050, 5);
  for (View v : {View::mel, View::gam, View::cqt})
    EXPECT_EQ(extract(w, config(v)).frames, extract(w, config(v)).frames);
}

TEST(Features, ScalingShiftsLogByLogC) {
  Waveform w = noise(1.0, 22050, 6);
  Waveform scaled = w;
  const double c = 0.37;
  for (double &s : scaled.samples)
    s *= c;
  for (View v : {View::mel, View::gam, View::cqt}) {
    Spectrogram a = extract(w, config(v)), b = extract(scaled, config(v));
    for (std::size_t i = 0; i < a.frames.values.size(); ++i) {
      if (b.frames.values[i] <= std::log(kLogFloor) + 1.0)
        continue; // floored
      EXPECT_NEAR(b.frames.values[i] - a.frames.values[i], std::log(c), 2e-5);
    }
  }
}

TEST(Segment, InferOneSegmentPerSecond) {
  FeatureMatrix m{220500, 1, std::vector<float>(220500)};
  std::mt19937_64 rng(1);
  EXPECT_EQ(segment(m, {66150}, SegmentMode::infer, 5.0, rng).size(), 5u);
}

TEST(Segment, ExactLengthGivesIdenticalSegments) {
  FeatureMatrix m{75, 2, std::vector<float>(150)};
  for (std::size_t i = 0; i < 150; ++i)
    m.values[i] = static_cast<float>(i);
  std::mt19937_64 rng(1);
  auto segs = segment(m, {75}, SegmentMode::infer, 3.0, rng);
  ASSERT_EQ(segs.size(), 3u);
  for (const auto &s : segs)
    EXPECT_EQ(s, m);
  EXPECT_EQ(evenly_spaced_offsets(75, 75, 3), (std::vector<std::size_t>{0, 0, 0}));
}

TEST(Segment, EvenlySpacedOffsetsMatchLinspace) {
  auto offs = evenly_spaced_offsets(1499, 75, 30);
  ASSERT_EQ(offs.size(), 30u);
  for (std::size_t i = 0; i < 30; ++i) {
    // Integer round-half-up of i * 1424 / 29.
    const std::size_t expected = (2 * i * 1424 + 29) / 58;
    EXPECT_EQ(offs[i], expected);
  }
  EXPECT_EQ(offs.front(), 0u);
  EXPECT_EQ(offs.back(), 1424u);
}

TEST(Segment, TrainCropAndErrors) {
  FeatureMatrix m{100, 1, std::vector<float>(100)};
  for (std::size_t i = 0; i < 100; ++i)
    m.values[i] = static_cast<float>(i);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    auto s = segment(m, {16}, SegmentMode::train, 1.0, rng);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].rows, 16u);
    EXPECT_EQ(s[0].values[15] - s[0].values[0], 15.0f);
  }
  EXPECT_THROW(segment(m, {101}, SegmentMode::train, 1.0, rng), SignalTooShort);
}

TEST(FeatureCache, RoundTripIsBitIdentical) {
  Spectrogram s = mel_spectrogram(noise(1.0, 22050, 8), config(View::mel));
  auto path = feature_cache_path(temp_dir() / "cache", "clips/a.wav", View::mel);
  EXPECT_EQ(path.filename(), "a.mel.bcfv");
  write_feature_cache(path, View::mel, s.frames, 22050);
  CachedFeature c = read_feature_cache(path);
  EXPECT_EQ(c.view, View::mel);
  EXPECT_EQ(c.sample_rate, 22050u);
  EXPECT_EQ(c.matrix, s.frames);

  std::ofstream(temp_dir() / "bad.bcfv") << "XXXX";
  EXPECT_THROW(read_feature_cache(temp_dir() / "bad.bcfv"), CacheFormatError);
}

TEST(Views, ParseList) {
  EXPECT_EQ(parse_view_list("cqt,mel"), (std::vector<View>{View::mel, View::cqt}));
  EXPECT_THROW(parse_view_list("mel,mfcc"), std::invalid_argument);
  EXPECT_THROW(parse_view_list("mel,mel"), std::invalid_argument);
}
