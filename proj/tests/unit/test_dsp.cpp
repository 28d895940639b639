/*
 * Copyright 2026 the iass authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include <cmath>
#include <complex>

#include "iass/dsp.hpp"
#include "iass/rng.hpp"

using namespace iass;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

AudioClip noise_clip(int64_t n, int sr, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(static_cast<size_t>(n));
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return AudioClip::mono(std::move(x), sr);
}

AudioClip sine_clip(int64_t n, int sr, double freq, double phase = 0.0,
                    double amp = 1.0) {
  std::vector<double> x(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    x[static_cast<size_t>(i)] = amp * std::sin(kTwoPi * freq * i / sr + phase);
  return AudioClip::mono(std::move(x), sr);
}

double rel_rms_error(const AudioClip& a, const AudioClip& b) {
  const int64_t n = std::min(a.num_samples(), b.num_samples());
  double num = 0.0, den = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = a.samples[static_cast<size_t>(i)] - b.samples[static_cast<size_t>(i)];
    num += d * d;
    den += a.samples[static_cast<size_t>(i)] * a.samples[static_cast<size_t>(i)];
  }
  return std::sqrt(num / den);
}

// Independent oracle: direct DFT of one center-padded, windowed frame.
std::vector<std::complex<double>> naive_frame_dft(const AudioClip& clip,
                                                  const FrameConfig& cfg,
                                                  int64_t frame) {
  const int64_t n = clip.num_samples();
  const int64_t pad = cfg.window_size / 2;
  const auto window = make_window(cfg.window_function, cfg.window_size);
  std::vector<double> seg(static_cast<size_t>(cfg.window_size));
  for (int i = 0; i < cfg.window_size; ++i) {
    int64_t src = frame * cfg.hop_size - pad + i;
    // reflect without edge repetition
    while (src < 0 || src >= n) src = src < 0 ? -src : 2 * (n - 1) - src;
    seg[static_cast<size_t>(i)] = clip.samples[static_cast<size_t>(src)] * window[static_cast<size_t>(i)];
  }
  std::vector<std::complex<double>> out(static_cast<size_t>(cfg.num_bins()));
  for (int k = 0; k < cfg.num_bins(); ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int t = 0; t < cfg.window_size; ++t) {
      const double ang = -kTwoPi * k * t / cfg.window_size;
      acc += seg[static_cast<size_t>(t)] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[static_cast<size_t>(k)] = acc;
  }
  return out;
}

}  // namespace

TEST_SUITE("dsp") {

TEST_CASE("frame geometry for the default 6 s configuration") {
  FrameConfig cfg;
  const AudioClip clip = noise_clip(264600, 44100, 1);
  const auto [mag, phase] = stft(clip, cfg);
  CHECK(mag.bins() == 2049);
  CHECK(mag.frames() == 259);
  CHECK(phase.bins() == 2049);
  CHECK(phase.frames() == 259);
}

TEST_CASE("stft columns match a direct DFT oracle") {
  FrameConfig cfg;
  cfg.window_size = 256;
  cfg.hop_size = 64;
  // ramp input, the classic aliasing-free probe
  std::vector<double> ramp(2000);
  for (size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i) / 2000.0;
  const AudioClip clip = AudioClip::mono(std::move(ramp), cfg.sample_rate);

  const auto [mag, phase] = stft(clip, cfg);
  REQUIRE(mag.frames() == 2000 / 64 + 1);
  for (int64_t t : {int64_t{0}, int64_t{7}, mag.frames() - 1}) {
    const auto oracle = naive_frame_dft(clip, cfg, t);
    double peak = 0.0;
    for (const auto& c : oracle) peak = std::max(peak, std::abs(c));
    for (int b = 0; b < cfg.num_bins(); ++b) {
      CHECK(mag.values(b, t) == doctest::Approx(std::abs(oracle[static_cast<size_t>(b)]))
                                    .epsilon(1e-9)
                                    .scale(1.0));
      // phase is ill-conditioned where the magnitude vanishes
      if (std::abs(oracle[static_cast<size_t>(b)]) > 1e-6 * peak) {
        const double wrapped = std::remainder(
            phase.values(b, t) - std::arg(oracle[static_cast<size_t>(b)]), kTwoPi);
        CHECK(std::abs(wrapped) <= 1e-6);
      }
    }
  }
}

TEST_CASE("all-zero clip produces all-zero magnitude") {
  FrameConfig cfg;
  cfg.window_size = 1024;
  cfg.hop_size = 256;
  const AudioClip clip = AudioClip::mono(std::vector<double>(44100, 0.0), 44100);
  const auto [mag, phase] = stft(clip, cfg);
  CHECK(mag.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("440 Hz sine peaks at bin 41 in every interior frame") {
  FrameConfig cfg;  // 4096/1024 at 44.1 kHz
  const AudioClip clip = sine_clip(3 * 44100, 44100, 440.0);
  const auto [mag, phase] = stft(clip, cfg);
  // skip the window/hop edge frames where reflection bends the tone
  const int64_t guard = cfg.window_size / cfg.hop_size;
  for (int64_t t = guard; t < mag.frames() - guard; ++t) {
    int argmax = 0;
    mag.values.col(t).maxCoeff(&argmax);
    CHECK(argmax == 41);
  }
  // cross-check the bin index against the direct DFT of one window
  const auto oracle = naive_frame_dft(clip, cfg, mag.frames() / 2);
  int oracle_argmax = 0;
  double best = 0.0;
  for (size_t b = 0; b < oracle.size(); ++b)
    if (std::abs(oracle[b]) > best) {
      best = std::abs(oracle[b]);
      oracle_argmax = static_cast<int>(b);
    }
  CHECK(oracle_argmax == 41);
}

TEST_CASE("empty clip gives an empty spectrogram") {
  FrameConfig cfg;
  const AudioClip clip = AudioClip::mono({}, 44100);
  const auto [mag, phase] = stft(clip, cfg);
  CHECK(mag.frames() == 0);
  CHECK(istft_with_phase(mag, phase, cfg).num_samples() == 0);
}

TEST_CASE("sample-rate mismatch is a configuration error") {
  FrameConfig cfg;
  const AudioClip clip = noise_clip(4096, 22050, 2);
  CHECK_THROWS_AS((void)stft(clip, cfg), ConfigError);
}

TEST_CASE("round trip reconstructs noise to 1e-6") {
  FrameConfig cfg;
  for (uint64_t seed : {3u, 4u, 5u}) {
    const AudioClip clip = noise_clip(44100, 44100, seed);
    const auto [mag, phase] = stft(clip, cfg);
    const AudioClip back = istft_with_phase(mag, phase, cfg, clip.num_samples());
    CHECK(back.num_samples() == clip.num_samples());
    CHECK(rel_rms_error(clip, back) <= 1e-6);
  }
}

TEST_CASE("round trip at 50% overlap as used by the fixtures") {
  FrameConfig cfg;
  cfg.window_size = 1024;
  cfg.hop_size = 512;
  const AudioClip clip = noise_clip(32000, 44100, 11);
  const auto [mag, phase] = stft(clip, cfg);
  const AudioClip back = istft_with_phase(mag, phase, cfg, clip.num_samples());
  CHECK(rel_rms_error(clip, back) <= 1e-6);
}

TEST_CASE("zeroed magnitude synthesizes silence") {
  FrameConfig cfg;
  cfg.window_size = 1024;
  cfg.hop_size = 256;
  const AudioClip clip = noise_clip(22050, 44100, 6);
  auto [mag, phase] = stft(clip, cfg);
  mag.values.setZero();
  const AudioClip out = istft_with_phase(mag, phase, cfg);
  CHECK(out.num_samples() > 0);
  for (double v : out.samples) CHECK(v == 0.0);
}

TEST_CASE("halved magnitude halves the signal") {
  FrameConfig cfg;
  cfg.window_size = 1024;
  cfg.hop_size = 256;
  const AudioClip clip = noise_clip(22050, 44100, 7);
  auto [mag, phase] = stft(clip, cfg);
  mag.values *= 0.5;
  const AudioClip half = istft_with_phase(mag, phase, cfg, clip.num_samples());
  AudioClip expected = clip;
  for (double& v : expected.samples) v *= 0.5;
  CHECK(rel_rms_error(expected, half) <= 1e-6);
}

TEST_CASE("istft default length is within one hop of the input") {
  FrameConfig cfg;
  cfg.window_size = 1024;
  cfg.hop_size = 256;
  const AudioClip clip = noise_clip(10000, 44100, 8);
  const auto [mag, phase] = stft(clip, cfg);
  const AudioClip back = istft_with_phase(mag, phase, cfg);
  CHECK(back.num_samples() <= clip.num_samples());
  CHECK(clip.num_samples() - back.num_samples() < cfg.hop_size);
}

TEST_CASE("istft rejects mismatched shapes") {
  FrameConfig cfg;
  cfg.window_size = 1024;
  cfg.hop_size = 256;
  const auto [mag, phase] = stft(noise_clip(8192, 44100, 9), cfg);
  PhaseSpectrogram truncated = phase;
  truncated.values = phase.values.leftCols(phase.frames() - 1);
  CHECK_THROWS_AS((void)istft_with_phase(mag, truncated, cfg), ConfigError);
}

TEST_CASE("magnitude is invariant to the phase of a sinusoid") {
  FrameConfig cfg;
  const AudioClip a = sine_clip(2 * 44100, 44100, 440.0, 0.0);
  const AudioClip b = sine_clip(2 * 44100, 44100, 440.0, 1.234);
  const auto [mag_a, pa] = stft(a, cfg);
  const auto [mag_b, pb] = stft(b, cfg);
  const int64_t guard = cfg.window_size / cfg.hop_size;
  const double peak_energy = mag_a.values.maxCoeff() * mag_a.values.maxCoeff();
  for (int64_t t = guard; t < mag_a.frames() - guard; ++t) {
    const double diff = (mag_a.values.col(t).array().square() -
                         mag_b.values.col(t).array().square())
                            .abs()
                            .maxCoeff();
    CHECK(diff / peak_energy <= 1e-6);
  }
}

TEST_CASE("downmix") {
  const int64_t n = 1000;
  AudioClip stereo;
  stereo.channels = 2;
  stereo.sample_rate = 44100;
  stereo.samples.resize(2 * n);

  SUBCASE("identical channels pass through") {
    for (int64_t i = 0; i < n; ++i)
      stereo.samples[static_cast<size_t>(i)] = stereo.samples[static_cast<size_t>(n + i)] =
          std::sin(0.01 * static_cast<double>(i));
    const AudioClip mono = downmix_mono(stereo);
    REQUIRE(mono.is_mono());
    for (int64_t i = 0; i < n; ++i)
      CHECK(mono.samples[static_cast<size_t>(i)] ==
            doctest::Approx(stereo.samples[static_cast<size_t>(i)]));
  }
  SUBCASE("anti-phase channels cancel") {
    for (int64_t i = 0; i < n; ++i) {
      stereo.samples[static_cast<size_t>(i)] = std::sin(0.01 * static_cast<double>(i));
      stereo.samples[static_cast<size_t>(n + i)] = -stereo.samples[static_cast<size_t>(i)];
    }
    const AudioClip mono = downmix_mono(stereo);
    for (double v : mono.samples) CHECK(v == 0.0);
  }
  SUBCASE("mono input is unchanged") {
    const AudioClip clip = noise_clip(n, 44100, 10);
    const AudioClip out = downmix_mono(clip);
    CHECK(out.samples == clip.samples);
  }
  SUBCASE("commutes with scalar gain") {
    Rng rng(12);
    for (auto& v : stereo.samples) v = rng.uniform(-1.0, 1.0);
    const double gain = 0.37;
    AudioClip scaled = stereo;
    for (auto& v : scaled.samples) v *= gain;
    const AudioClip a = downmix_mono(scaled);
    AudioClip b = downmix_mono(stereo);
    for (auto& v : b.samples) v *= gain;
    for (int64_t i = 0; i < n; ++i)
      CHECK(a.samples[static_cast<size_t>(i)] ==
            doctest::Approx(b.samples[static_cast<size_t>(i)]).epsilon(1e-12));
  }
}

TEST_CASE("rms") {
  CHECK(rms(AudioClip::mono(std::vector<double>(512, 0.5), 44100)) == doctest::Approx(0.5));
  CHECK(rms(sine_clip(44100, 44100, 100.0)) ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-4));
  CHECK(rms(AudioClip::mono(std::vector<double>(512, 0.0), 44100)) == 0.0);
  CHECK_THROWS_AS((void)rms(AudioClip::mono({}, 44100)), DataError);
}

TEST_CASE("normalize_loudness") {
  SUBCASE("scales to the target") {
    AudioClip clip = AudioClip::mono(std::vector<double>(256, 0.2), 44100);
    const AudioClip out = normalize_loudness(clip, 0.1);
    for (double v : out.samples) CHECK(v == doctest::Approx(0.1));
    CHECK(rms(out) == doctest::Approx(0.1).epsilon(1e-9));
  }
  SUBCASE("identity when already at target") {
    // 0.125 is exactly representable, so the gain is exactly 1
    const AudioClip clip = AudioClip::mono(std::vector<double>(256, 0.125), 44100);
    const AudioClip out = normalize_loudness(clip, 0.125);
    CHECK(out.samples == clip.samples);
  }
  SUBCASE("silent input flagged unscalable") {
    const AudioClip clip = AudioClip::mono(std::vector<double>(256, 0.0), 44100);
    bool unscalable = false;
    const AudioClip out = normalize_loudness(clip, 0.1, &unscalable);
    CHECK(unscalable);
    CHECK(out.samples == clip.samples);
  }
  SUBCASE("property: rms hits target for random non-silent clips") {
    for (uint64_t seed = 20; seed < 26; ++seed) {
      const AudioClip clip = noise_clip(4096, 44100, seed);
      Rng rng(seed + 100);
      const double target = rng.uniform(0.01, 0.8);
      const AudioClip out = normalize_loudness(clip, target);
      CHECK(std::abs(rms(out) - target) / target <= 1e-9);
    }
  }
  SUBCASE("rejects non-positive targets") {
    CHECK_THROWS_AS((void)normalize_loudness(noise_clip(64, 44100, 1), 0.0), ConfigError);
  }
}

TEST_CASE("resample doubles the sample count and keeps the tone") {
  const AudioClip clip = sine_clip(22050, 22050, 1000.0);
  const AudioClip up = resample(clip, 44100);
  CHECK(up.sample_rate == 44100);
  CHECK(up.num_samples() == 44100);

  FrameConfig cfg;
  cfg.window_size = 4096;
  cfg.hop_size = 1024;
  const auto [mag, phase] = stft(up, cfg);
  int argmax = 0;
  mag.values.col(mag.frames() / 2).maxCoeff(&argmax);
  CHECK(argmax == static_cast<int>(std::lround(1000.0 * 4096 / 44100)));
}

TEST_CASE("frame config validation") {
  FrameConfig cfg;
  cfg.hop_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.hop_size = 8192;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FrameConfig{};
  cfg.window_size = 1000;  // not a power of two
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FrameConfig{};
  cfg.window_function = "blackman";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

}  // TEST_SUITE
