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

#include "iass/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "iass/fft.hpp"

namespace iass {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Reflection index without repeating the edge sample ("bounce"). Handles
// arbitrarily deep reflection for very short signals.
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

}  // namespace

void FrameConfig::validate() const {
  if (sample_rate <= 0) throw ConfigError("FrameConfig: sample_rate must be positive");
  if (window_size <= 0 || !is_pow2(static_cast<size_t>(window_size)))
    throw ConfigError("FrameConfig: window_size must be a power of two");
  if (hop_size < 1 || hop_size > window_size)
    throw ConfigError("FrameConfig: hop_size must be in [1, window_size]");
  if (window_function != "hann")
    throw ConfigError("FrameConfig: unsupported window '" + window_function + "'");
}

std::vector<double> make_window(const std::string& name, int size) {
  if (name != "hann") throw ConfigError("unsupported window '" + name + "'");
  std::vector<double> w(size);
  for (int i = 0; i < size; ++i)
    w[i] = 0.5 - 0.5 * std::cos(kTwoPi * i / size);  // periodic form
  return w;
}

int64_t num_frames_for(int64_t num_samples, const FrameConfig& cfg) {
  if (num_samples == 0) return 0;
  return num_samples / cfg.hop_size + 1;
}

std::pair<MagSpectrogram, PhaseSpectrogram> stft(const AudioClip& clip,
                                                 const FrameConfig& cfg) {
  cfg.validate();
  if (clip.sample_rate != cfg.sample_rate)
    throw ConfigError("stft: clip sample rate " + std::to_string(clip.sample_rate) +
                      " does not match config " + std::to_string(cfg.sample_rate));
  if (!clip.is_mono()) throw ConfigError("stft: input must be mono");

  const int64_t n = clip.num_samples();
  const int win = cfg.window_size;
  const int hop = cfg.hop_size;
  const int bins = cfg.num_bins();
  const int64_t frames = num_frames_for(n, cfg);

  MagSpectrogram mag{Eigen::MatrixXd::Zero(bins, frames), cfg};
  PhaseSpectrogram phase{Eigen::MatrixXd::Zero(bins, frames), cfg};
  if (frames == 0) return {std::move(mag), std::move(phase)};

  const auto window = make_window(cfg.window_function, win);
  const auto x = clip.channel(0);
  const int64_t pad = cfg.center_pad ? win / 2 : 0;

  std::vector<double> frame(win);
  for (int64_t t = 0; t < frames; ++t) {
    const int64_t start = t * hop - pad;
    for (int i = 0; i < win; ++i) {
      const int64_t src = start + i;
      double v;
      if (src >= 0 && src < n) {
        v = x[static_cast<size_t>(src)];
      } else if (cfg.center_pad) {
        v = x[static_cast<size_t>(reflect_index(src, n))];
      } else {
        v = 0.0;
      }
      frame[i] = v * window[i];
    }
    const auto spec = rfft(frame.data(), static_cast<size_t>(win));
    for (int b = 0; b < bins; ++b) {
      mag.values(b, t) = std::abs(spec[b]);
      phase.values(b, t) = std::arg(spec[b]);
    }
  }
  return {std::move(mag), std::move(phase)};
}

AudioClip istft_with_phase(const MagSpectrogram& mag,
                           const PhaseSpectrogram& phase,
                           const FrameConfig& cfg,
                           std::optional<int64_t> length) {
  cfg.validate();
  if (mag.values.rows() != phase.values.rows() ||
      mag.values.cols() != phase.values.cols())
    throw ConfigError("istft_with_phase: magnitude/phase shape mismatch");
  if (mag.values.rows() != cfg.num_bins())
    throw ConfigError("istft_with_phase: bin count does not match config");

  const int win = cfg.window_size;
  const int hop = cfg.hop_size;
  const int bins = cfg.num_bins();
  const int64_t frames = mag.values.cols();
  const int64_t pad = cfg.center_pad ? win / 2 : 0;

  const int64_t default_len = frames == 0 ? 0 : (frames - 1) * hop;
  const int64_t out_len = length.value_or(default_len);
  AudioClip out = AudioClip::mono(std::vector<double>(out_len, 0.0), cfg.sample_rate);
  if (frames == 0 || out_len == 0) return out;

  const auto window = make_window(cfg.window_function, win);
  const int64_t padded_len = (frames - 1) * hop + win;
  std::vector<double> acc(padded_len, 0.0);
  std::vector<double> norm(padded_len, 0.0);

  std::vector<std::complex<double>> spec(bins);
  for (int64_t t = 0; t < frames; ++t) {
    for (int b = 0; b < bins; ++b)
      spec[b] = std::polar(mag.values(b, t), phase.values(b, t));
    const auto frame = irfft(spec, static_cast<size_t>(win));
    const int64_t off = t * hop;
    for (int i = 0; i < win; ++i) {
      acc[off + i] += frame[i] * window[i];
      norm[off + i] += window[i] * window[i];
    }
  }

  constexpr double kNormFloor = 1e-12;
  for (int64_t i = 0; i < out_len; ++i) {
    const int64_t p = i + pad;
    if (p < padded_len && norm[p] > kNormFloor) out.samples[i] = acc[p] / norm[p];
  }
  return out;
}

AudioClip downmix_mono(const AudioClip& clip) {
  if (clip.channels < 1 || clip.channels > 2)
    throw ConfigError("downmix_mono: expected 1 or 2 channels");
  if (clip.is_mono()) return clip;
  const int64_t n = clip.num_samples();
  AudioClip out = AudioClip::mono(std::vector<double>(n), clip.sample_rate);
  const auto l = clip.channel(0);
  const auto r = clip.channel(1);
  for (int64_t i = 0; i < n; ++i) out.samples[i] = 0.5 * (l[i] + r[i]);
  return out;
}

double rms(const AudioClip& clip) {
  if (clip.samples.empty()) throw DataError("rms: empty clip");
  double acc = 0.0;
  for (double s : clip.samples) acc += s * s;
  return std::sqrt(acc / static_cast<double>(clip.samples.size()));
}

AudioClip normalize_loudness(const AudioClip& clip, double target_rms,
                             bool* unscalable) {
  if (target_rms <= 0.0) throw ConfigError("normalize_loudness: target_rms must be > 0");
  if (unscalable) *unscalable = false;
  if (clip.samples.empty()) {
    if (unscalable) *unscalable = true;
    return clip;
  }
  const double current = rms(clip);
  if (current == 0.0) {
    if (unscalable) *unscalable = true;
    return clip;
  }
  AudioClip out = clip;
  const double gain = target_rms / current;
  for (double& s : out.samples) s *= gain;
  return out;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ConfigError("resample: target rate must be positive");
  if (clip.sample_rate == target_rate) return clip;

  const int64_t n = clip.num_samples();
  const double ratio = static_cast<double>(clip.sample_rate) / target_rate;
  const int64_t out_n = static_cast<int64_t>(
      std::ceil(static_cast<double>(n) * target_rate / clip.sample_rate));

  // Hann-windowed sinc, cutoff at the lower Nyquist.
  constexpr int kHalfTaps = 32;
  const double cutoff = std::min(1.0, 1.0 / ratio);

  AudioClip out;
  out.channels = clip.channels;
  out.sample_rate = target_rate;
  out.samples.resize(static_cast<size_t>(out_n) * clip.channels, 0.0);

  for (int c = 0; c < clip.channels; ++c) {
    const auto src = clip.channel(c);
    double* dst = out.samples.data() + static_cast<size_t>(c) * out_n;
    for (int64_t j = 0; j < out_n; ++j) {
      const double center = static_cast<double>(j) * ratio;
      const int64_t lo = static_cast<int64_t>(std::floor(center)) - kHalfTaps + 1;
      const int64_t hi = static_cast<int64_t>(std::floor(center)) + kHalfTaps;
      double acc = 0.0;
      for (int64_t i = std::max<int64_t>(0, lo); i <= std::min(n - 1, hi); ++i) {
        const double d = (static_cast<double>(i) - center) * cutoff;
        double s;
        if (std::abs(d) < 1e-12) {
          s = 1.0;
        } else {
          s = std::sin(M_PI * d) / (M_PI * d);
        }
        const double u = (static_cast<double>(i) - center) / kHalfTaps;
        const double w = std::abs(u) < 1.0 ? 0.5 + 0.5 * std::cos(M_PI * u) : 0.0;
        acc += src[static_cast<size_t>(i)] * s * w * cutoff;
      }
      dst[j] = acc;
    }
  }
  return out;
}

}  // namespace iass
