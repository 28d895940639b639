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

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "iass/errors.hpp"

namespace iass {

/// Short-time analysis geometry shared by the spectrogram, label and model
/// paths. Window sizes must be powers of two (radix-2 transform).
struct FrameConfig {
  int sample_rate = 44100;
  int window_size = 4096;
  int hop_size = 1024;
  std::string window_function = "hann";
  bool center_pad = true;

  int num_bins() const { return window_size / 2 + 1; }
  double frame_rate() const {
    return static_cast<double>(sample_rate) / static_cast<double>(hop_size);
  }
  void validate() const;
  bool operator==(const FrameConfig&) const = default;
};

/// Planar multichannel audio. Channel c occupies
/// samples[c*num_samples() .. (c+1)*num_samples()).
struct AudioClip {
  std::vector<double> samples;
  int channels = 1;
  int sample_rate = 44100;

  int64_t num_samples() const {
    return channels == 0 ? 0 : static_cast<int64_t>(samples.size()) / channels;
  }
  std::span<double> channel(int c) {
    return {samples.data() + c * num_samples(),
            static_cast<size_t>(num_samples())};
  }
  std::span<const double> channel(int c) const {
    return {samples.data() + c * num_samples(),
            static_cast<size_t>(num_samples())};
  }
  bool is_mono() const { return channels == 1; }
  double duration_seconds() const {
    return static_cast<double>(num_samples()) / sample_rate;
  }

  static AudioClip mono(std::vector<double> s, int rate) {
    return AudioClip{std::move(s), 1, rate};
  }
};

/// bins x frames nonnegative magnitude plane.
struct MagSpectrogram {
  Eigen::MatrixXd values;  // (num_bins, num_frames)
  FrameConfig config;

  int64_t bins() const { return values.rows(); }
  int64_t frames() const { return values.cols(); }
};

/// bins x frames phase plane in [-pi, pi], paired with a MagSpectrogram.
struct PhaseSpectrogram {
  Eigen::MatrixXd values;
  FrameConfig config;

  int64_t bins() const { return values.rows(); }
  int64_t frames() const { return values.cols(); }
};

/// Number of analysis frames for n samples under this config.
int64_t num_frames_for(int64_t num_samples, const FrameConfig& cfg);

/// Forward short-time transform of a mono clip. Center padding reflects at
/// the signal edges; frame count is floor(n/hop)+1 (0 for an empty clip).
std::pair<MagSpectrogram, PhaseSpectrogram> stft(const AudioClip& clip,
                                                 const FrameConfig& cfg);

/// Weighted overlap-add synthesis from magnitude and phase. Output length is
/// (frames-1)*hop unless `length` asks for a specific sample count (padded
/// with trailing zeros when the request exceeds the covered range).
AudioClip istft_with_phase(const MagSpectrogram& mag,
                           const PhaseSpectrogram& phase,
                           const FrameConfig& cfg,
                           std::optional<int64_t> length = std::nullopt);

/// Channel mean. Mono input is returned unchanged.
AudioClip downmix_mono(const AudioClip& clip);

/// Root mean square over all channels. Throws DataError on an empty clip.
double rms(const AudioClip& clip);

/// Scale the clip so rms(output) == target_rms. A silent clip cannot be
/// scaled and is returned unchanged with *unscalable set (when provided).
AudioClip normalize_loudness(const AudioClip& clip, double target_rms,
                             bool* unscalable = nullptr);

/// Windowed-sinc resampler used on ingest. Returns the input unchanged when
/// rates already match.
AudioClip resample(const AudioClip& clip, int target_rate);

/// Periodic window of the given symbolic name ("hann").
std::vector<double> make_window(const std::string& name, int size);

}  // namespace iass
