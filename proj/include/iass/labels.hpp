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

#include <filesystem>
#include <string>
#include <vector>

#include "iass/dsp.hpp"

namespace iass {

/// Per-frame activity of one instrument, aligned with a spectrogram's frame
/// axis. Confidence curves live in [0,1]; binary curves in {0,1}.
struct ActivationCurve {
  enum class Kind { Confidence, Binary };

  std::vector<double> values;
  double frame_rate = 0.0;  // frames per second (= sample_rate / hop_size)
  std::string instrument;
  Kind kind = Kind::Confidence;

  int64_t size() const { return static_cast<int64_t>(values.size()); }
};

/// Frame-level energy confidence of a mono stem, using the same framing as
/// stft so the curve aligns with the paired spectrogram. Frame RMS is mapped
/// to dB relative to the stem's loudest frame, [-60 dB, -10 dB] onto [0,1]
/// with clipping, then pre-smoothed with a 5-frame median.
ActivationCurve energy_activation(const AudioClip& stem, const FrameConfig& cfg);

/// Threshold a confidence curve; ties count as active.
ActivationCurve binarize(const ActivationCurve& curve, double threshold = 0.5);

/// Median filter with reflected edges. Kernel must be odd. Binary input
/// yields binary output.
ActivationCurve median_smooth(const ActivationCurve& curve, int kernel_frames);

/// Median over the frames belonging to each whole second; the trailing
/// partial second is included. Output length is ceil(frames / frame_rate).
ActivationCurve aggregate_seconds(const ActivationCurve& curve);

/// Probability that a random positive frame outranks a random negative one,
/// ties counted 1/2. Throws ConfigError when a class is absent.
double auc(const ActivationCurve& scores, const ActivationCurve& labels);

/// Fraction of frames where the two binary curves agree.
double frame_accuracy(const ActivationCurve& pred, const ActivationCurve& truth);

/// CSV serialization: a comment header naming instrument, frame_rate and
/// kind, then `frame_index,value` rows.
void write_activation_csv(const std::filesystem::path& path,
                          const ActivationCurve& curve);
ActivationCurve read_activation_csv(const std::filesystem::path& path);

}  // namespace iass
