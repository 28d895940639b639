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
#include <optional>

#include "iass/model.hpp"

namespace iass {

enum class ActivationSource { Predicted, GroundTruth, AllOnes };

struct InferenceConfig {
  bool use_activation_weight = true;
  int smooth_kernel_frames = 9;
  double activation_threshold = 0.5;
  ActivationSource activation_source = ActivationSource::Predicted;
  double segment_seconds = 12.0;  // network processing window

  void validate() const;
};

/// Multiply spectrogram column t by act[t]. Active frames pass unchanged.
MagSpectrogram apply_activation_weight(const MagSpectrogram& mag,
                                       const ActivationCurve& act);

struct SeparationResult {
  AudioClip estimate;
  ActivationCurve act_used;  // binary weight actually applied
  ActivationCurve act_raw;   // raw sigmoid confidences
};

/// Full inference pipeline: spectrogram, mask, optional smoothed binary
/// activation weighting along time, synthesis with the mixture phase.
/// `oracle_act` is required when activation_source == GroundTruth. Stereo
/// inputs run per channel with OR-combined activation weights.
SeparationResult separate(SeparatorParams& params, const AudioClip& mixture,
                          const FrameConfig& frame_cfg, const InferenceConfig& cfg,
                          const std::optional<ActivationCurve>& oracle_act = std::nullopt);

/// Separate every song of an evaluation set, writing
/// `<out>/<song>/<instrument>_estimate.wav` plus the raw and applied
/// activation CSVs. Per-song failures are reported and skipped; the
/// return value is the number of failures.
int batch_separate(SeparatorParams& params, const std::vector<EvalSong>& eval_set,
                   const std::string& instrument, const FrameConfig& frame_cfg,
                   const InferenceConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace iass
