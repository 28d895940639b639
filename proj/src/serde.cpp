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

#include "iass/serde.hpp"

namespace iass {

using nlohmann::json;

namespace {
template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}
}  // namespace

void to_json(json& j, const FrameConfig& c) {
  j = json{{"sample_rate", c.sample_rate},
           {"window_size", c.window_size},
           {"hop_size", c.hop_size},
           {"window_function", c.window_function},
           {"center_pad", c.center_pad}};
}

void from_json(const json& j, FrameConfig& c) {
  get_opt(j, "sample_rate", c.sample_rate);
  get_opt(j, "window_size", c.window_size);
  get_opt(j, "hop_size", c.hop_size);
  get_opt(j, "window_function", c.window_function);
  get_opt(j, "center_pad", c.center_pad);
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"num_blocks", c.num_blocks},
           {"convs_per_block", c.convs_per_block},
           {"channel_widths", c.channel_widths},
           {"inner_kernel", c.inner_kernel},
           {"resample_kernel", c.resample_kernel},
           {"resample_stride", c.resample_stride},
           {"leaky_slope", c.leaky_slope},
           {"classifier_layers", c.classifier_layers},
           {"alpha", c.alpha},
           {"mask_nonlinearity", c.mask_nonlinearity}};
}

void from_json(const json& j, ModelConfig& c) {
  get_opt(j, "num_blocks", c.num_blocks);
  get_opt(j, "convs_per_block", c.convs_per_block);
  get_opt(j, "channel_widths", c.channel_widths);
  get_opt(j, "inner_kernel", c.inner_kernel);
  get_opt(j, "resample_kernel", c.resample_kernel);
  get_opt(j, "resample_stride", c.resample_stride);
  get_opt(j, "leaky_slope", c.leaky_slope);
  get_opt(j, "classifier_layers", c.classifier_layers);
  get_opt(j, "alpha", c.alpha);
  get_opt(j, "mask_nonlinearity", c.mask_nonlinearity);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"learning_rate", c.learning_rate},
           {"batch_size", c.batch_size},
           {"max_epochs", c.max_epochs},
           {"patience_epochs", c.patience_epochs},
           {"steps_per_epoch", c.steps_per_epoch},
           {"seed", c.seed},
           {"min_improvement", c.min_improvement}};
}

void from_json(const json& j, TrainConfig& c) {
  get_opt(j, "learning_rate", c.learning_rate);
  get_opt(j, "batch_size", c.batch_size);
  get_opt(j, "max_epochs", c.max_epochs);
  get_opt(j, "patience_epochs", c.patience_epochs);
  get_opt(j, "steps_per_epoch", c.steps_per_epoch);
  get_opt(j, "seed", c.seed);
  get_opt(j, "min_improvement", c.min_improvement);
}

void to_json(json& j, const AugmentConfig& c) {
  j = json{{"gain_min", c.gain_min},     {"gain_max", c.gain_max},
           {"chunk_seconds", c.chunk_seconds}, {"accomp_min", c.accomp_min},
           {"accomp_max", c.accomp_max}, {"balance_rms", c.balance_rms},
           {"seed", c.seed}};
}

void from_json(const json& j, AugmentConfig& c) {
  get_opt(j, "gain_min", c.gain_min);
  get_opt(j, "gain_max", c.gain_max);
  get_opt(j, "chunk_seconds", c.chunk_seconds);
  get_opt(j, "accomp_min", c.accomp_min);
  get_opt(j, "accomp_max", c.accomp_max);
  get_opt(j, "balance_rms", c.balance_rms);
  get_opt(j, "seed", c.seed);
}

void to_json(json& j, const InferenceConfig& c) {
  const char* source = c.activation_source == ActivationSource::Predicted ? "predicted"
                       : c.activation_source == ActivationSource::GroundTruth
                           ? "ground_truth"
                           : "all_ones";
  j = json{{"use_activation_weight", c.use_activation_weight},
           {"smooth_kernel_frames", c.smooth_kernel_frames},
           {"activation_threshold", c.activation_threshold},
           {"activation_source", source},
           {"segment_seconds", c.segment_seconds}};
}

void from_json(const json& j, InferenceConfig& c) {
  get_opt(j, "use_activation_weight", c.use_activation_weight);
  get_opt(j, "smooth_kernel_frames", c.smooth_kernel_frames);
  get_opt(j, "activation_threshold", c.activation_threshold);
  get_opt(j, "segment_seconds", c.segment_seconds);
  if (j.contains("activation_source")) {
    const std::string s = j.at("activation_source").get<std::string>();
    if (s == "predicted") c.activation_source = ActivationSource::Predicted;
    else if (s == "ground_truth") c.activation_source = ActivationSource::GroundTruth;
    else if (s == "all_ones") c.activation_source = ActivationSource::AllOnes;
    else throw ConfigError("unknown activation_source '" + s + "'");
  }
}

void to_json(json& j, const EvalConfig& c) {
  j = json{{"frame_seconds", c.frame_seconds},
           {"distortion_filter_taps", c.distortion_filter_taps},
           {"db_clip", c.db_clip}};
}

void from_json(const json& j, EvalConfig& c) {
  get_opt(j, "frame_seconds", c.frame_seconds);
  get_opt(j, "distortion_filter_taps", c.distortion_filter_taps);
  get_opt(j, "db_clip", c.db_clip);
}

}  // namespace iass
