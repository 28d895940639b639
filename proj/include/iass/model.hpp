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

#include <map>
#include <string>
#include <vector>

#include "iass/datapipe.hpp"
#include "iass/dsp.hpp"
#include "iass/rng.hpp"
#include "iass/tensor.hpp"

namespace iass {

/// Architecture hyperparameters of the residual U-net separator with the
/// per-frame activity classifier head.
struct ModelConfig {
  int num_blocks = 3;
  int convs_per_block = 3;
  std::vector<int> channel_widths = {32, 64, 128};
  std::array<int, 2> inner_kernel = {3, 3};
  std::array<int, 2> resample_kernel = {3, 1};
  std::array<int, 2> resample_stride = {2, 2};  // (freq, time)
  double leaky_slope = 0.2;
  int classifier_layers = 4;
  double alpha = 0.1;  // activity-loss weight
  std::string mask_nonlinearity = "sigmoid";

  void validate() const;
  /// Inputs are end-padded to multiples of this on both axes.
  int64_t pad_multiple() const { return int64_t{1} << num_blocks; }
};

/// Learnable tensors plus batch-norm running buffers, addressed by name.
/// `trainable` preserves construction order so optimizer walks and random
/// initialization are deterministic.
struct SeparatorParams {
  ModelConfig config;
  std::map<std::string, Tensor> tensors;
  std::vector<std::string> trainable;
  std::map<std::string, std::string> init_record;  // name -> initializer tag

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  /// Order-independent content checksum; used by no-mutation tests.
  uint64_t checksum() const;
  int64_t num_parameters() const;
};

struct ForwardOutput {
  Eigen::MatrixXd mask;                   // (bins, frames), strictly in (0,1)
  std::vector<double> activation_logits;  // one per frame
};

enum class RunMode { Train, Eval };

/// Deterministic fan-in-scaled uniform initialization; batch-norm scale 1,
/// shift 0, running stats (0, 1).
SeparatorParams init_model(const ModelConfig& cfg, Rng& rng);

/// Single-spectrogram forward pass. Eval mode uses running batch-norm
/// statistics and never mutates params.
ForwardOutput forward(SeparatorParams& params, const MagSpectrogram& mix_mag,
                      RunMode mode);

/// Elementwise mask application.
MagSpectrogram predicted_spectrogram(const Eigen::MatrixXd& mask,
                                     const MagSpectrogram& mix_mag);

struct LossBreakdown {
  double total = 0.0;
  double mse = 0.0;
  double bce = 0.0;
};

/// Eq-style joint objective: mean squared spectrogram error plus
/// alpha-weighted binary cross-entropy of the activity logits. With alpha==0
/// the total is bitwise the MSE term.
LossBreakdown loss(const Eigen::MatrixXd& pred_mag,
                   const Eigen::MatrixXd& target_mag,
                   const std::vector<double>& activation_logits,
                   const std::vector<double>& labels, double alpha);

struct GradientResult {
  std::map<std::string, Tensor> grads;  // one per trainable tensor
  LossBreakdown loss;
};

/// Gradient of the mean total loss over the batch (train mode; batch-norm
/// running statistics are updated unless update_running is false).
GradientResult gradients(SeparatorParams& params,
                         const std::vector<SpectroExample>& batch, double alpha,
                         bool update_running = true);

}  // namespace iass
