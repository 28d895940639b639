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

struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 8;
  int max_epochs = 1000;
  int patience_epochs = 100;
  int steps_per_epoch = 500;
  uint64_t seed = 0;
  // "no change" tolerance for early stopping on the validation loss
  double min_improvement = 1e-6;

  void validate() const;
};

/// Adam first/second moment buffers, step count included for bias correction.
struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  int64_t step = 0;
};

/// One bias-corrected Adam update, in place on the trainable tensors.
void adam_step(SeparatorParams& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

/// Mean loss over a fixed validation set in eval mode; params untouched.
LossBreakdown validate(SeparatorParams& params,
                       const std::vector<SpectroExample>& val_set, double alpha);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_total = 0.0;
  double val_mse = 0.0;
  double val_bce = 0.0;
};

struct TrainResult {
  std::filesystem::path checkpoint_path;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val = 0.0;
};

/// Full optimization loop: remix-sampled batches, per-epoch validation,
/// early stopping once the best validation loss has not improved by
/// min_improvement for patience_epochs consecutive epochs. The best-epoch
/// snapshot is written to `<out_dir>/best.ckpt` (history appended to
/// `<out_dir>/history.csv`). A non-finite training loss aborts after saving
/// the best snapshot so far.
TrainResult train(const TrainConfig& cfg, SeparatorParams params,
                  const StemPools& pools, StemCache& cache,
                  const AugmentConfig& aug_cfg, const FrameConfig& frame_cfg,
                  const std::vector<SpectroExample>& val_set,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

}  // namespace iass
