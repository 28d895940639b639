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

#include "iass/bsseval.hpp"
#include "iass/datapipe.hpp"
#include "iass/model.hpp"
#include "iass/separator.hpp"
#include "iass/trainer.hpp"

namespace iass {

/// One experiment file drives every command; CLI flags override file values.
struct ExperimentConfig {
  std::filesystem::path dataset_root;
  std::string target_instrument;
  FrameConfig frame;
  ModelConfig model;
  TrainConfig train;
  AugmentConfig augment;
  InferenceConfig inference;
  EvalConfig eval;
  std::filesystem::path output_dir = "outputs";
  uint64_t seed = 0;

  void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
void save_experiment_config(const std::filesystem::path& path,
                            const ExperimentConfig& cfg);

}  // namespace iass
