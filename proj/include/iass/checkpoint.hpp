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

#include "iass/model.hpp"
#include "iass/trainer.hpp"

namespace iass {

/// Versioned binary container: magic + JSON directory (config echo, tensor
/// names/shapes/dtypes/offsets, optimizer step, RNG state) followed by raw
/// little-endian float64 tensor data. Training metadata goes into a JSON
/// sidecar `<path>.meta.json`.
struct CheckpointData {
  SeparatorParams params;
  AdamState adam;
  std::array<uint64_t, 4> rng_state{};
  int epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const SeparatorParams& params,
                     const AdamState& adam, const std::array<uint64_t, 4>& rng_state,
                     int epoch, const std::string& metadata_json = "{}");

CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace iass
