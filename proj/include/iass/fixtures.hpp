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

#include "iass/rng.hpp"

namespace iass {

/// Synthetic toy dataset: per song a band-limited "lead" voice with silent
/// sections, a mid-band "keys" pad and high-band "drums" noise bursts, so
/// masking, activity detection and the evaluation stack are all exercised
/// without any external corpus. Also writes splits.tsv and an experiment
/// config tuned to the fixture scale.
struct FixtureOptions {
  int num_songs = 8;  // split 50/25/25 train/validation/test (min 1 each)
  double song_seconds = 8.0;
  int sample_rate = 44100;
  uint64_t seed = 7;
};

void make_fixtures(const std::filesystem::path& out_dir, const FixtureOptions& opts);

}  // namespace iass
