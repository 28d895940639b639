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

#include "iass/dsp.hpp"

namespace iass {

enum class WavFormat { Int16, Int24, Float32 };

/// Decode a RIFF/WAVE file (PCM 16/24-bit or IEEE float32) at its native
/// sample rate.
AudioClip read_wav(const std::filesystem::path& path);

/// Encode a clip. Integer formats clamp to full scale.
void write_wav(const std::filesystem::path& path, const AudioClip& clip,
               WavFormat format = WavFormat::Float32);

/// Ingest entry point: decode, then resample to `target_rate` when needed.
AudioClip load_audio(const std::filesystem::path& path, int target_rate = 44100);

/// Sample count / rate from the header alone, without decoding payload.
struct WavInfo {
  int channels = 0;
  int sample_rate = 0;
  int64_t num_samples = 0;
};
WavInfo probe_wav(const std::filesystem::path& path);

}  // namespace iass
