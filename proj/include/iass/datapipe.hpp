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
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "iass/dsp.hpp"
#include "iass/labels.hpp"
#include "iass/rng.hpp"

namespace iass {

/// One stem file on disk.
struct TrackEntry {
  std::string song_id;
  std::string instrument;
  std::filesystem::path audio_path;
  double duration_seconds = 0.0;
};

/// Stems of one dataset split. The full dataset serializes to a JSON
/// manifest: songs[] -> {id, split, stems[] -> {instrument, path}}.
struct StemManifest {
  std::vector<TrackEntry> entries;
  std::string split;  // train | validation | test
  std::string target_instrument;
};

/// How stereo stems enter the pipeline. Remix-style training data is
/// downmixed; per-channel processing is the inference-side policy.
enum class ChannelPolicy { Downmix, PerChannel };

struct AugmentConfig {
  double gain_min = 0.25;
  double gain_max = 1.25;
  double chunk_seconds = 6.0;
  int accomp_min = 1;
  int accomp_max = 5;
  double balance_rms = 0.1;
  uint64_t seed = 0;

  void validate() const;
  int64_t chunk_samples(int sample_rate) const;
};

/// One augmented training triple. mixture == target + sum(accompaniments)
/// exactly; no clipping is applied.
struct TrainingExample {
  AudioClip mixture;
  AudioClip target;
  ActivationCurve activation;  // binary, frame-aligned with the chunk
  bool loop_padded = false;    // some drawn stem was shorter than the chunk
};

/// Loudness-balanced full-length evaluation material for one song.
struct EvalSong {
  std::string song_id;
  AudioClip mixture;  // sum of balanced stems
  std::vector<std::string> instruments;
  std::vector<AudioClip> stems;  // balanced, same order as instruments
  int target_index = -1;
};

/// Spectrogram-domain example consumed by the trainer.
struct SpectroExample {
  Eigen::MatrixXd mix_mag;
  Eigen::MatrixXd target_mag;
  std::vector<double> labels;  // binary, one per frame
};

/// Decoded-stem cache. Stems are immutable after load; the cache applies the
/// channel policy once and remembers each stem's RMS for fast balancing.
class StemCache {
 public:
  explicit StemCache(ChannelPolicy policy = ChannelPolicy::Downmix,
                     int sample_rate = 44100)
      : policy_(policy), sample_rate_(sample_rate) {}

  struct CachedStem {
    AudioClip clip;
    double rms = 0.0;
  };

  const CachedStem& get(const std::filesystem::path& path);

 private:
  ChannelPolicy policy_;
  int sample_rate_;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<CachedStem>> cache_;
};

/// Scan `<root>/songs/<song>/<instrument>.wav` plus `<root>/splits.tsv`
/// (song_id<TAB>split per line) and validate that every entry decodes.
/// When `<root>/manifest.json` exists it is used instead of scanning.
StemManifest load_manifest(const std::filesystem::path& root,
                           const std::string& split);

/// Manifest JSON wire format.
void write_manifest_json(const std::filesystem::path& path,
                         const std::vector<StemManifest>& splits);
std::vector<StemManifest> read_manifest_json(const std::filesystem::path& path);

struct StemPools {
  std::vector<TrackEntry> target_pool;
  std::vector<TrackEntry> accomp_pool;
};

/// Partition entries into target-instrument stems and everything else.
StemPools build_pools(const StemManifest& manifest,
                      const std::string& target_instrument);

/// Draw one remix-augmented example: balance each stem to balance_rms, apply
/// an independent uniform gain, chunk from a random offset, sum 1..5
/// accompaniments with the target, and label the target chunk's activity.
TrainingExample sample_training_example(const StemPools& pools, StemCache& cache,
                                        const AugmentConfig& cfg,
                                        const FrameConfig& frame_cfg, Rng& rng);

/// Full-length loudness-balanced evaluation set for the manifest's split.
/// Songs without the target instrument are excluded.
std::vector<EvalSong> make_eval_set(const StemManifest& manifest,
                                    const std::string& target_instrument,
                                    StemCache& cache, double balance_rms);

/// Deterministic fixed chunks used for validation: consecutive chunk-length
/// windows of each balanced song, up to `max_per_song` per song.
std::vector<SpectroExample> make_validation_examples(
    const StemManifest& manifest, const std::string& target_instrument,
    StemCache& cache, const AugmentConfig& cfg, const FrameConfig& frame_cfg,
    int max_per_song = 2);

/// Spectrogram-domain view of a time-domain example.
SpectroExample to_spectro_example(const TrainingExample& ex,
                                  const FrameConfig& frame_cfg);

}  // namespace iass
