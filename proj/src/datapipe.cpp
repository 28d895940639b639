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

#include "iass/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "iass/wav.hpp"

namespace iass {

namespace fs = std::filesystem;
using nlohmann::json;

void AugmentConfig::validate() const {
  if (!(gain_min > 0.0) || gain_min > gain_max)
    throw ConfigError("AugmentConfig: need 0 < gain_min <= gain_max");
  if (accomp_min < 1 || accomp_min > accomp_max)
    throw ConfigError("AugmentConfig: need 1 <= accomp_min <= accomp_max");
  if (chunk_seconds <= 0.0) throw ConfigError("AugmentConfig: chunk_seconds must be > 0");
  if (balance_rms <= 0.0) throw ConfigError("AugmentConfig: balance_rms must be > 0");
}

int64_t AugmentConfig::chunk_samples(int sample_rate) const {
  return static_cast<int64_t>(std::llround(chunk_seconds * sample_rate));
}

const StemCache::CachedStem& StemCache::get(const fs::path& path) {
  const std::string key = path.string();
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
  }
  auto stem = std::make_unique<CachedStem>();
  stem->clip = load_audio(path, sample_rate_);
  if (policy_ == ChannelPolicy::Downmix && !stem->clip.is_mono())
    stem->clip = downmix_mono(stem->clip);
  stem->rms = stem->clip.samples.empty() ? 0.0 : rms(stem->clip);

  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = cache_.emplace(key, std::move(stem));
  return *it->second;
}

namespace {

std::map<std::string, std::string> read_split_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("missing split file: " + path.string());
  std::map<std::string, std::string> splits;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("malformed split line '" + line + "' in " + path.string());
    splits[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return splits;
}

StemManifest manifest_from_scan(const fs::path& root, const std::string& split) {
  const fs::path songs_dir = root / "songs";
  if (!fs::is_directory(songs_dir))
    throw DataError("dataset has no songs/ directory: " + songs_dir.string());
  const auto splits = read_split_file(root / "splits.tsv");

  StemManifest manifest;
  manifest.split = split;
  std::vector<std::string> offenders;

  std::vector<fs::path> song_dirs;
  for (const auto& e : fs::directory_iterator(songs_dir))
    if (e.is_directory()) song_dirs.push_back(e.path());
  std::sort(song_dirs.begin(), song_dirs.end());
  if (song_dirs.empty()) throw DataError("empty dataset: " + songs_dir.string());

  for (const auto& song_dir : song_dirs) {
    const std::string song_id = song_dir.filename().string();
    const auto split_it = splits.find(song_id);
    if (split_it == splits.end()) {
      offenders.push_back(song_id + ": not listed in splits.tsv");
      continue;
    }
    if (split_it->second != split) continue;

    std::vector<fs::path> stems;
    for (const auto& e : fs::directory_iterator(song_dir))
      if (e.is_regular_file() && e.path().extension() == ".wav")
        stems.push_back(e.path());
    std::sort(stems.begin(), stems.end());

    for (const auto& stem : stems) {
      TrackEntry entry;
      entry.song_id = song_id;
      entry.instrument = stem.stem().string();
      entry.audio_path = stem;
      try {
        const WavInfo info = probe_wav(stem);
        if (info.num_samples <= 0) throw DataError("zero-length stem");
        entry.duration_seconds =
            static_cast<double>(info.num_samples) / info.sample_rate;
      } catch (const std::exception& e) {
        offenders.push_back(stem.string() + ": " + e.what());
        continue;
      }
      manifest.entries.push_back(std::move(entry));
    }
  }

  if (!offenders.empty()) {
    std::string msg = "manifest validation failed:";
    for (const auto& o : offenders) msg += "\n  " + o;
    throw DataError(msg);
  }
  return manifest;
}

}  // namespace

StemManifest load_manifest(const fs::path& root, const std::string& split) {
  if (split != "train" && split != "validation" && split != "test")
    throw ConfigError("unknown split '" + split + "'");
  const fs::path manifest_json = root / "manifest.json";
  if (fs::is_regular_file(manifest_json)) {
    for (auto& m : read_manifest_json(manifest_json))
      if (m.split == split) return m;
    return StemManifest{.entries = {}, .split = split, .target_instrument = ""};
  }
  return manifest_from_scan(root, split);
}

void write_manifest_json(const fs::path& path,
                         const std::vector<StemManifest>& splits) {
  json songs = json::array();
  std::set<std::string> seen;
  for (const auto& manifest : splits) {
    std::map<std::string, json> by_song;
    for (const auto& e : manifest.entries) {
      auto& song = by_song[e.song_id];
      if (song.is_null()) {
        song["id"] = e.song_id;
        song["split"] = manifest.split;
        song["stems"] = json::array();
      }
      song["stems"].push_back(
          {{"instrument", e.instrument}, {"path", e.audio_path.string()}});
    }
    for (auto& [id, song] : by_song) {
      if (!seen.insert(id).second)
        throw DataError("song '" + id + "' appears in multiple splits");
      songs.push_back(std::move(song));
    }
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write manifest: " + path.string());
  f << json{{"songs", songs}}.dump(2) << "\n";
}

std::vector<StemManifest> read_manifest_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read manifest: " + path.string());
  json doc;
  try {
    f >> doc;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest JSON: " + std::string(e.what()));
  }

  std::map<std::string, StemManifest> by_split;
  std::vector<std::string> offenders;
  for (const auto& song : doc.at("songs")) {
    const std::string id = song.at("id").get<std::string>();
    const std::string split = song.at("split").get<std::string>();
    for (const auto& stem : song.at("stems")) {
      TrackEntry entry;
      entry.song_id = id;
      entry.instrument = stem.at("instrument").get<std::string>();
      entry.audio_path = stem.at("path").get<std::string>();
      if (entry.audio_path.is_relative())
        entry.audio_path = path.parent_path() / entry.audio_path;
      try {
        const WavInfo info = probe_wav(entry.audio_path);
        if (info.num_samples <= 0) throw DataError("zero-length stem");
        entry.duration_seconds =
            static_cast<double>(info.num_samples) / info.sample_rate;
      } catch (const std::exception& e) {
        offenders.push_back(entry.audio_path.string() + ": " + e.what());
        continue;
      }
      auto& m = by_split[split];
      m.split = split;
      m.entries.push_back(std::move(entry));
    }
  }
  if (!offenders.empty()) {
    std::string msg = "manifest validation failed:";
    for (const auto& o : offenders) msg += "\n  " + o;
    throw DataError(msg);
  }
  std::vector<StemManifest> out;
  for (auto& [split, m] : by_split) out.push_back(std::move(m));
  return out;
}

StemPools build_pools(const StemManifest& manifest,
                      const std::string& target_instrument) {
  if (manifest.entries.empty()) throw DataError("build_pools: empty manifest");
  StemPools pools;
  for (const auto& e : manifest.entries) {
    if (e.instrument == target_instrument)
      pools.target_pool.push_back(e);
    else
      pools.accomp_pool.push_back(e);
  }
  if (pools.target_pool.empty())
    throw DataError("build_pools: no stems for target instrument '" +
                    target_instrument + "'");
  return pools;
}

namespace {

// Balanced, gained, chunked copy of one stem. `scale` folds the loudness
// balancing and the random gain into a single pass.
std::vector<double> chunk_stem(const StemCache::CachedStem& stem, double scale,
                               int64_t chunk_len, int64_t start,
                               bool* loop_padded) {
  const auto src = stem.clip.channel(0);
  const int64_t n = static_cast<int64_t>(src.size());
  std::vector<double> out(static_cast<size_t>(chunk_len));
  if (n == 0) return out;
  if (n < chunk_len && loop_padded) *loop_padded = true;
  for (int64_t i = 0; i < chunk_len; ++i)
    out[static_cast<size_t>(i)] = scale * src[static_cast<size_t>((start + i) % n)];
  return out;
}

int64_t draw_start(Rng& rng, int64_t stem_len, int64_t chunk_len) {
  // Stems shorter than the chunk are loop-padded; the offset then ranges
  // over the stem itself.
  const int64_t max_start = stem_len >= chunk_len ? stem_len - chunk_len : stem_len - 1;
  return max_start <= 0 ? 0 : rng.uniform_int(0, max_start);
}

double balance_scale(const StemCache::CachedStem& stem, double balance_rms) {
  return stem.rms > 0.0 ? balance_rms / stem.rms : 1.0;
}

}  // namespace

TrainingExample sample_training_example(const StemPools& pools, StemCache& cache,
                                        const AugmentConfig& cfg,
                                        const FrameConfig& frame_cfg, Rng& rng) {
  cfg.validate();
  if (pools.target_pool.empty() || pools.accomp_pool.empty())
    throw DataError("sample_training_example: empty pool");

  const int sr = frame_cfg.sample_rate;
  const int64_t chunk_len = cfg.chunk_samples(sr);
  TrainingExample ex;

  // Target stem.
  const auto& target_entry =
      pools.target_pool[static_cast<size_t>(rng.uniform_int(
          0, static_cast<int64_t>(pools.target_pool.size()) - 1))];
  const auto& target_stem = cache.get(target_entry.audio_path);
  const double target_gain = rng.uniform(cfg.gain_min, cfg.gain_max);
  const int64_t target_start =
      draw_start(rng, target_stem.clip.num_samples(), chunk_len);
  std::vector<double> target =
      chunk_stem(target_stem, balance_scale(target_stem, cfg.balance_rms) * target_gain,
                 chunk_len, target_start, &ex.loop_padded);

  std::vector<double> mixture = target;

  // 1..5 accompaniment stems, drawn uniformly with replacement.
  const int64_t k = rng.uniform_int(cfg.accomp_min, cfg.accomp_max);
  for (int64_t a = 0; a < k; ++a) {
    const auto& entry = pools.accomp_pool[static_cast<size_t>(rng.uniform_int(
        0, static_cast<int64_t>(pools.accomp_pool.size()) - 1))];
    const auto& stem = cache.get(entry.audio_path);
    const double gain = rng.uniform(cfg.gain_min, cfg.gain_max);
    const int64_t start = draw_start(rng, stem.clip.num_samples(), chunk_len);
    const std::vector<double> chunk = chunk_stem(
        stem, balance_scale(stem, cfg.balance_rms) * gain, chunk_len, start,
        &ex.loop_padded);
    for (int64_t i = 0; i < chunk_len; ++i)
      mixture[static_cast<size_t>(i)] += chunk[static_cast<size_t>(i)];
  }

  ex.target = AudioClip::mono(std::move(target), sr);
  ex.mixture = AudioClip::mono(std::move(mixture), sr);
  ex.activation = binarize(energy_activation(ex.target, frame_cfg), 0.5);
  ex.activation.instrument = target_entry.instrument;
  return ex;
}

namespace {

void mix_add(AudioClip& dst, const AudioClip& src) {
  const int64_t n = std::max(dst.num_samples(), src.num_samples());
  const int channels = std::max(dst.channels, src.channels);
  if (dst.num_samples() != n || dst.channels != channels) {
    AudioClip grown;
    grown.channels = channels;
    grown.sample_rate = dst.sample_rate;
    grown.samples.assign(static_cast<size_t>(n) * channels, 0.0);
    for (int c = 0; c < dst.channels && !dst.samples.empty(); ++c) {
      const auto s = dst.channel(c);
      std::copy(s.begin(), s.end(),
                grown.samples.begin() + static_cast<int64_t>(c) * n);
    }
    dst = std::move(grown);
  }
  for (int c = 0; c < channels; ++c) {
    auto d = dst.channel(c);
    const auto s = src.channel(std::min(c, src.channels - 1));  // mono broadcast
    for (size_t i = 0; i < s.size(); ++i) d[i] += s[i];
  }
}

}  // namespace

std::vector<EvalSong> make_eval_set(const StemManifest& manifest,
                                    const std::string& target_instrument,
                                    StemCache& cache, double balance_rms) {
  std::map<std::string, std::vector<const TrackEntry*>> by_song;
  for (const auto& e : manifest.entries) by_song[e.song_id].push_back(&e);

  std::vector<EvalSong> out;
  for (const auto& [song_id, entries] : by_song) {
    const bool has_target =
        std::any_of(entries.begin(), entries.end(), [&](const TrackEntry* e) {
          return e->instrument == target_instrument;
        });
    if (!has_target) continue;

    EvalSong song;
    song.song_id = song_id;
    for (const TrackEntry* e : entries) {
      const auto& stem = cache.get(e->audio_path);
      AudioClip balanced = normalize_loudness(stem.clip, balance_rms);
      if (e->instrument == target_instrument)
        song.target_index = static_cast<int>(song.stems.size());
      song.instruments.push_back(e->instrument);
      song.stems.push_back(std::move(balanced));
    }
    song.mixture = AudioClip{};
    song.mixture.sample_rate = song.stems.front().sample_rate;
    song.mixture.channels = 1;
    for (const auto& stem : song.stems) mix_add(song.mixture, stem);
    out.push_back(std::move(song));
  }
  return out;
}

SpectroExample to_spectro_example(const TrainingExample& ex,
                                  const FrameConfig& frame_cfg) {
  SpectroExample se;
  auto [mix_mag, mix_phase] = stft(ex.mixture, frame_cfg);
  auto [tgt_mag, tgt_phase] = stft(ex.target, frame_cfg);
  se.mix_mag = std::move(mix_mag.values);
  se.target_mag = std::move(tgt_mag.values);
  se.labels = ex.activation.values;
  if (static_cast<int64_t>(se.labels.size()) != se.mix_mag.cols())
    throw NumericalError("to_spectro_example: label/frame misalignment");
  return se;
}

std::vector<SpectroExample> make_validation_examples(
    const StemManifest& manifest, const std::string& target_instrument,
    StemCache& cache, const AugmentConfig& cfg, const FrameConfig& frame_cfg,
    int max_per_song) {
  const auto songs = make_eval_set(manifest, target_instrument, cache, cfg.balance_rms);
  const int64_t chunk_len = cfg.chunk_samples(frame_cfg.sample_rate);

  std::vector<SpectroExample> out;
  for (const auto& song : songs) {
    AudioClip mix = song.mixture.is_mono() ? song.mixture : downmix_mono(song.mixture);
    AudioClip tgt = song.stems[static_cast<size_t>(song.target_index)];
    if (!tgt.is_mono()) tgt = downmix_mono(tgt);

    const int64_t n = std::min(mix.num_samples(), tgt.num_samples());
    for (int c = 0; c < max_per_song; ++c) {
      const int64_t start = static_cast<int64_t>(c) * chunk_len;
      if (start + chunk_len > n) break;
      TrainingExample ex;
      ex.mixture = AudioClip::mono(
          {mix.samples.begin() + start, mix.samples.begin() + start + chunk_len},
          frame_cfg.sample_rate);
      ex.target = AudioClip::mono(
          {tgt.samples.begin() + start, tgt.samples.begin() + start + chunk_len},
          frame_cfg.sample_rate);
      ex.activation = binarize(energy_activation(ex.target, frame_cfg), 0.5);
      out.push_back(to_spectro_example(ex, frame_cfg));
    }
  }
  return out;
}

}  // namespace iass
