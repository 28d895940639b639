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

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "iass/datapipe.hpp"
#include "iass/wav.hpp"

using namespace iass;
namespace fs = std::filesystem;

namespace {

// tiny dataset: <root>/songs/<song>/<stem>.wav + splits.tsv
struct TempDataset {
  fs::path root;

  explicit TempDataset(const std::string& tag) {
    root = fs::temp_directory_path() / ("iass_dp_" + tag);
    fs::remove_all(root);
    fs::create_directories(root / "songs");
  }
  ~TempDataset() { fs::remove_all(root); }

  void add_stem(const std::string& song, const std::string& instrument,
                const std::vector<double>& samples, int sr = 8000) {
    fs::create_directories(root / "songs" / song);
    write_wav(root / "songs" / song / (instrument + ".wav"),
              AudioClip::mono(samples, sr), WavFormat::Float32);
  }
  void set_splits(const std::vector<std::pair<std::string, std::string>>& rows) {
    std::ofstream f(root / "splits.tsv");
    for (const auto& [song, split] : rows) f << song << "\t" << split << "\n";
  }
};

std::vector<double> const_signal(int64_t n, double v) {
  return std::vector<double>(static_cast<size_t>(n), v);
}

std::vector<double> tone(int64_t n, int sr, double f) {
  std::vector<double> x(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i)
    x[static_cast<size_t>(i)] = 0.5 * std::sin(2.0 * M_PI * f * i / sr);
  return x;
}

FrameConfig small_frames() {
  FrameConfig cfg;
  cfg.sample_rate = 44100;
  cfg.window_size = 1024;
  cfg.hop_size = 512;
  return cfg;
}

}  // namespace

TEST_SUITE("datapipe") {

TEST_CASE("manifest scan counts stems and validates") {
  TempDataset ds("scan");
  for (const auto* song : {"a", "b", "c"})
    for (const auto* inst : {"lead", "keys", "drums", "bass"})
      ds.add_stem(song, inst, tone(8000, 8000, 200.0));
  ds.set_splits({{"a", "train"}, {"b", "train"}, {"c", "test"}});

  const StemManifest train = load_manifest(ds.root, "train");
  CHECK(train.entries.size() == 8);  // 2 songs x 4 stems
  const StemManifest test = load_manifest(ds.root, "test");
  CHECK(test.entries.size() == 4);
  CHECK(load_manifest(ds.root, "validation").entries.empty());
  for (const auto& e : train.entries) CHECK(e.duration_seconds == doctest::Approx(1.0));
}

TEST_CASE("manifest errors") {
  SUBCASE("missing split file") {
    TempDataset ds("nosplit");
    ds.add_stem("a", "lead", tone(4000, 8000, 100.0));
    CHECK_THROWS_AS((void)load_manifest(ds.root, "train"), DataError);
  }
  SUBCASE("empty dataset") {
    TempDataset ds("empty");
    ds.set_splits({});
    CHECK_THROWS_AS((void)load_manifest(ds.root, "train"), DataError);
  }
  SUBCASE("undecodable stem is reported with its path") {
    TempDataset ds("garbage");
    ds.add_stem("a", "lead", tone(4000, 8000, 100.0));
    std::ofstream(ds.root / "songs" / "a" / "broken.wav") << "not a wav";
    ds.set_splits({{"a", "train"}});
    CHECK_THROWS_WITH_AS((void)load_manifest(ds.root, "train"),
                         doctest::Contains("broken.wav"), DataError);
  }
  SUBCASE("unknown split name") {
    TempDataset ds("badsplit");
    CHECK_THROWS_AS((void)load_manifest(ds.root, "dev"), ConfigError);
  }
}

TEST_CASE("manifest JSON round trip") {
  TempDataset ds("json");
  for (const auto* song : {"a", "b"})
    for (const auto* inst : {"lead", "keys"})
      ds.add_stem(song, inst, tone(4000, 8000, 150.0));
  ds.set_splits({{"a", "train"}, {"b", "test"}});

  std::vector<StemManifest> splits{load_manifest(ds.root, "train"),
                                   load_manifest(ds.root, "test")};
  const fs::path json_path = ds.root / "manifest.json";
  write_manifest_json(json_path, splits);

  // load_manifest prefers the JSON once present
  const StemManifest train = load_manifest(ds.root, "train");
  CHECK(train.entries.size() == 2);
  CHECK(train.entries[0].song_id == "a");
  const StemManifest test = load_manifest(ds.root, "test");
  CHECK(test.entries.size() == 2);
  CHECK(test.entries[0].song_id == "b");
}

TEST_CASE("pool construction") {
  StemManifest manifest;
  manifest.split = "train";
  for (const auto* song : {"s1", "s2", "s3"}) {
    for (const auto* inst : {"vocals", "bass", "drums", "other"}) {
      TrackEntry e;
      e.song_id = song;
      e.instrument = inst;
      e.audio_path = "/nonexistent.wav";
      e.duration_seconds = 1.0;
      manifest.entries.push_back(e);
    }
  }
  const StemPools pools = build_pools(manifest, "vocals");
  CHECK(pools.target_pool.size() == 3);
  CHECK(pools.accomp_pool.size() == 9);
  CHECK_THROWS_AS((void)build_pools(manifest, "piano"), DataError);
  CHECK_THROWS_AS((void)build_pools(StemManifest{}, "vocals"), DataError);
}

TEST_CASE("song missing the target lands in the accompaniment pool only") {
  StemManifest manifest;
  TrackEntry e;
  e.song_id = "s1";
  e.instrument = "vocals";
  manifest.entries.push_back(e);
  e.song_id = "s2";
  e.instrument = "guitar";  // no vocals in s2
  manifest.entries.push_back(e);
  const StemPools pools = build_pools(manifest, "vocals");
  CHECK(pools.target_pool.size() == 1);
  REQUIRE(pools.accomp_pool.size() == 1);
  CHECK(pools.accomp_pool[0].song_id == "s2");
}

TEST_CASE("sampler determinism and chunk geometry") {
  TempDataset ds("sampler");
  const int sr = 44100;
  ds.add_stem("a", "lead", tone(3 * sr, sr, 300.0), sr);
  ds.add_stem("a", "keys", tone(3 * sr, sr, 900.0), sr);
  ds.add_stem("b", "lead", tone(2 * sr, sr, 310.0), sr);
  ds.add_stem("b", "drums", tone(2 * sr, sr, 3000.0), sr);
  ds.set_splits({{"a", "train"}, {"b", "train"}});

  const StemPools pools = build_pools(load_manifest(ds.root, "train"), "lead");
  StemCache cache;
  AugmentConfig cfg;
  cfg.chunk_seconds = 1.0;
  cfg.accomp_max = 2;
  const FrameConfig frames = small_frames();

  Rng r1(99), r2(99), r3(100);
  const TrainingExample e1 = sample_training_example(pools, cache, cfg, frames, r1);
  const TrainingExample e2 = sample_training_example(pools, cache, cfg, frames, r2);
  const TrainingExample e3 = sample_training_example(pools, cache, cfg, frames, r3);

  CHECK(e1.mixture.samples == e2.mixture.samples);  // bitwise determinism
  CHECK(e1.target.samples == e2.target.samples);
  CHECK(e1.activation.values == e2.activation.values);
  CHECK(e1.mixture.samples != e3.mixture.samples);

  CHECK(e1.mixture.num_samples() == 44100);  // exactly chunk_seconds
  CHECK(e1.target.num_samples() == 44100);
  CHECK(e1.activation.size() == 44100 / frames.hop_size + 1);
  CHECK(e1.activation.kind == ActivationCurve::Kind::Binary);
}

TEST_CASE("sampler additivity with constant stems and unit gains") {
  TempDataset ds("additive");
  const int sr = 44100;
  ds.add_stem("a", "lead", const_signal(2 * sr, 0.3), sr);
  ds.add_stem("a", "keys", const_signal(2 * sr, 0.7), sr);
  ds.set_splits({{"a", "train"}});

  const StemPools pools = build_pools(load_manifest(ds.root, "train"), "lead");
  StemCache cache;
  AugmentConfig cfg;
  cfg.gain_min = cfg.gain_max = 1.0;
  cfg.accomp_min = cfg.accomp_max = 1;
  cfg.chunk_seconds = 1.0;
  cfg.balance_rms = 0.125;

  Rng rng(5);
  const TrainingExample ex =
      sample_training_example(pools, cache, cfg, small_frames(), rng);
  // both stems balance to a 0.125 constant; the mixture is their exact sum
  const double accomp = ex.mixture.samples[0] - ex.target.samples[0];
  CHECK(ex.target.samples[0] == doctest::Approx(0.125).epsilon(1e-12));
  CHECK(accomp == doctest::Approx(0.125).epsilon(1e-12));
  for (int64_t i = 0; i < ex.mixture.num_samples(); ++i) {
    CHECK(ex.mixture.samples[static_cast<size_t>(i)] ==
          ex.target.samples[static_cast<size_t>(i)] + accomp);  // exact
  }
}

TEST_CASE("silent accompaniments leave the mixture equal to the target") {
  TempDataset ds("silentacc");
  const int sr = 44100;
  ds.add_stem("a", "lead", tone(2 * sr, sr, 250.0), sr);
  ds.add_stem("a", "keys", const_signal(2 * sr, 0.0), sr);
  ds.set_splits({{"a", "train"}});

  const StemPools pools = build_pools(load_manifest(ds.root, "train"), "lead");
  StemCache cache;
  AugmentConfig cfg;
  cfg.chunk_seconds = 1.0;
  Rng rng(6);
  const TrainingExample ex =
      sample_training_example(pools, cache, cfg, small_frames(), rng);
  CHECK(ex.mixture.samples == ex.target.samples);  // zero accompaniment, exact
}

TEST_CASE("silent target stem yields an all-zero activation") {
  TempDataset ds("silenttgt");
  const int sr = 44100;
  ds.add_stem("a", "lead", const_signal(2 * sr, 0.0), sr);
  ds.add_stem("a", "keys", tone(2 * sr, sr, 500.0), sr);
  ds.set_splits({{"a", "train"}});

  const StemPools pools = build_pools(load_manifest(ds.root, "train"), "lead");
  StemCache cache;
  AugmentConfig cfg;
  cfg.chunk_seconds = 1.0;
  Rng rng(7);
  const TrainingExample ex =
      sample_training_example(pools, cache, cfg, small_frames(), rng);
  for (double v : ex.activation.values) CHECK(v == 0.0);
}

TEST_CASE("stems shorter than the chunk are loop-padded and flagged") {
  TempDataset ds("short");
  const int sr = 44100;
  ds.add_stem("a", "lead", tone(sr / 2, sr, 220.0), sr);  // 0.5 s
  ds.add_stem("a", "keys", tone(2 * sr, sr, 700.0), sr);
  ds.set_splits({{"a", "train"}});

  const StemPools pools = build_pools(load_manifest(ds.root, "train"), "lead");
  StemCache cache;
  AugmentConfig cfg;
  cfg.chunk_seconds = 1.0;
  Rng rng(8);
  const TrainingExample ex =
      sample_training_example(pools, cache, cfg, small_frames(), rng);
  CHECK(ex.loop_padded);
  CHECK(ex.target.num_samples() == 44100);
}

TEST_CASE("eval set balances stems and reconstructs the mixture") {
  TempDataset ds("eval");
  const int sr = 44100;
  ds.add_stem("t1", "lead", tone(sr, sr, 260.0), sr);
  ds.add_stem("t1", "keys", tone(sr, sr, 800.0), sr);
  ds.add_stem("t2", "keys", tone(sr, sr, 850.0), sr);  // no lead
  ds.set_splits({{"t1", "test"}, {"t2", "test"}});

  StemCache cache;
  const auto eval_set =
      make_eval_set(load_manifest(ds.root, "test"), "lead", cache, 0.1);
  REQUIRE(eval_set.size() == 1);  // t2 lacks the target instrument
  const EvalSong& song = eval_set[0];
  CHECK(song.song_id == "t1");
  REQUIRE(song.stems.size() == 2);
  CHECK(song.target_index >= 0);
  CHECK(song.instruments[static_cast<size_t>(song.target_index)] == "lead");

  for (const auto& stem : song.stems) CHECK(rms(stem) == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(rms(song.mixture) <= 0.2 + 1e-12);

  // exact reconstruction from the balanced stems
  for (int64_t i = 0; i < song.mixture.num_samples(); ++i) {
    const size_t idx = static_cast<size_t>(i);
    CHECK(song.mixture.samples[idx] ==
          song.stems[0].samples[idx] + song.stems[1].samples[idx]);
  }
}

TEST_CASE("validation examples are deterministic fixed chunks") {
  TempDataset ds("val");
  const int sr = 44100;
  ds.add_stem("v1", "lead", tone(3 * sr, sr, 270.0), sr);
  ds.add_stem("v1", "keys", tone(3 * sr, sr, 820.0), sr);
  ds.set_splits({{"v1", "validation"}});

  StemCache cache;
  AugmentConfig cfg;
  cfg.chunk_seconds = 1.0;
  const auto a = make_validation_examples(load_manifest(ds.root, "validation"), "lead",
                                          cache, cfg, small_frames(), 2);
  const auto b = make_validation_examples(load_manifest(ds.root, "validation"), "lead",
                                          cache, cfg, small_frames(), 2);
  REQUIRE(a.size() == 2);
  CHECK(a[0].mix_mag == b[0].mix_mag);
  CHECK(a[1].labels == b[1].labels);
  CHECK(static_cast<int64_t>(a[0].labels.size()) == a[0].mix_mag.cols());
}

TEST_CASE("augment config validation") {
  AugmentConfig cfg;
  cfg.gain_min = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AugmentConfig{};
  cfg.accomp_min = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = AugmentConfig{};
  cfg.gain_min = 2.0;  // > gain_max
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK(AugmentConfig{}.chunk_samples(44100) == 264600);  // 6 s default
}

}  // TEST_SUITE
