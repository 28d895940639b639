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

#include "iass/fixtures.hpp"

#include <cmath>
#include <fstream>

#include "iass/experiment.hpp"
#include "iass/wav.hpp"

namespace iass {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// 10 ms raised-cosine gate ramps keep section boundaries click-free.
double gate(double t, double lo, double hi, double ramp) {
  if (t < lo || t >= hi) return 0.0;
  if (t < lo + ramp) return 0.5 - 0.5 * std::cos(M_PI * (t - lo) / ramp);
  if (t > hi - ramp) return 0.5 - 0.5 * std::cos(M_PI * (hi - t) / ramp);
  return 1.0;
}

// Tonal voice in the 200-600 Hz band with some silent sections.
std::vector<double> synth_lead(int64_t n, int sr, Rng& rng) {
  const double dur = static_cast<double>(n) / sr;
  const double f1 = rng.uniform(200.0, 400.0);
  const double phase = rng.uniform(0.0, kTwoPi);

  constexpr int kSections = 8;
  std::array<bool, kSections> active{};
  int on = 0;
  for (auto& a : active) {
    a = rng.uniform() < 0.65;
    on += a ? 1 : 0;
  }
  if (on == 0) active[static_cast<size_t>(rng.uniform_int(0, kSections - 1))] = true;
  if (on == kSections) active[static_cast<size_t>(rng.uniform_int(0, kSections - 1))] = false;

  std::vector<double> x(static_cast<size_t>(n), 0.0);
  const double section = dur / kSections;
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    double g = 0.0;
    for (int s = 0; s < kSections; ++s)
      if (active[static_cast<size_t>(s)])
        g = std::max(g, gate(t, s * section, (s + 1) * section, 0.01));
    if (g == 0.0) continue;
    x[static_cast<size_t>(i)] =
        0.25 * g * (std::sin(kTwoPi * f1 * t + phase) +
                    0.5 * std::sin(kTwoPi * 1.5 * f1 * t));
  }
  return x;
}

// Sustained chord in the 700-1600 Hz band with a slow tremolo.
std::vector<double> synth_keys(int64_t n, int sr, Rng& rng) {
  const double root = rng.uniform(700.0, 1000.0);
  const std::array<double, 3> ratios{1.0, 1.25, 1.5};
  std::array<double, 3> phases{};
  for (auto& p : phases) p = rng.uniform(0.0, kTwoPi);

  std::vector<double> x(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sr;
    const double trem = 1.0 + 0.3 * std::sin(kTwoPi * 0.5 * t);
    double v = 0.0;
    for (size_t k = 0; k < ratios.size(); ++k)
      v += std::sin(kTwoPi * root * ratios[k] * t + phases[k]);
    x[static_cast<size_t>(i)] = 0.12 * trem * v;
  }
  return x;
}

// High-band noise bursts roughly twice a second.
std::vector<double> synth_drums(int64_t n, int sr, Rng& rng) {
  std::vector<double> raw(static_cast<size_t>(n), 0.0);
  double t = rng.uniform(0.0, 0.2);
  const double dur = static_cast<double>(n) / sr;
  while (t < dur) {
    const int64_t start = static_cast<int64_t>(t * sr);
    const int64_t len = std::min<int64_t>(n - start, sr / 16);
    for (int64_t i = 0; i < len; ++i) {
      const double env = std::exp(-static_cast<double>(i) / (0.02 * sr));
      raw[static_cast<size_t>(start + i)] += env * rng.uniform(-1.0, 1.0);
    }
    t += rng.uniform(0.35, 0.65);
  }
  // second-order difference pushes the energy into the high band
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  for (int64_t i = 2; i < n; ++i)
    x[static_cast<size_t>(i)] =
        0.2 * (raw[static_cast<size_t>(i)] - 2.0 * raw[static_cast<size_t>(i - 1)] +
               raw[static_cast<size_t>(i - 2)]);
  return x;
}

}  // namespace

void make_fixtures(const std::filesystem::path& out_dir, const FixtureOptions& opts) {
  if (opts.num_songs < 3)
    throw ConfigError("make_fixtures: need at least 3 songs for the three splits");
  if (opts.song_seconds <= 1.0)
    throw ConfigError("make_fixtures: songs must be longer than 1 s");

  std::filesystem::create_directories(out_dir / "songs");
  Rng rng(opts.seed);
  const int64_t n =
      static_cast<int64_t>(std::llround(opts.song_seconds * opts.sample_rate));

  std::ofstream splits(out_dir / "splits.tsv");
  if (!splits) throw DataError("cannot write splits.tsv in " + out_dir.string());

  const int num_test = std::max(1, opts.num_songs / 4);
  const int num_val = std::max(1, opts.num_songs / 4);
  for (int s = 0; s < opts.num_songs; ++s) {
    char name[32];
    std::snprintf(name, sizeof(name), "song_%02d", s);
    const std::filesystem::path song_dir = out_dir / "songs" / name;
    std::filesystem::create_directories(song_dir);

    write_wav(song_dir / "lead.wav",
              AudioClip::mono(synth_lead(n, opts.sample_rate, rng), opts.sample_rate));
    write_wav(song_dir / "keys.wav",
              AudioClip::mono(synth_keys(n, opts.sample_rate, rng), opts.sample_rate));
    write_wav(song_dir / "drums.wav",
              AudioClip::mono(synth_drums(n, opts.sample_rate, rng), opts.sample_rate));

    const char* split = s < opts.num_songs - num_test - num_val ? "train"
                        : s < opts.num_songs - num_test         ? "validation"
                                                                : "test";
    splits << name << "\t" << split << "\n";
  }
  splits.close();

  // experiment config sized for the toy data
  ExperimentConfig cfg;
  cfg.dataset_root = ".";
  cfg.target_instrument = "lead";
  cfg.frame.sample_rate = opts.sample_rate;
  cfg.frame.window_size = 1024;
  cfg.frame.hop_size = 512;
  cfg.model.num_blocks = 3;
  cfg.model.channel_widths = {8, 12, 16};
  cfg.model.classifier_layers = 4;
  cfg.model.alpha = 0.1;
  cfg.train.batch_size = 4;
  cfg.train.steps_per_epoch = 8;
  cfg.train.max_epochs = 40;
  cfg.train.patience_epochs = 100;
  cfg.train.seed = opts.seed;
  cfg.augment.chunk_seconds = 3.0;
  cfg.augment.accomp_max = 2;  // only two accompaniment instruments exist
  cfg.augment.seed = opts.seed;
  cfg.inference.smooth_kernel_frames = 9;
  cfg.eval.distortion_filter_taps = 128;
  cfg.output_dir = "outputs";
  cfg.seed = opts.seed;
  save_experiment_config(out_dir / "config.json", cfg);
}

}  // namespace iass
