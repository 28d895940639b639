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

#include "iass/separator.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "iass/wav.hpp"

namespace iass {

void InferenceConfig::validate() const {
  if (!(activation_threshold > 0.0 && activation_threshold < 1.0))
    throw ConfigError("InferenceConfig: threshold must be inside (0,1)");
  if (smooth_kernel_frames < 1 || smooth_kernel_frames % 2 == 0)
    throw ConfigError("InferenceConfig: smoothing kernel must be odd");
  if (segment_seconds <= 0.0)
    throw ConfigError("InferenceConfig: segment_seconds must be > 0");
}

MagSpectrogram apply_activation_weight(const MagSpectrogram& mag,
                                       const ActivationCurve& act) {
  if (act.size() != mag.frames())
    throw ConfigError("apply_activation_weight: curve length " +
                      std::to_string(act.size()) + " != frames " +
                      std::to_string(mag.frames()));
  MagSpectrogram out = mag;
  for (int64_t t = 0; t < out.frames(); ++t)
    out.values.col(t) *= act.values[static_cast<size_t>(t)];
  return out;
}

namespace {

// Runs the network over the spectrogram in consecutive frame segments so
// long inputs stay within memory bounds. Frame blocks come from one
// single-pass transform, so concatenation is exact by construction.
ForwardOutput forward_segmented(SeparatorParams& params, const MagSpectrogram& mag,
                                double segment_seconds) {
  const int64_t frames = mag.frames();
  const double frame_rate = mag.config.frame_rate();
  const int64_t seg_frames = std::max<int64_t>(
      1, static_cast<int64_t>(std::llround(segment_seconds * frame_rate)));

  ForwardOutput full;
  full.mask.resize(mag.bins(), frames);
  full.activation_logits.resize(static_cast<size_t>(frames));
  for (int64_t start = 0; start < frames; start += seg_frames) {
    const int64_t len = std::min(seg_frames, frames - start);
    MagSpectrogram seg;
    seg.config = mag.config;
    seg.values = mag.values.middleCols(start, len);
    const ForwardOutput out = forward(params, seg, RunMode::Eval);
    full.mask.middleCols(start, len) = out.mask;
    std::copy(out.activation_logits.begin(), out.activation_logits.end(),
              full.activation_logits.begin() + start);
  }
  return full;
}

struct ChannelResult {
  MagSpectrogram masked;
  PhaseSpectrogram phase;
  ActivationCurve raw;     // sigmoid confidences
  ActivationCurve binary;  // thresholded + smoothed weight candidate
};

ChannelResult separate_channel(SeparatorParams& params, const AudioClip& mono,
                               const FrameConfig& frame_cfg,
                               const InferenceConfig& cfg) {
  ChannelResult res;
  auto [mag, phase] = stft(mono, frame_cfg);
  const ForwardOutput out = forward_segmented(params, mag, cfg.segment_seconds);

  res.masked = predicted_spectrogram(out.mask, mag);
  res.phase = std::move(phase);

  res.raw.values.resize(out.activation_logits.size());
  for (size_t i = 0; i < out.activation_logits.size(); ++i)
    res.raw.values[i] = 1.0 / (1.0 + std::exp(-out.activation_logits[i]));
  res.raw.frame_rate = frame_cfg.frame_rate();
  res.raw.kind = ActivationCurve::Kind::Confidence;

  res.binary = median_smooth(binarize(res.raw, cfg.activation_threshold),
                             cfg.smooth_kernel_frames);
  return res;
}

}  // namespace

SeparationResult separate(SeparatorParams& params, const AudioClip& mixture,
                          const FrameConfig& frame_cfg, const InferenceConfig& cfg,
                          const std::optional<ActivationCurve>& oracle_act) {
  cfg.validate();
  frame_cfg.validate();
  if (mixture.samples.empty()) throw DataError("separate: empty mixture");
  if (cfg.activation_source == ActivationSource::GroundTruth && !oracle_act)
    throw ConfigError("separate: ground_truth activation source needs oracle labels");

  const int64_t n = mixture.num_samples();
  std::vector<ChannelResult> channels;
  for (int c = 0; c < mixture.channels; ++c) {
    AudioClip mono = AudioClip::mono(
        {mixture.channel(c).begin(), mixture.channel(c).end()}, mixture.sample_rate);
    channels.push_back(separate_channel(params, mono, frame_cfg, cfg));
  }
  const int64_t frames = channels.front().masked.frames();

  // Resolve the weight curve. Channel curves are OR-combined so stereo
  // output is weighted consistently.
  ActivationCurve weight;
  weight.frame_rate = frame_cfg.frame_rate();
  weight.kind = ActivationCurve::Kind::Binary;
  weight.values.assign(static_cast<size_t>(frames), 1.0);
  const bool weighting = cfg.use_activation_weight &&
                         cfg.activation_source != ActivationSource::AllOnes;
  if (weighting) {
    if (cfg.activation_source == ActivationSource::Predicted) {
      for (int64_t t = 0; t < frames; ++t) {
        double v = 0.0;
        for (const auto& ch : channels)
          v = std::max(v, ch.binary.values[static_cast<size_t>(t)]);
        weight.values[static_cast<size_t>(t)] = v;
      }
    } else {  // GroundTruth
      ActivationCurve oracle = *oracle_act;
      if (oracle.kind == ActivationCurve::Kind::Confidence)
        oracle = binarize(oracle, cfg.activation_threshold);
      oracle = median_smooth(oracle, cfg.smooth_kernel_frames);
      if (oracle.size() != frames)
        throw ConfigError("separate: oracle label length " +
                          std::to_string(oracle.size()) + " != frames " +
                          std::to_string(frames));
      weight.values = oracle.values;
    }
  }

  SeparationResult result;
  result.act_used = weight;
  result.act_raw = channels.front().raw;
  if (channels.size() > 1) {  // report the channel-max confidence
    for (size_t i = 0; i < result.act_raw.values.size(); ++i)
      for (size_t c = 1; c < channels.size(); ++c)
        result.act_raw.values[i] =
            std::max(result.act_raw.values[i], channels[c].raw.values[i]);
  }

  result.estimate.channels = mixture.channels;
  result.estimate.sample_rate = mixture.sample_rate;
  result.estimate.samples.resize(static_cast<size_t>(n) * mixture.channels);
  for (int c = 0; c < mixture.channels; ++c) {
    MagSpectrogram weighted = weighting
                                  ? apply_activation_weight(channels[c].masked, weight)
                                  : channels[c].masked;
    const AudioClip wave =
        istft_with_phase(weighted, channels[c].phase, frame_cfg, n);
    std::copy(wave.samples.begin(), wave.samples.end(),
              result.estimate.samples.begin() + static_cast<int64_t>(c) * n);
  }
  return result;
}

int batch_separate(SeparatorParams& params, const std::vector<EvalSong>& eval_set,
                   const std::string& instrument, const FrameConfig& frame_cfg,
                   const InferenceConfig& cfg, const std::filesystem::path& out_dir) {
  int failures = 0;
  for (const auto& song : eval_set) {
    try {
      std::optional<ActivationCurve> oracle;
      if (cfg.activation_source == ActivationSource::GroundTruth) {
        AudioClip target = song.stems[static_cast<size_t>(song.target_index)];
        if (!target.is_mono()) target = downmix_mono(target);
        oracle = binarize(energy_activation(target, frame_cfg), 0.5);
      }
      const SeparationResult res = separate(params, song.mixture, frame_cfg, cfg, oracle);

      const std::filesystem::path song_dir = out_dir / song.song_id;
      std::filesystem::create_directories(song_dir);
      write_wav(song_dir / (instrument + "_estimate.wav"), res.estimate,
                WavFormat::Float32);
      ActivationCurve raw = res.act_raw;
      raw.instrument = instrument;
      ActivationCurve used = res.act_used;
      used.instrument = instrument;
      write_activation_csv(song_dir / (instrument + "_activation_raw.csv"), raw);
      write_activation_csv(song_dir / (instrument + "_activation_used.csv"), used);
    } catch (const std::exception& e) {
      std::cerr << "separate failed for song '" << song.song_id << "': " << e.what()
                << "\n";
      ++failures;
    }
  }
  return failures;
}

}  // namespace iass
