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
#include <optional>
#include <string>
#include <vector>

#include "iass/dsp.hpp"

namespace iass {

struct EvalConfig {
  double frame_seconds = 1.0;      // framewise metric window == hop
  int distortion_filter_taps = 512;
  double db_clip = 30.0;           // floor/ceiling for degenerate frames

  void validate() const;
};

/// Least-squares decomposition of an estimate against delayed references:
/// s_target from the target reference's delay span, e_interf from the full
/// span minus s_target, e_artif the remainder. Components live on the full
/// filter support of n + taps - 1 samples (the estimate is zero-extended)
/// so that the parts sum to the estimate exactly and e_artif is orthogonal
/// to every delayed reference.
struct Decomposition {
  std::vector<double> s_target;
  std::vector<double> e_interf;
  std::vector<double> e_artif;
};

Decomposition decompose(const std::vector<double>& est,
                        const std::vector<std::vector<double>>& refs, int taps);

/// Framewise metric series. Frames with a silent target reference are marked
/// invalid and excluded from medians.
struct FrameMetrics {
  std::vector<double> sdr, sir, sar, isr;
  std::vector<bool> valid;
};

FrameMetrics metrics_frame(const AudioClip& est, const std::vector<AudioClip>& refs,
                           const EvalConfig& cfg);

struct TrackReport {
  std::string song_id;
  std::string instrument;
  FrameMetrics frames;
  std::map<std::string, std::optional<double>> medians;  // metric -> median dB
};

/// Median over valid frames per metric; empty when no frame is valid.
std::map<std::string, std::optional<double>> track_medians(const FrameMetrics& fm);

/// Median over tracks per (instrument, metric); missing tracks skipped.
std::map<std::string, std::map<std::string, std::optional<double>>> aggregate(
    const std::vector<TrackReport>& tracks);

/// Oracle estimates: winner-take-all masks over the stems' magnitudes
/// (ties to the lowest stem index), applied to the mixture magnitude and
/// synthesized with the mixture phase. Masks partition unity per bin/frame.
std::vector<AudioClip> ideal_binary_mask(const std::vector<MagSpectrogram>& stem_mags,
                                         const MagSpectrogram& mix_mag,
                                         const PhaseSpectrogram& mix_phase,
                                         std::optional<int64_t> length = std::nullopt);

/// Aggregated SDR when the raw mixture is submitted as the estimate.
std::optional<double> input_sdr(const AudioClip& mixture, const AudioClip& target_ref,
                                const std::vector<AudioClip>& other_refs,
                                const EvalConfig& cfg);

/// Report files: JSON with full framewise series, CSV summary rows
/// `instrument,metric,median_db`.
void write_report_json(const std::filesystem::path& path,
                       const std::vector<TrackReport>& tracks);
void write_report_csv(const std::filesystem::path& path,
                      const std::vector<TrackReport>& tracks);

}  // namespace iass
