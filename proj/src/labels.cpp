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

#include "iass/labels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace iass {

namespace {

constexpr double kDbFloor = -60.0;
constexpr double kDbCeil = -10.0;
constexpr int kPreSmoothKernel = 5;

int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

double median_of(std::vector<double>& scratch) {
  const size_t n = scratch.size();
  std::nth_element(scratch.begin(), scratch.begin() + n / 2, scratch.end());
  double hi = scratch[n / 2];
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(scratch.begin(), scratch.begin() + n / 2);
  return 0.5 * (lo + hi);
}

}  // namespace

ActivationCurve energy_activation(const AudioClip& stem, const FrameConfig& cfg) {
  cfg.validate();
  if (!stem.is_mono()) throw ConfigError("energy_activation: stem must be mono");
  if (stem.sample_rate != cfg.sample_rate)
    throw ConfigError("energy_activation: sample rate mismatch");

  const int64_t n = stem.num_samples();
  const int win = cfg.window_size;
  const int hop = cfg.hop_size;
  const int64_t frames = std::max<int64_t>(num_frames_for(n, cfg), n > 0 ? 1 : 0);

  ActivationCurve curve;
  curve.frame_rate = cfg.frame_rate();
  curve.instrument = "";
  curve.kind = ActivationCurve::Kind::Confidence;
  curve.values.assign(static_cast<size_t>(frames), 0.0);
  if (frames == 0) return curve;

  // Prefix sums of squares over the center-padded signal; frame RMS is then
  // O(1) per frame, which matters in the augmentation sampler's hot loop.
  const int64_t pad = cfg.center_pad ? win / 2 : 0;
  const int64_t padded_len = n + 2 * pad;
  const auto x = stem.channel(0);
  std::vector<double> prefix(padded_len + 1, 0.0);
  for (int64_t i = 0; i < padded_len; ++i) {
    const int64_t src = i - pad;
    const double v = (src >= 0 && src < n)
                         ? x[static_cast<size_t>(src)]
                         : (cfg.center_pad ? x[static_cast<size_t>(reflect_index(src, n))] : 0.0);
    prefix[i + 1] = prefix[i] + v * v;
  }

  std::vector<double> frame_rms(static_cast<size_t>(frames));
  double max_rms = 0.0;
  for (int64_t t = 0; t < frames; ++t) {
    const int64_t lo = std::clamp<int64_t>(t * hop, 0, padded_len);
    const int64_t hi = std::clamp<int64_t>(t * hop + win, 0, padded_len);
    const double energy = prefix[hi] - prefix[lo];
    const double r = hi > lo ? std::sqrt(energy / static_cast<double>(hi - lo)) : 0.0;
    frame_rms[static_cast<size_t>(t)] = r;
    max_rms = std::max(max_rms, r);
  }

  if (max_rms > 0.0) {
    for (int64_t t = 0; t < frames; ++t) {
      const double r = frame_rms[static_cast<size_t>(t)];
      if (r <= 0.0) continue;
      const double db = 20.0 * std::log10(r / max_rms);
      curve.values[static_cast<size_t>(t)] =
          std::clamp((db - kDbFloor) / (kDbCeil - kDbFloor), 0.0, 1.0);
    }
  }
  if (frames >= 2) curve = median_smooth(curve, kPreSmoothKernel);
  return curve;
}

ActivationCurve binarize(const ActivationCurve& curve, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("binarize: threshold must be inside (0,1)");
  if (curve.kind != ActivationCurve::Kind::Confidence)
    throw ConfigError("binarize: input must be a confidence curve");
  ActivationCurve out = curve;
  out.kind = ActivationCurve::Kind::Binary;
  for (double& v : out.values) v = v >= threshold ? 1.0 : 0.0;
  return out;
}

ActivationCurve median_smooth(const ActivationCurve& curve, int kernel_frames) {
  if (kernel_frames < 1 || kernel_frames % 2 == 0)
    throw ConfigError("median_smooth: kernel must be odd and >= 1");
  if (kernel_frames == 1 || curve.values.empty()) return curve;

  const int64_t n = curve.size();
  const int half = kernel_frames / 2;
  ActivationCurve out = curve;
  std::vector<double> window(static_cast<size_t>(kernel_frames));
  for (int64_t t = 0; t < n; ++t) {
    for (int k = -half; k <= half; ++k)
      window[static_cast<size_t>(k + half)] =
          curve.values[static_cast<size_t>(reflect_index(t + k, n))];
    out.values[static_cast<size_t>(t)] = median_of(window);
  }
  return out;
}

ActivationCurve aggregate_seconds(const ActivationCurve& curve) {
  if (curve.frame_rate <= 0.0)
    throw ConfigError("aggregate_seconds: frame_rate unknown");
  ActivationCurve out;
  out.instrument = curve.instrument;
  out.kind = ActivationCurve::Kind::Confidence;
  out.frame_rate = 1.0;
  if (curve.values.empty()) return out;

  const double rate = curve.frame_rate;
  const int64_t frames = curve.size();
  const int64_t seconds =
      static_cast<int64_t>(std::ceil(static_cast<double>(frames) / rate));
  out.values.reserve(static_cast<size_t>(seconds));

  std::vector<double> members;
  for (int64_t s = 0; s < seconds; ++s) {
    members.clear();
    // Frame t spans [t, t+1) in frame units; second s spans [s*rate, (s+1)*rate).
    // A frame belongs to every second it overlaps, so boundary frames count on
    // both sides and the trailing partial second is never empty.
    const int64_t t_lo = std::max<int64_t>(
        0, static_cast<int64_t>(std::floor(static_cast<double>(s) * rate)));
    const int64_t t_hi = std::min<int64_t>(
        frames - 1,
        static_cast<int64_t>(std::ceil(static_cast<double>(s + 1) * rate)));
    for (int64_t t = t_lo; t <= t_hi; ++t) {
      const double a = static_cast<double>(t);
      if (a < static_cast<double>(s + 1) * rate &&
          a + 1.0 > static_cast<double>(s) * rate)
        members.push_back(curve.values[static_cast<size_t>(t)]);
    }
    if (members.empty())  // unreachable except for double rounding at bounds
      members.push_back(curve.values[static_cast<size_t>(std::min(t_lo, frames - 1))]);
    out.values.push_back(median_of(members));
  }
  return out;
}

double auc(const ActivationCurve& scores, const ActivationCurve& labels) {
  if (scores.size() != labels.size())
    throw ConfigError("auc: scores and labels differ in length");
  if (labels.kind != ActivationCurve::Kind::Binary)
    throw ConfigError("auc: labels must be binary");

  const int64_t n = scores.size();
  int64_t positives = 0;
  for (double v : labels.values) positives += v >= 0.5 ? 1 : 0;
  const int64_t negatives = n - positives;
  if (positives == 0 || negatives == 0)
    throw ConfigError("auc: undefined, one class is absent");

  // Rank-sum formulation with average ranks over ties. Exactly matches the
  // positive/negative pair count with half credit for ties.
  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
    return scores.values[static_cast<size_t>(a)] < scores.values[static_cast<size_t>(b)];
  });

  double rank_sum_pos = 0.0;
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    while (j + 1 < n && scores.values[static_cast<size_t>(order[j + 1])] ==
                            scores.values[static_cast<size_t>(order[i])])
      ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (int64_t k = i; k <= j; ++k)
      if (labels.values[static_cast<size_t>(order[k])] >= 0.5)
        rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos -
                   0.5 * static_cast<double>(positives) * (static_cast<double>(positives) + 1.0);
  return u / (static_cast<double>(positives) * static_cast<double>(negatives));
}

double frame_accuracy(const ActivationCurve& pred, const ActivationCurve& truth) {
  if (pred.values.empty() || truth.values.empty())
    throw ConfigError("frame_accuracy: empty curve");
  if (pred.size() != truth.size())
    throw ConfigError("frame_accuracy: length mismatch");
  int64_t hits = 0;
  for (int64_t t = 0; t < pred.size(); ++t) {
    const bool a = pred.values[static_cast<size_t>(t)] >= 0.5;
    const bool b = truth.values[static_cast<size_t>(t)] >= 0.5;
    hits += a == b ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

void write_activation_csv(const std::filesystem::path& path,
                          const ActivationCurve& curve) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write activation CSV: " + path.string());
  f << "# instrument=" << curve.instrument << " frame_rate=" << curve.frame_rate
    << " kind="
    << (curve.kind == ActivationCurve::Kind::Binary ? "binary" : "confidence")
    << "\n";
  f << "frame_index,value\n";
  f.precision(12);
  for (int64_t t = 0; t < curve.size(); ++t)
    f << t << "," << curve.values[static_cast<size_t>(t)] << "\n";
  if (!f) throw DataError("failed writing activation CSV: " + path.string());
}

ActivationCurve read_activation_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read activation CSV: " + path.string());
  ActivationCurve curve;
  std::string line;
  if (!std::getline(f, line) || line.rfind("# ", 0) != 0)
    throw DataError("activation CSV missing header: " + path.string());

  std::istringstream hdr(line.substr(2));
  std::string field;
  while (hdr >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = field.substr(0, eq);
    const std::string val = field.substr(eq + 1);
    if (key == "instrument") curve.instrument = val;
    else if (key == "frame_rate") curve.frame_rate = std::stod(val);
    else if (key == "kind")
      curve.kind = val == "binary" ? ActivationCurve::Kind::Binary
                                   : ActivationCurve::Kind::Confidence;
  }

  std::getline(f, line);  // column header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError("malformed activation CSV row in " + path.string());
    curve.values.push_back(std::stod(line.substr(comma + 1)));
  }
  return curve;
}

}  // namespace iass
