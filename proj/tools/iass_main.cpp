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

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "iass/bsseval.hpp"
#include "iass/checkpoint.hpp"
#include "iass/experiment.hpp"
#include "iass/fixtures.hpp"
#include "iass/separator.hpp"
#include "iass/serde.hpp"
#include "iass/trainer.hpp"
#include "iass/util.hpp"
#include "iass/wav.hpp"

namespace fs = std::filesystem;
using namespace iass;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------------

ExperimentConfig config_or_default(const std::optional<fs::path>& config_path,
                                   const std::optional<fs::path>& dataset_hint) {
  if (config_path) return load_experiment_config(*config_path);
  if (dataset_hint) {
    const fs::path candidate = *dataset_hint / "config.json";
    if (fs::is_regular_file(candidate)) return load_experiment_config(candidate);
    ExperimentConfig cfg;
    cfg.dataset_root = *dataset_hint;
    return cfg;
  }
  return ExperimentConfig{};
}

FrameConfig frame_config_from_meta(const fs::path& ckpt) {
  FrameConfig frame;
  const fs::path meta_path = ckpt.string() + ".meta.json";
  if (fs::is_regular_file(meta_path)) {
    std::ifstream f(meta_path);
    json meta;
    f >> meta;
    if (meta.contains("frame_config")) meta.at("frame_config").get_to(frame);
  }
  return frame;
}

struct EvaluateOutcome {
  std::vector<TrackReport> model_tracks;
  std::vector<TrackReport> baseline_tracks;  // instruments "<x>/ibm", "<x>/input"
};

// Walk `<estimates>/<song>/<instrument>_estimate.wav`, score each against the
// reference stems, optionally adding the mask-oracle and raw-mixture bounds.
EvaluateOutcome evaluate_directories(const fs::path& estimates_dir,
                                     const fs::path& references_dir,
                                     const EvalConfig& eval_cfg,
                                     const FrameConfig& frame_cfg, bool baselines,
                                     std::optional<double> balance_rms) {
  struct Job {
    std::string song;
    std::string instrument;
    fs::path estimate_path;
  };
  std::vector<Job> jobs;
  if (!fs::is_directory(estimates_dir))
    throw DataError("estimates directory not found: " + estimates_dir.string());
  std::vector<fs::path> song_dirs;
  for (const auto& e : fs::directory_iterator(estimates_dir))
    if (e.is_directory()) song_dirs.push_back(e.path());
  std::sort(song_dirs.begin(), song_dirs.end());
  for (const auto& dir : song_dirs) {
    for (const auto& f : fs::directory_iterator(dir)) {
      const std::string name = f.path().filename().string();
      const std::string suffix = "_estimate.wav";
      if (name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
        jobs.push_back({dir.filename().string(),
                        name.substr(0, name.size() - suffix.size()), f.path()});
    }
  }
  if (jobs.empty())
    throw DataError("no estimates found under " + estimates_dir.string());

  EvaluateOutcome outcome;
  outcome.model_tracks.resize(jobs.size());
  std::vector<std::vector<TrackReport>> baseline_slots(jobs.size());
  std::vector<std::string> skipped(jobs.size());

  parallel_for(static_cast<int64_t>(jobs.size()), [&](int64_t i) {
    const Job& job = jobs[static_cast<size_t>(i)];
    const fs::path ref_dir = references_dir / job.song;
    if (!fs::is_directory(ref_dir)) {
      skipped[static_cast<size_t>(i)] = "missing references for song " + job.song;
      return;
    }

    // target reference first, the rest in name order
    std::vector<std::string> names;
    std::vector<AudioClip> refs;
    AudioClip mixture;
    bool have_mixture = false;
    std::vector<fs::path> stems;
    for (const auto& f : fs::directory_iterator(ref_dir))
      if (f.path().extension() == ".wav") stems.push_back(f.path());
    std::sort(stems.begin(), stems.end());
    int target_index = -1;
    for (const auto& p : stems) {
      const std::string stem_name = p.stem().string();
      if (stem_name == "mixture") {
        mixture = load_audio(p, frame_cfg.sample_rate);
        have_mixture = true;
        continue;
      }
      AudioClip clip = load_audio(p, frame_cfg.sample_rate);
      if (balance_rms) clip = normalize_loudness(clip, *balance_rms);
      if (stem_name == job.instrument) target_index = static_cast<int>(refs.size());
      names.push_back(stem_name);
      refs.push_back(std::move(clip));
    }
    if (target_index < 0) {
      skipped[static_cast<size_t>(i)] =
          "no reference stem '" + job.instrument + "' for song " + job.song;
      return;
    }
    std::swap(refs[0], refs[static_cast<size_t>(target_index)]);
    std::swap(names[0], names[static_cast<size_t>(target_index)]);

    const AudioClip est = load_audio(job.estimate_path, frame_cfg.sample_rate);
    TrackReport report;
    report.song_id = job.song;
    report.instrument = job.instrument;
    report.frames = metrics_frame(est, refs, eval_cfg);
    report.medians = track_medians(report.frames);
    outcome.model_tracks[static_cast<size_t>(i)] = std::move(report);

    if (!baselines) return;
    if (!have_mixture) {
      mixture = refs[0];
      for (size_t s = 1; s < refs.size(); ++s)
        for (size_t k = 0; k < mixture.samples.size() && k < refs[s].samples.size(); ++k)
          mixture.samples[k] += refs[s].samples[k];
    }

    // raw-mixture bound
    {
      TrackReport input_report;
      input_report.song_id = job.song;
      input_report.instrument = job.instrument + "/input";
      input_report.frames = metrics_frame(mixture, refs, eval_cfg);
      input_report.medians = track_medians(input_report.frames);
      baseline_slots[static_cast<size_t>(i)].push_back(std::move(input_report));
    }
    // mask-oracle bound for the target stem
    {
      AudioClip mix_mono = mixture.is_mono() ? mixture : downmix_mono(mixture);
      auto [mix_mag, mix_phase] = stft(mix_mono, frame_cfg);
      std::vector<MagSpectrogram> stem_mags;
      for (const auto& r : refs) {
        AudioClip mono = r.is_mono() ? r : downmix_mono(r);
        mono.samples.resize(static_cast<size_t>(mix_mono.num_samples()), 0.0);
        stem_mags.push_back(stft(mono, frame_cfg).first);
      }
      const auto estimates =
          ideal_binary_mask(stem_mags, mix_mag, mix_phase, mix_mono.num_samples());
      TrackReport ibm_report;
      ibm_report.song_id = job.song;
      ibm_report.instrument = job.instrument + "/ibm";
      ibm_report.frames = metrics_frame(estimates[0], refs, eval_cfg);
      ibm_report.medians = track_medians(ibm_report.frames);
      baseline_slots[static_cast<size_t>(i)].push_back(std::move(ibm_report));
    }
  });

  for (const auto& msg : skipped)
    if (!msg.empty()) std::cerr << "warning: " << msg << " (skipped)\n";
  outcome.model_tracks.erase(
      std::remove_if(outcome.model_tracks.begin(), outcome.model_tracks.end(),
                     [](const TrackReport& t) { return t.song_id.empty(); }),
      outcome.model_tracks.end());
  if (outcome.model_tracks.empty())
    throw DataError("every song was skipped; nothing to evaluate");
  for (auto& slot : baseline_slots)
    for (auto& t : slot) outcome.baseline_tracks.push_back(std::move(t));
  return outcome;
}

void print_summary(const std::vector<TrackReport>& tracks, const std::string& title) {
  std::cout << title << "\n";
  for (const auto& [inst, metrics] : aggregate(tracks)) {
    std::cout << "  " << inst << ":";
    for (const auto& [metric, value] : metrics) {
      std::cout << " " << metric << "=";
      if (value)
        std::cout << *value;
      else
        std::cout << "missing";
    }
    std::cout << "\n";
  }
}

// ---------------------------------------------------------------------------
// subcommands
// ---------------------------------------------------------------------------

int cmd_make_fixtures(const fs::path& out, const FixtureOptions& opts) {
  OutputLock lock(out);
  make_fixtures(out, opts);
  std::cout << "fixtures written to " << out.string() << "\n";
  return kExitOk;
}

int cmd_labels(const fs::path& dataset, const fs::path& out,
               const std::optional<fs::path>& config_path) {
  const ExperimentConfig cfg = config_or_default(config_path, dataset);
  OutputLock lock(out);

  std::vector<TrackEntry> entries;
  for (const char* split : {"train", "validation", "test"}) {
    const StemManifest m = load_manifest(dataset, split);
    entries.insert(entries.end(), m.entries.begin(), m.entries.end());
  }
  if (entries.empty()) throw DataError("dataset has no stems: " + dataset.string());

  std::vector<std::string> failures(entries.size());
  parallel_for(static_cast<int64_t>(entries.size()), [&](int64_t i) {
    const TrackEntry& e = entries[static_cast<size_t>(i)];
    try {
      AudioClip clip = load_audio(e.audio_path, cfg.frame.sample_rate);
      if (!clip.is_mono()) clip = downmix_mono(clip);
      ActivationCurve conf = energy_activation(clip, cfg.frame);
      conf.instrument = e.instrument;
      const ActivationCurve bin = binarize(conf, 0.5);
      const fs::path song_dir = out / e.song_id;
      fs::create_directories(song_dir);
      write_activation_csv(song_dir / (e.instrument + "_confidence.csv"), conf);
      write_activation_csv(song_dir / (e.instrument + "_binary.csv"), bin);
    } catch (const std::exception& ex) {
      failures[static_cast<size_t>(i)] = e.audio_path.string() + ": " + ex.what();
    }
  });

  int failed = 0;
  for (const auto& msg : failures)
    if (!msg.empty()) {
      std::cerr << "labels failed: " << msg << "\n";
      ++failed;
    }
  std::cout << "wrote labels for " << (entries.size() - failed) << "/" << entries.size()
            << " stems\n";
  return failed == 0 ? kExitOk : kExitData;
}

int cmd_train(ExperimentConfig cfg, const std::optional<fs::path>& resume,
              const std::optional<fs::path>& out_override) {
  if (out_override) cfg.output_dir = *out_override;
  cfg.validate();
  OutputLock lock(cfg.output_dir);

  const StemManifest train_manifest = load_manifest(cfg.dataset_root, "train");
  const StemManifest val_manifest = load_manifest(cfg.dataset_root, "validation");
  const StemPools pools = build_pools(train_manifest, cfg.target_instrument);

  StemCache cache(ChannelPolicy::Downmix, cfg.frame.sample_rate);
  const auto val_set = make_validation_examples(val_manifest, cfg.target_instrument,
                                                cache, cfg.augment, cfg.frame);
  if (val_set.empty())
    throw DataError("validation split produced no examples for instrument '" +
                    cfg.target_instrument + "'");

  SeparatorParams params;
  if (resume) {
    params = load_checkpoint(*resume).params;  // train() reloads the full state
  } else {
    Rng init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    ModelConfig mc = cfg.model;
    params = init_model(mc, init_rng);
  }

  TrainConfig tc = cfg.train;
  if (tc.seed == 0) tc.seed = cfg.seed;
  AugmentConfig ac = cfg.augment;
  if (ac.seed == 0) ac.seed = cfg.seed;

  const TrainResult result = train(tc, std::move(params), pools, cache, ac, cfg.frame,
                                   val_set, cfg.output_dir, resume);
  std::cout << "best checkpoint: " << result.checkpoint_path.string() << " (epoch "
            << result.best_epoch << ", val " << result.best_val << ")\n";
  return kExitOk;
}

InferenceConfig inference_flags(InferenceConfig base, bool no_weight,
                                const std::optional<int>& kernel,
                                const std::optional<std::string>& source,
                                const std::optional<double>& threshold) {
  if (no_weight) base.use_activation_weight = false;
  if (kernel) base.smooth_kernel_frames = *kernel;
  if (threshold) base.activation_threshold = *threshold;
  if (source) {
    if (*source == "predicted") base.activation_source = ActivationSource::Predicted;
    else if (*source == "ground_truth")
      base.activation_source = ActivationSource::GroundTruth;
    else if (*source == "all_ones") base.activation_source = ActivationSource::AllOnes;
    else throw ConfigError("unknown activation source '" + *source + "'");
  }
  return base;
}

int cmd_separate(const fs::path& ckpt_path, const std::optional<fs::path>& input,
                 const std::optional<fs::path>& dataset, fs::path out,
                 const std::optional<fs::path>& config_path,
                 const InferenceConfig& inf_cfg,
                 const std::optional<fs::path>& oracle_csv) {
  CheckpointData ckpt = load_checkpoint(ckpt_path);

  FrameConfig frame = frame_config_from_meta(ckpt_path);
  if (config_path) {
    const ExperimentConfig cfg = load_experiment_config(*config_path);
    const FrameConfig meta = frame_config_from_meta(ckpt_path);
    if (fs::is_regular_file(ckpt_path.string() + ".meta.json") && !(cfg.frame == meta))
      throw ConfigError("checkpoint was trained with a different frame config "
                        "than the supplied experiment file");
    frame = cfg.frame;
  }

  OutputLock lock(out);
  if (input) {
    const AudioClip mixture = load_audio(*input, frame.sample_rate);
    std::optional<ActivationCurve> oracle;
    if (oracle_csv) oracle = read_activation_csv(*oracle_csv);
    InferenceConfig cfg = inf_cfg;
    if (oracle && cfg.activation_source == ActivationSource::Predicted)
      cfg.activation_source = ActivationSource::GroundTruth;
    const SeparationResult res = separate(ckpt.params, mixture, frame, cfg, oracle);

    const std::string base = input->stem().string();
    fs::create_directories(out);
    write_wav(out / (base + "_estimate.wav"), res.estimate, WavFormat::Float32);
    write_activation_csv(out / (base + "_activation_raw.csv"), res.act_raw);
    write_activation_csv(out / (base + "_activation_used.csv"), res.act_used);
    std::cout << "wrote " << (out / (base + "_estimate.wav")).string() << "\n";
    return kExitOk;
  }

  if (!dataset) throw ConfigError("separate: pass --input or --dataset");
  const ExperimentConfig cfg = config_or_default(config_path, dataset);
  const std::string instrument = cfg.target_instrument.empty() ? "lead"
                                                               : cfg.target_instrument;
  const StemManifest test_manifest = load_manifest(*dataset, "test");
  StemCache cache(ChannelPolicy::Downmix, frame.sample_rate);
  const auto eval_set =
      make_eval_set(test_manifest, instrument, cache, cfg.augment.balance_rms);
  if (eval_set.empty())
    throw DataError("test split has no songs with instrument '" + instrument + "'");

  // balanced references next to the estimates so `evaluate` is self-contained
  for (const auto& song : eval_set) {
    const fs::path ref_dir = out / "references" / song.song_id;
    fs::create_directories(ref_dir);
    for (size_t s = 0; s < song.stems.size(); ++s)
      write_wav(ref_dir / (song.instruments[s] + ".wav"), song.stems[s],
                WavFormat::Float32);
    write_wav(ref_dir / "mixture.wav", song.mixture, WavFormat::Float32);
  }
  const int failures = batch_separate(ckpt.params, eval_set, instrument, frame,
                                      inf_cfg, out / "estimates");
  std::cout << "separated " << (eval_set.size() - failures) << "/" << eval_set.size()
            << " songs into " << (out / "estimates").string() << "\n";
  return failures == 0 ? kExitOk : kExitData;
}

int cmd_evaluate(const fs::path& estimates, const fs::path& references,
                 const fs::path& out, const EvalConfig& eval_cfg,
                 const FrameConfig& frame_cfg, bool baselines,
                 std::optional<double> balance_rms) {
  OutputLock lock(out);
  const EvaluateOutcome outcome = evaluate_directories(
      estimates, references, eval_cfg, frame_cfg, baselines, balance_rms);

  write_report_json(out / "report.json", outcome.model_tracks);
  write_report_csv(out / "report.csv", outcome.model_tracks);
  print_summary(outcome.model_tracks, "model estimates (median dB)");
  if (!outcome.baseline_tracks.empty()) {
    write_report_json(out / "baselines.json", outcome.baseline_tracks);
    write_report_csv(out / "baselines.csv", outcome.baseline_tracks);
    print_summary(outcome.baseline_tracks, "bounds (median dB)");
  }
  return kExitOk;
}

struct AblationRow {
  std::string label;
  bool train_labels;
  bool test_labels;
  std::optional<fs::path> checkpoint;
  std::map<std::string, std::optional<double>> metrics;  // SDR,SIR,SAR,Avg
  bool present = false;
};

int cmd_ablate(const ExperimentConfig& cfg,
               const std::optional<fs::path>& ckpt_multitask,
               const std::optional<fs::path>& ckpt_nolabels, const fs::path& out) {
  OutputLock lock(out);

  std::vector<AblationRow> rows(3);
  rows[0] = {"train=no test=no", false, false, ckpt_nolabels, {}, false};
  rows[1] = {"train=yes test=no", true, false, ckpt_multitask, {}, false};
  rows[2] = {"train=yes test=yes", true, true, ckpt_multitask, {}, false};

  const StemManifest test_manifest = load_manifest(cfg.dataset_root, "test");
  StemCache cache(ChannelPolicy::Downmix, cfg.frame.sample_rate);
  const auto eval_set = make_eval_set(test_manifest, cfg.target_instrument, cache,
                                      cfg.augment.balance_rms);
  if (eval_set.empty()) throw DataError("ablate: empty test split");

  const fs::path ref_dir = out / "references";
  for (const auto& song : eval_set) {
    fs::create_directories(ref_dir / song.song_id);
    for (size_t s = 0; s < song.stems.size(); ++s)
      write_wav(ref_dir / song.song_id / (song.instruments[s] + ".wav"),
                song.stems[s], WavFormat::Float32);
    write_wav(ref_dir / song.song_id / "mixture.wav", song.mixture, WavFormat::Float32);
  }

  for (size_t r = 0; r < rows.size(); ++r) {
    AblationRow& row = rows[r];
    if (!row.checkpoint) continue;
    CheckpointData ckpt = load_checkpoint(*row.checkpoint);
    FrameConfig frame = frame_config_from_meta(*row.checkpoint);

    InferenceConfig inf = cfg.inference;
    inf.activation_source =
        row.test_labels ? ActivationSource::Predicted : ActivationSource::AllOnes;
    const fs::path est_dir = out / ("row" + std::to_string(r)) / "estimates";
    const int failures = batch_separate(ckpt.params, eval_set, cfg.target_instrument,
                                        frame, inf, est_dir);
    if (failures > 0) {
      std::cerr << "ablate: row '" << row.label << "' had " << failures
                << " failed songs\n";
      continue;
    }
    const EvaluateOutcome outcome = evaluate_directories(
        est_dir, ref_dir, cfg.eval, frame, /*baselines=*/false, std::nullopt);
    const auto summary = aggregate(outcome.model_tracks);
    const auto& metrics = summary.at(cfg.target_instrument);
    row.metrics["SDR"] = metrics.at("SDR");
    row.metrics["SIR"] = metrics.at("SIR");
    row.metrics["SAR"] = metrics.at("SAR");
    if (metrics.at("SDR") && metrics.at("SIR") && metrics.at("SAR"))
      row.metrics["Avg"] =
          (*metrics.at("SDR") + *metrics.at("SIR") + *metrics.at("SAR")) / 3.0;
    row.present = true;
  }

  // consolidated table, ordered no/no, yes/no, yes/yes
  std::ofstream csv(out / "ablation.csv");
  csv << "instrument,train_labels,test_labels,SDR,SIR,SAR,Avg\n";
  json doc = json::array();
  std::cout << "ablation (" << cfg.target_instrument << ")\n";
  for (const auto& row : rows) {
    csv << cfg.target_instrument << "," << (row.train_labels ? "yes" : "no") << ","
        << (row.test_labels ? "yes" : "no");
    json jrow{{"instrument", cfg.target_instrument},
              {"train_labels", row.train_labels},
              {"test_labels", row.test_labels},
              {"present", row.present}};
    std::cout << "  " << row.label << ": ";
    if (!row.present) {
      csv << ",absent,absent,absent,absent\n";
      std::cout << "absent (checkpoint not provided)\n";
      doc.push_back(std::move(jrow));
      continue;
    }
    for (const char* m : {"SDR", "SIR", "SAR", "Avg"}) {
      csv << ",";
      const auto& v = row.metrics.at(m);
      if (v) {
        csv << *v;
        jrow[m] = *v;
        std::cout << m << "=" << *v << " ";
      } else {
        csv << "missing";
        jrow[m] = nullptr;
      }
    }
    csv << "\n";
    std::cout << "\n";
    doc.push_back(std::move(jrow));
  }
  std::ofstream jf(out / "ablation.json");
  jf << doc.dump(2) << "\n";
  return kExitOk;
}

int cmd_report(const fs::path& dir) {
  bool printed = false;
  for (const char* name : {"report.csv", "baselines.csv", "ablation.csv"}) {
    const fs::path p = dir / name;
    if (!fs::is_regular_file(p)) continue;
    std::ifstream f(p);
    std::cout << "== " << name << " ==\n" << f.rdbuf() << "\n";
    printed = true;
  }
  if (!printed) throw DataError("no report files under " + dir.string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"instrument-aware music source separation toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  // make-fixtures
  {
    auto* sub = app.add_subcommand("make-fixtures", "synthesize a toy dataset");
    auto out = std::make_shared<fs::path>();
    auto opts = std::make_shared<FixtureOptions>();
    sub->add_option("--out", *out, "output dataset directory")->required();
    sub->add_option("--num-songs", opts->num_songs);
    sub->add_option("--song-seconds", opts->song_seconds);
    sub->add_option("--sample-rate", opts->sample_rate);
    sub->add_option("--seed", opts->seed);
    sub->callback([out, opts, &action] {
      action = [out, opts] { return cmd_make_fixtures(*out, *opts); };
    });
  }

  // labels
  {
    auto* sub = app.add_subcommand("labels", "write per-stem activity label CSVs");
    auto dataset = std::make_shared<fs::path>();
    auto out = std::make_shared<fs::path>();
    auto config = std::make_shared<std::optional<fs::path>>();
    sub->add_option("--dataset", *dataset, "dataset root")->required();
    sub->add_option("--out", *out, "output directory")->required();
    sub->add_option("--config", *config, "experiment config for the frame geometry");
    sub->callback([=, &action] {
      action = [=] { return cmd_labels(*dataset, *out, *config); };
    });
  }

  // train
  {
    auto* sub = app.add_subcommand("train", "optimize a separator");
    auto config = std::make_shared<fs::path>();
    auto resume = std::make_shared<std::optional<fs::path>>();
    auto out = std::make_shared<std::optional<fs::path>>();
    auto max_epochs = std::make_shared<std::optional<int>>();
    auto steps = std::make_shared<std::optional<int>>();
    auto batch = std::make_shared<std::optional<int>>();
    auto seed = std::make_shared<std::optional<uint64_t>>();
    auto alpha = std::make_shared<std::optional<double>>();
    auto instrument = std::make_shared<std::optional<std::string>>();
    sub->add_option("--config", *config, "experiment JSON")->required();
    sub->add_option("--resume", *resume, "checkpoint to resume from");
    sub->add_option("--out", *out, "output directory override");
    sub->add_option("--max-epochs", *max_epochs);
    sub->add_option("--steps-per-epoch", *steps);
    sub->add_option("--batch-size", *batch);
    sub->add_option("--seed", *seed);
    sub->add_option("--alpha", *alpha, "activity loss weight override");
    sub->add_option("--instrument", *instrument, "target instrument override");
    sub->callback([=, &action] {
      action = [=] {
        ExperimentConfig cfg = load_experiment_config(*config);
        if (*max_epochs) cfg.train.max_epochs = **max_epochs;
        if (*steps) cfg.train.steps_per_epoch = **steps;
        if (*batch) cfg.train.batch_size = **batch;
        if (*seed) {
          cfg.seed = **seed;
          cfg.train.seed = **seed;
          cfg.augment.seed = **seed;
        }
        if (*alpha) cfg.model.alpha = **alpha;
        if (*instrument) cfg.target_instrument = **instrument;
        return cmd_train(std::move(cfg), *resume, *out);
      };
    });
  }

  // separate
  {
    auto* sub = app.add_subcommand("separate", "run inference");
    auto ckpt = std::make_shared<fs::path>();
    auto input = std::make_shared<std::optional<fs::path>>();
    auto dataset = std::make_shared<std::optional<fs::path>>();
    auto out = std::make_shared<fs::path>("separated");
    auto config = std::make_shared<std::optional<fs::path>>();
    auto oracle = std::make_shared<std::optional<fs::path>>();
    auto no_weight = std::make_shared<bool>(false);
    auto kernel = std::make_shared<std::optional<int>>();
    auto source = std::make_shared<std::optional<std::string>>();
    auto threshold = std::make_shared<std::optional<double>>();
    sub->add_option("--checkpoint", *ckpt, "trained checkpoint")->required();
    sub->add_option("--input", *input, "single mixture WAV");
    sub->add_option("--dataset", *dataset, "dataset root (separates the test split)");
    sub->add_option("--out", *out, "output directory");
    sub->add_option("--config", *config, "experiment JSON");
    sub->add_option("--oracle-labels", *oracle, "ground-truth activation CSV");
    sub->add_flag("--no-activation-weight", *no_weight,
                  "skip the activity weighting stage");
    sub->add_option("--smooth-kernel", *kernel, "median smoothing kernel (odd)");
    sub->add_option("--activation-source", *source,
                    "predicted | ground_truth | all_ones");
    sub->add_option("--threshold", *threshold, "activation binarization threshold");
    sub->callback([=, &action] {
      action = [=] {
        ExperimentConfig base = config_or_default(*config, *dataset);
        const InferenceConfig inf = inference_flags(base.inference, *no_weight,
                                                    *kernel, *source, *threshold);
        return cmd_separate(*ckpt, *input, *dataset, *out, *config, inf, *oracle);
      };
    });
  }

  // evaluate
  {
    auto* sub = app.add_subcommand("evaluate", "score estimates against references");
    auto estimates = std::make_shared<fs::path>();
    auto references = std::make_shared<fs::path>();
    auto out = std::make_shared<fs::path>("evaluation");
    auto config = std::make_shared<std::optional<fs::path>>();
    auto taps = std::make_shared<std::optional<int>>();
    auto frame_seconds = std::make_shared<std::optional<double>>();
    auto no_baselines = std::make_shared<bool>(false);
    auto balance = std::make_shared<std::optional<double>>();
    sub->add_option("--estimates", *estimates)->required();
    sub->add_option("--references", *references)->required();
    sub->add_option("--out", *out);
    sub->add_option("--config", *config, "experiment JSON");
    sub->add_option("--taps", *taps, "distortion filter taps");
    sub->add_option("--frame-seconds", *frame_seconds);
    sub->add_flag("--no-baselines", *no_baselines, "skip mask-oracle/raw-mixture bounds");
    sub->add_option("--balance-rms", *balance,
                    "loudness-balance raw reference stems before scoring");
    sub->callback([=, &action] {
      action = [=] {
        ExperimentConfig base = config_or_default(*config, std::nullopt);
        EvalConfig ec = base.eval;
        if (*taps) ec.distortion_filter_taps = **taps;
        if (*frame_seconds) ec.frame_seconds = **frame_seconds;
        return cmd_evaluate(*estimates, *references, *out, ec, base.frame,
                            !*no_baselines, *balance);
      };
    });
  }

  // ablate
  {
    auto* sub = app.add_subcommand(
        "ablate", "activity-weighting ablation table over the test split");
    auto config = std::make_shared<fs::path>();
    auto multitask = std::make_shared<std::optional<fs::path>>();
    auto nolabels = std::make_shared<std::optional<fs::path>>();
    auto out = std::make_shared<fs::path>("ablation");
    sub->add_option("--config", *config, "experiment JSON")->required();
    sub->add_option("--checkpoint-multitask", *multitask,
                    "checkpoint trained with activity labels");
    sub->add_option("--checkpoint-nolabels", *nolabels,
                    "checkpoint trained with alpha=0");
    sub->add_option("--out", *out);
    sub->callback([=, &action] {
      action = [=] {
        const ExperimentConfig cfg = load_experiment_config(*config);
        return cmd_ablate(cfg, *multitask, *nolabels, *out);
      };
    });
  }

  // report
  {
    auto* sub = app.add_subcommand("report", "print report files from a directory");
    auto dir = std::make_shared<fs::path>();
    sub->add_option("--report", *dir, "evaluate/ablate output directory")->required();
    sub->callback([=, &action] { action = [=] { return cmd_report(*dir); }; });
  }

  CLI11_PARSE(app, argc, argv);
  try {
    return action ? action() : kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
