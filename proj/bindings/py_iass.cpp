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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "iass/bsseval.hpp"
#include "iass/checkpoint.hpp"
#include "iass/fixtures.hpp"
#include "iass/separator.hpp"
#include "iass/serde.hpp"
#include "iass/trainer.hpp"
#include "iass/wav.hpp"

namespace py = pybind11;
using namespace iass;

namespace {

AudioClip clip_from_array(const py::array_t<double, py::array::c_style>& a, int rate) {
  AudioClip clip;
  clip.sample_rate = rate;
  if (a.ndim() == 1) {
    clip.channels = 1;
    clip.samples.assign(a.data(), a.data() + a.shape(0));
  } else if (a.ndim() == 2) {
    clip.channels = static_cast<int>(a.shape(0));
    clip.samples.assign(a.data(), a.data() + a.shape(0) * a.shape(1));
  } else {
    throw ConfigError("audio arrays must be 1-d (mono) or 2-d (channels, samples)");
  }
  return clip;
}

py::array_t<double> array_from_clip(const AudioClip& clip) {
  if (clip.is_mono()) {
    py::array_t<double> out(static_cast<py::ssize_t>(clip.num_samples()));
    std::copy(clip.samples.begin(), clip.samples.end(), out.mutable_data());
    return out;
  }
  py::array_t<double> out({static_cast<py::ssize_t>(clip.channels),
                           static_cast<py::ssize_t>(clip.num_samples())});
  std::copy(clip.samples.begin(), clip.samples.end(), out.mutable_data());
  return out;
}

py::array_t<double> array_from_matrix(const Eigen::MatrixXd& m) {
  py::array_t<double> out({static_cast<py::ssize_t>(m.rows()),
                           static_cast<py::ssize_t>(m.cols())});
  auto r = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < r.shape(0); ++i)
    for (py::ssize_t j = 0; j < r.shape(1); ++j) r(i, j) = m(i, j);
  return out;
}

Eigen::MatrixXd matrix_from_array(const py::array_t<double, py::array::c_style>& a) {
  if (a.ndim() != 2) throw ConfigError("expected a 2-d (bins, frames) array");
  Eigen::MatrixXd m(a.shape(0), a.shape(1));
  auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < a.shape(0); ++i)
    for (py::ssize_t j = 0; j < a.shape(1); ++j) m(i, j) = r(i, j);
  return m;
}

ActivationCurve curve_from_array(const py::array_t<double, py::array::c_style>& a,
                                 double frame_rate, bool binary) {
  if (a.ndim() != 1) throw ConfigError("activation curves must be 1-d");
  ActivationCurve c;
  c.values.assign(a.data(), a.data() + a.shape(0));
  c.frame_rate = frame_rate;
  c.kind = binary ? ActivationCurve::Kind::Binary : ActivationCurve::Kind::Confidence;
  return c;
}

py::array_t<double> array_from_values(const std::vector<double>& v) {
  py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

ModelConfig model_config_from_dict(const py::dict& d) {
  nlohmann::json j = nlohmann::json::parse(
      py::str(py::module_::import("json").attr("dumps")(d)).cast<std::string>());
  return j.get<ModelConfig>();
}

}  // namespace

PYBIND11_MODULE(_iass, m) {
  m.doc() = "instrument-aware source separation core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_IOError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  py::class_<FrameConfig>(m, "FrameConfig")
      .def(py::init([](int sample_rate, int window_size, int hop_size,
                       const std::string& window, bool center) {
             FrameConfig c{sample_rate, window_size, hop_size, window, center};
             c.validate();
             return c;
           }),
           py::arg("sample_rate") = 44100, py::arg("window_size") = 4096,
           py::arg("hop_size") = 1024, py::arg("window_function") = "hann",
           py::arg("center_pad") = true)
      .def_readonly("sample_rate", &FrameConfig::sample_rate)
      .def_readonly("window_size", &FrameConfig::window_size)
      .def_readonly("hop_size", &FrameConfig::hop_size)
      .def_property_readonly("num_bins", &FrameConfig::num_bins)
      .def_property_readonly("frame_rate", &FrameConfig::frame_rate);

  m.def(
      "stft",
      [](const py::array_t<double, py::array::c_style>& x, const FrameConfig& cfg) {
        const auto [mag, phase] = stft(clip_from_array(x, cfg.sample_rate), cfg);
        return py::make_tuple(array_from_matrix(mag.values),
                              array_from_matrix(phase.values));
      },
      py::arg("samples"), py::arg("config"),
      "magnitude and phase planes of a mono signal");

  m.def(
      "istft",
      [](const py::array_t<double, py::array::c_style>& mag,
         const py::array_t<double, py::array::c_style>& phase, const FrameConfig& cfg,
         std::optional<int64_t> length) {
        MagSpectrogram m2{matrix_from_array(mag), cfg};
        PhaseSpectrogram p2{matrix_from_array(phase), cfg};
        return array_from_clip(istft_with_phase(m2, p2, cfg, length));
      },
      py::arg("magnitude"), py::arg("phase"), py::arg("config"),
      py::arg("length") = std::nullopt);

  m.def("downmix_mono",
        [](const py::array_t<double, py::array::c_style>& x, int sample_rate) {
          return array_from_clip(downmix_mono(clip_from_array(x, sample_rate)));
        },
        py::arg("samples"), py::arg("sample_rate") = 44100);

  m.def("rms", [](const py::array_t<double, py::array::c_style>& x) {
    return rms(clip_from_array(x, 44100));
  });

  m.def(
      "normalize_loudness",
      [](const py::array_t<double, py::array::c_style>& x, double target) {
        bool unscalable = false;
        const AudioClip out =
            normalize_loudness(clip_from_array(x, 44100), target, &unscalable);
        return py::make_tuple(array_from_clip(out), unscalable);
      },
      py::arg("samples"), py::arg("target_rms"));

  m.def(
      "resample",
      [](const py::array_t<double, py::array::c_style>& x, int rate_in, int rate_out) {
        return array_from_clip(resample(clip_from_array(x, rate_in), rate_out));
      },
      py::arg("samples"), py::arg("rate_in"), py::arg("rate_out"));

  m.def(
      "energy_activation",
      [](const py::array_t<double, py::array::c_style>& x, const FrameConfig& cfg) {
        return array_from_values(
            energy_activation(clip_from_array(x, cfg.sample_rate), cfg).values);
      },
      py::arg("samples"), py::arg("config"));

  m.def(
      "binarize",
      [](const py::array_t<double, py::array::c_style>& v, double threshold) {
        return array_from_values(binarize(curve_from_array(v, 1.0, false), threshold).values);
      },
      py::arg("values"), py::arg("threshold") = 0.5);

  m.def(
      "median_smooth",
      [](const py::array_t<double, py::array::c_style>& v, int kernel) {
        return array_from_values(median_smooth(curve_from_array(v, 1.0, false), kernel).values);
      },
      py::arg("values"), py::arg("kernel_frames"));

  m.def(
      "aggregate_seconds",
      [](const py::array_t<double, py::array::c_style>& v, double frame_rate) {
        return array_from_values(
            aggregate_seconds(curve_from_array(v, frame_rate, false)).values);
      },
      py::arg("values"), py::arg("frame_rate"));

  m.def(
      "auc",
      [](const py::array_t<double, py::array::c_style>& scores,
         const py::array_t<double, py::array::c_style>& labels) {
        return auc(curve_from_array(scores, 1.0, false),
                   curve_from_array(labels, 1.0, true));
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "frame_accuracy",
      [](const py::array_t<double, py::array::c_style>& pred,
         const py::array_t<double, py::array::c_style>& truth) {
        return frame_accuracy(curve_from_array(pred, 1.0, true),
                              curve_from_array(truth, 1.0, true));
      },
      py::arg("pred"), py::arg("truth"));

  py::class_<SeparatorParams>(m, "Model")
      .def(py::init([](const py::dict& config, uint64_t seed) {
             Rng rng(seed);
             return init_model(model_config_from_dict(config), rng);
           }),
           py::arg("config") = py::dict(), py::arg("seed") = 0)
      .def_property_readonly("num_parameters", &SeparatorParams::num_parameters)
      .def_property_readonly("checksum", &SeparatorParams::checksum)
      .def(
          "forward",
          [](SeparatorParams& p, const py::array_t<double, py::array::c_style>& mag,
             bool train, const FrameConfig& cfg) {
            MagSpectrogram m2{matrix_from_array(mag), cfg};
            const ForwardOutput out =
                forward(p, m2, train ? RunMode::Train : RunMode::Eval);
            return py::make_tuple(array_from_matrix(out.mask),
                                  array_from_values(out.activation_logits));
          },
          py::arg("mix_magnitude"), py::arg("train") = false,
          py::arg("config") = FrameConfig{})
      .def(
          "save",
          [](const SeparatorParams& p, const std::filesystem::path& path) {
            save_checkpoint(path, p, AdamState{}, Rng(0).state(), 0);
          },
          py::arg("path"))
      .def_static(
          "load",
          [](const std::filesystem::path& path) {
            return load_checkpoint(path).params;
          },
          py::arg("path"));

  m.def(
      "separate",
      [](SeparatorParams& params, const py::array_t<double, py::array::c_style>& mixture,
         const FrameConfig& frame, bool use_weight, int smooth_kernel,
         double threshold, const std::string& source,
         std::optional<py::array_t<double, py::array::c_style>> oracle) {
        InferenceConfig cfg;
        cfg.use_activation_weight = use_weight;
        cfg.smooth_kernel_frames = smooth_kernel;
        cfg.activation_threshold = threshold;
        if (source == "predicted") cfg.activation_source = ActivationSource::Predicted;
        else if (source == "ground_truth")
          cfg.activation_source = ActivationSource::GroundTruth;
        else if (source == "all_ones") cfg.activation_source = ActivationSource::AllOnes;
        else throw ConfigError("unknown activation source '" + source + "'");

        std::optional<ActivationCurve> oracle_curve;
        if (oracle) oracle_curve = curve_from_array(*oracle, frame.frame_rate(), true);
        const SeparationResult res = separate(
            params, clip_from_array(mixture, frame.sample_rate), frame, cfg, oracle_curve);
        py::dict out;
        out["estimate"] = array_from_clip(res.estimate);
        out["activation_used"] = array_from_values(res.act_used.values);
        out["activation_raw"] = array_from_values(res.act_raw.values);
        return out;
      },
      py::arg("model"), py::arg("mixture"), py::arg("config") = FrameConfig{},
      py::arg("use_activation_weight") = true, py::arg("smooth_kernel") = 9,
      py::arg("threshold") = 0.5, py::arg("activation_source") = "predicted",
      py::arg("oracle") = std::nullopt);

  m.def(
      "bss_eval",
      [](const py::array_t<double, py::array::c_style>& est,
         const std::vector<py::array_t<double, py::array::c_style>>& refs,
         int sample_rate, int taps, double frame_seconds, double db_clip) {
        EvalConfig cfg;
        cfg.distortion_filter_taps = taps;
        cfg.frame_seconds = frame_seconds;
        cfg.db_clip = db_clip;
        std::vector<AudioClip> ref_clips;
        for (const auto& r : refs) ref_clips.push_back(clip_from_array(r, sample_rate));
        const FrameMetrics fm =
            metrics_frame(clip_from_array(est, sample_rate), ref_clips, cfg);
        py::dict out;
        out["SDR"] = array_from_values(fm.sdr);
        out["SIR"] = array_from_values(fm.sir);
        out["SAR"] = array_from_values(fm.sar);
        out["ISR"] = array_from_values(fm.isr);
        py::list valid;
        for (bool v : fm.valid) valid.append(v);
        out["valid"] = valid;
        const auto med = track_medians(fm);
        py::dict medians;
        for (const auto& [k, v] : med)
          medians[k.c_str()] = v ? py::cast(*v) : py::none();
        out["median"] = medians;
        return out;
      },
      py::arg("estimate"), py::arg("references"), py::arg("sample_rate") = 44100,
      py::arg("taps") = 512, py::arg("frame_seconds") = 1.0, py::arg("db_clip") = 30.0);

  m.def(
      "ideal_binary_mask",
      [](const std::vector<py::array_t<double, py::array::c_style>>& stem_mags,
         const py::array_t<double, py::array::c_style>& mix_mag,
         const py::array_t<double, py::array::c_style>& mix_phase,
         const FrameConfig& cfg, std::optional<int64_t> length) {
        std::vector<MagSpectrogram> stems;
        for (const auto& s : stem_mags)
          stems.push_back(MagSpectrogram{matrix_from_array(s), cfg});
        const auto clips =
            ideal_binary_mask(stems, MagSpectrogram{matrix_from_array(mix_mag), cfg},
                              PhaseSpectrogram{matrix_from_array(mix_phase), cfg}, length);
        py::list out;
        for (const auto& c : clips) out.append(array_from_clip(c));
        return out;
      },
      py::arg("stem_magnitudes"), py::arg("mix_magnitude"), py::arg("mix_phase"),
      py::arg("config") = FrameConfig{}, py::arg("length") = std::nullopt);

  m.def(
      "make_fixtures",
      [](const std::filesystem::path& out, int num_songs, double song_seconds,
         int sample_rate, uint64_t seed) {
        FixtureOptions opts;
        opts.num_songs = num_songs;
        opts.song_seconds = song_seconds;
        opts.sample_rate = sample_rate;
        opts.seed = seed;
        make_fixtures(out, opts);
      },
      py::arg("out"), py::arg("num_songs") = 8, py::arg("song_seconds") = 8.0,
      py::arg("sample_rate") = 44100, py::arg("seed") = 7);

  m.def("read_wav", [](const std::filesystem::path& p) {
    const AudioClip c = read_wav(p);
    return py::make_tuple(array_from_clip(c), c.sample_rate);
  });
  m.def(
      "write_wav",
      [](const std::filesystem::path& p,
         const py::array_t<double, py::array::c_style>& x, int sample_rate,
         const std::string& format) {
        WavFormat f = WavFormat::Float32;
        if (format == "int16") f = WavFormat::Int16;
        else if (format == "int24") f = WavFormat::Int24;
        else if (format != "float32") throw ConfigError("unknown WAV format " + format);
        write_wav(p, clip_from_array(x, sample_rate), f);
      },
      py::arg("path"), py::arg("samples"), py::arg("sample_rate") = 44100,
      py::arg("format") = "float32");
}
