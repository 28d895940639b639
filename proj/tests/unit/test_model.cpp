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

#include "iass/autodiff.hpp"
#include "iass/model.hpp"

using namespace iass;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.num_blocks = 1;
  cfg.channel_widths = {2};
  cfg.classifier_layers = 2;
  return cfg;
}

MagSpectrogram random_mag(int64_t bins, int64_t frames, uint64_t seed,
                          const FrameConfig& fc = FrameConfig{}) {
  Rng rng(seed);
  MagSpectrogram m;
  m.config = fc;
  m.values.resize(bins, frames);
  for (int64_t b = 0; b < bins; ++b)
    for (int64_t t = 0; t < frames; ++t) m.values(b, t) = rng.uniform();
  return m;
}

SpectroExample random_example(int64_t bins, int64_t frames, uint64_t seed) {
  Rng rng(seed);
  SpectroExample ex;
  ex.mix_mag.resize(bins, frames);
  ex.target_mag.resize(bins, frames);
  for (int64_t b = 0; b < bins; ++b)
    for (int64_t t = 0; t < frames; ++t) {
      ex.mix_mag(b, t) = rng.uniform();
      ex.target_mag(b, t) = 0.5 * ex.mix_mag(b, t) * rng.uniform();
    }
  ex.labels.resize(static_cast<size_t>(frames));
  for (auto& l : ex.labels) l = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return ex;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("initialization is deterministic and seed-sensitive") {
  const ModelConfig cfg = tiny_config();
  Rng a(5), b(5), c(6);
  const SeparatorParams pa = init_model(cfg, a);
  const SeparatorParams pb = init_model(cfg, b);
  const SeparatorParams pc = init_model(cfg, c);
  CHECK(pa.checksum() == pb.checksum());
  CHECK(pa.checksum() != pc.checksum());
  CHECK(pa.config.leaky_slope == 0.2);  // config echo rides along
  CHECK(pa.init_record.at("enc0.conv1.w") == "uniform(fan_in)");
}

TEST_CASE("four blocks have strictly more parameters than three") {
  ModelConfig three;
  three.num_blocks = 3;
  three.channel_widths = {8, 12, 16};
  ModelConfig four = three;
  four.num_blocks = 4;
  four.channel_widths = {8, 12, 16, 24};
  Rng rng(1);
  const auto p3 = init_model(three, rng);
  const auto p4 = init_model(four, rng);
  CHECK(p4.num_parameters() > p3.num_parameters());
}

TEST_CASE("inconsistent configs are rejected") {
  ModelConfig cfg = tiny_config();
  cfg.channel_widths = {2, 4};  // width count != blocks
  Rng rng(1);
  CHECK_THROWS_AS((void)init_model(cfg, rng), ConfigError);
  cfg = tiny_config();
  cfg.classifier_layers = 0;
  CHECK_THROWS_AS((void)init_model(cfg, rng), ConfigError);
  cfg = tiny_config();
  cfg.alpha = -0.1;
  CHECK_THROWS_AS((void)init_model(cfg, rng), ConfigError);
}

TEST_CASE("forward: shapes, bounds, determinism") {
  Rng rng(2);
  SeparatorParams params = init_model(tiny_config(), rng);
  for (int64_t frames : {int64_t{259}, int64_t{260}, int64_t{263}}) {
    const MagSpectrogram mag = random_mag(33, frames, 100 + static_cast<uint64_t>(frames));
    const ForwardOutput out = forward(params, mag, RunMode::Eval);
    CHECK(out.mask.rows() == 33);
    CHECK(out.mask.cols() == frames);
    CHECK(static_cast<int64_t>(out.activation_logits.size()) == frames);
    CHECK(out.mask.minCoeff() > 0.0);
    CHECK(out.mask.maxCoeff() < 1.0);
  }
  const MagSpectrogram mag = random_mag(33, 64, 3);
  const ForwardOutput a = forward(params, mag, RunMode::Eval);
  const ForwardOutput b = forward(params, mag, RunMode::Eval);
  CHECK(a.mask == b.mask);
  CHECK(a.activation_logits == b.activation_logits);
}

TEST_CASE("forward: zero input stays finite, non-finite input is rejected") {
  Rng rng(4);
  SeparatorParams params = init_model(tiny_config(), rng);
  MagSpectrogram zero = random_mag(17, 24, 5);
  zero.values.setZero();
  const ForwardOutput out = forward(params, zero, RunMode::Eval);
  CHECK(out.mask.allFinite());
  for (double v : out.activation_logits) CHECK(std::isfinite(v));

  MagSpectrogram bad = random_mag(17, 24, 6);
  bad.values(3, 3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS((void)forward(params, bad, RunMode::Eval), NumericalError);
}

TEST_CASE("zeroing the residual branches reduces the net to its resamplers") {
  Rng rng(7);
  SeparatorParams params = init_model(tiny_config(), rng);
  for (const auto& name :
       {"enc0.conv1", "enc0.conv2", "dec0.conv1", "dec0.conv2"}) {
    auto& w = params.at(std::string(name) + ".w");
    std::fill(w.data.begin(), w.data.end(), 0.0);
    auto& b = params.at(std::string(name) + ".b");
    std::fill(b.data.begin(), b.data.end(), 0.0);
  }

  const int64_t bins = 12, frames = 10;
  const MagSpectrogram mag = random_mag(bins, frames, 8);
  const ForwardOutput out = forward(params, mag, RunMode::Eval);

  // oracle: pad -> down-conv -> up-tconv -> crop -> sigmoid, nothing else
  Graph g;
  Tensor x({1, 1, bins, frames});
  for (int64_t i = 0; i < bins; ++i)
    for (int64_t j = 0; j < frames; ++j)
      x.data[static_cast<size_t>(i * frames + j)] = mag.values(i, j);
  auto h = g.pad_reflect_hw(g.input(std::move(x)), 12, 10);
  h = g.conv2d(h, g.input(params.at("enc0.down.w")), g.input(params.at("enc0.down.b")),
               2, 2);
  h = g.tconv2d(h, g.input(params.at("dec0.up.w")), g.input(params.at("dec0.up.b")), 2, 2);
  h = g.sigmoid(g.crop_hw(h, bins, frames));
  const Tensor& expect = g.value(h);
  for (int64_t i = 0; i < bins; ++i)
    for (int64_t j = 0; j < frames; ++j)
      CHECK(out.mask(i, j) ==
            doctest::Approx(expect.data[static_cast<size_t>(i * frames + j)])
                .epsilon(1e-12));
}

TEST_CASE("predicted spectrogram is the elementwise product") {
  const MagSpectrogram mix = random_mag(9, 7, 11);
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(9, 7);
  CHECK(predicted_spectrogram(ones, mix).values == mix.values);
  Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(9, 7);
  CHECK(predicted_spectrogram(zeros, mix).values.cwiseAbs().maxCoeff() == 0.0);
  Eigen::MatrixXd halves = Eigen::MatrixXd::Constant(9, 7, 0.5);
  CHECK(predicted_spectrogram(halves, mix).values == (0.5 * mix.values).eval());
  Eigen::MatrixXd wrong = Eigen::MatrixXd::Ones(9, 8);
  CHECK_THROWS_AS((void)predicted_spectrogram(wrong, mix), ConfigError);
}

TEST_CASE("loss contract") {
  const int64_t bins = 6, frames = 5;
  Eigen::MatrixXd target = Eigen::MatrixXd::Random(bins, frames).cwiseAbs();

  SUBCASE("perfect prediction vanishes") {
    std::vector<double> logits(static_cast<size_t>(frames)), labels(static_cast<size_t>(frames));
    for (int64_t i = 0; i < frames; ++i) {
      labels[static_cast<size_t>(i)] = i % 2 == 0 ? 1.0 : 0.0;
      logits[static_cast<size_t>(i)] = labels[static_cast<size_t>(i)] > 0.5 ? 20.0 : -20.0;
    }
    const LossBreakdown l = loss(target, target, logits, labels, 1.0);
    CHECK(l.total <= 1e-8);
  }
  SUBCASE("alpha zero is bitwise the mse term") {
    std::vector<double> logits(static_cast<size_t>(frames), 0.3);
    std::vector<double> labels(static_cast<size_t>(frames), 1.0);
    Eigen::MatrixXd pred = target;
    pred.array() += 0.123;
    const LossBreakdown l = loss(pred, target, logits, labels, 0.0);
    CHECK(l.total == l.mse);
    CHECK(l.bce > 0.0);
  }
  SUBCASE("closed form: unit error plus ln 2") {
    Eigen::MatrixXd pred = target;
    pred.array() += 1.0;
    std::vector<double> logits(static_cast<size_t>(frames), 0.0);
    std::vector<double> labels(static_cast<size_t>(frames), 1.0);
    const LossBreakdown l = loss(pred, target, logits, labels, 1.0);
    CHECK(std::abs(l.total - (1.0 + std::log(2.0))) <= 1e-12);
  }
  SUBCASE("negative alpha is rejected") {
    CHECK_THROWS_AS((void)loss(target, target, {}, {}, -1.0), ConfigError);
  }
}

TEST_CASE("gradients match central finite differences on a tiny model") {
  Rng rng(21);
  SeparatorParams params = init_model(tiny_config(), rng);
  const std::vector<SpectroExample> batch{random_example(9, 12, 31),
                                          random_example(9, 12, 32)};
  const double alpha = 0.25;
  const GradientResult gr = gradients(params, batch, alpha, /*update_running=*/false);

  const double h = 1e-4;
  Rng pick(22);
  int checked = 0;
  for (int trial = 0; trial < 12; ++trial) {
    const auto& name = params.trainable[static_cast<size_t>(
        pick.uniform_int(0, static_cast<int64_t>(params.trainable.size()) - 1))];
    Tensor& t = params.at(name);
    const int64_t idx = pick.uniform_int(0, t.numel() - 1);

    const double saved = t.data[idx];
    t.data[idx] = saved + h;
    const double up = gradients(params, batch, alpha, false).loss.total;
    t.data[idx] = saved - h;
    const double down = gradients(params, batch, alpha, false).loss.total;
    t.data[idx] = saved;

    const double fd = (up - down) / (2.0 * h);
    const double an = gr.grads.at(name).data[idx];
    if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
    INFO(name, "[", idx, "] fd ", fd, " analytic ", an);
    CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8}) <= 1e-3);
    ++checked;
  }
  CHECK(checked >= 6);
}

TEST_CASE("alpha zero leaves the classifier head untouched") {
  Rng rng(23);
  SeparatorParams params = init_model(tiny_config(), rng);
  const std::vector<SpectroExample> batch{random_example(9, 12, 41)};
  const GradientResult gr = gradients(params, batch, 0.0, false);
  for (const auto& [name, grad] : gr.grads) {
    if (name.rfind("cls.", 0) != 0) continue;
    for (double v : grad.data) CHECK(v == 0.0);
  }
  // and some non-classifier gradient is nonzero
  double total = 0.0;
  for (double v : gr.grads.at("enc0.down.w").data) total += std::abs(v);
  CHECK(total > 0.0);
}

TEST_CASE("duplicating an example does not change the mean gradient") {
  Rng rng(24);
  SeparatorParams params = init_model(tiny_config(), rng);
  const SpectroExample ex = random_example(9, 12, 51);
  const GradientResult single = gradients(params, {ex}, 0.1, false);
  const GradientResult doubled = gradients(params, {ex, ex}, 0.1, false);
  for (const auto& [name, grad] : single.grads) {
    const Tensor& other = doubled.grads.at(name);
    for (int64_t i = 0; i < grad.numel(); ++i)
      CHECK(grad.data[i] == doctest::Approx(other.data[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("mask stays strictly inside (0,1) for random params and inputs") {
  for (uint64_t seed = 60; seed < 64; ++seed) {
    Rng rng(seed);
    SeparatorParams params = init_model(tiny_config(), rng);
    const MagSpectrogram mag = random_mag(21, 18, seed * 3 + 1);
    const ForwardOutput out = forward(params, mag, RunMode::Eval);
    CHECK(out.mask.minCoeff() > 0.0);
    CHECK(out.mask.maxCoeff() < 1.0);
  }
}

}  // TEST_SUITE
