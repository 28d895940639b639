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

#include "iass/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "iass/checkpoint.hpp"
#include "iass/serde.hpp"

namespace iass {

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw ConfigError("TrainConfig: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("TrainConfig: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("TrainConfig: max_epochs must be >= 1");
  if (patience_epochs < 1) throw ConfigError("TrainConfig: patience must be >= 1");
  if (steps_per_epoch < 1) throw ConfigError("TrainConfig: steps_per_epoch must be >= 1");
  if (min_improvement < 0.0) throw ConfigError("TrainConfig: min_improvement must be >= 0");
}

void adam_step(SeparatorParams& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
  state.step += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  for (const auto& name : params.trainable) {
    const auto git = grads.find(name);
    if (git == grads.end())
      throw ConfigError("adam_step: missing gradient for '" + name + "'");
    Tensor& p = params.at(name);
    const Tensor& g = git->second;
    if (!p.same_shape(g))
      throw ConfigError("adam_step: gradient shape mismatch for '" + name + "'");

    Tensor& m = state.m.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor::zeros(p.shape)).first->second;
    for (int64_t i = 0; i < p.numel(); ++i) {
      m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * g.data[i];
      v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * g.data[i] * g.data[i];
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      p.data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

LossBreakdown validate(SeparatorParams& params,
                       const std::vector<SpectroExample>& val_set, double alpha) {
  if (val_set.empty()) throw ConfigError("validate: empty validation set");
  LossBreakdown acc;
  for (const auto& ex : val_set) {
    MagSpectrogram mag;
    mag.values = ex.mix_mag;
    const ForwardOutput out = forward(params, mag, RunMode::Eval);
    const Eigen::MatrixXd pred = out.mask.cwiseProduct(ex.mix_mag);
    const LossBreakdown l =
        loss(pred, ex.target_mag, out.activation_logits, ex.labels, alpha);
    acc.total += l.total;
    acc.mse += l.mse;
    acc.bce += l.bce;
  }
  const double inv = 1.0 / static_cast<double>(val_set.size());
  acc.total *= inv;
  acc.mse *= inv;
  acc.bce *= inv;
  return acc;
}

namespace {

void append_history(const std::filesystem::path& csv, const EpochStats& row,
                    bool write_header) {
  std::ofstream f(csv, write_header ? std::ios::trunc : std::ios::app);
  if (!f) throw DataError("cannot write history: " + csv.string());
  if (write_header) f << "epoch,train_loss,val_loss,val_mse,val_bce\n";
  f.precision(12);
  f << row.epoch << "," << row.train_loss << "," << row.val_total << ","
    << row.val_mse << "," << row.val_bce << "\n";
}

}  // namespace

TrainResult train(const TrainConfig& cfg, SeparatorParams params,
                  const StemPools& pools, StemCache& cache,
                  const AugmentConfig& aug_cfg, const FrameConfig& frame_cfg,
                  const std::vector<SpectroExample>& val_set,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume) {
  cfg.validate();
  params.config.validate();
  if (pools.target_pool.empty() || pools.accomp_pool.empty())
    throw DataError("train: empty stem pool");
  if (val_set.empty()) throw DataError("train: empty validation set");

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path ckpt_path = out_dir / "best.ckpt";
  const std::filesystem::path history_csv = out_dir / "history.csv";
  const double alpha = params.config.alpha;

  AdamState adam;
  Rng rng(cfg.seed);
  int start_epoch = 0;
  if (resume) {
    CheckpointData data = load_checkpoint(*resume);
    params = std::move(data.params);
    adam = std::move(data.adam);
    rng.set_state(data.rng_state);
    start_epoch = data.epoch;
  }

  TrainResult result;
  result.checkpoint_path = ckpt_path;
  result.best_val = std::numeric_limits<double>::infinity();
  result.best_epoch = start_epoch;

  SeparatorParams best = params;
  AdamState best_adam = adam;
  std::array<uint64_t, 4> best_rng = rng.state();
  bool have_best = false;

  auto save_best = [&](int epoch, const std::string& note) {
    nlohmann::json meta{{"epoch", epoch},
                        {"best_epoch", result.best_epoch},
                        {"best_val_loss", result.best_val},
                        {"alpha", alpha},
                        {"frame_config", frame_cfg},
                        {"note", note}};
    save_checkpoint(ckpt_path, have_best ? best : params,
                    have_best ? best_adam : adam,
                    have_best ? best_rng : rng.state(),
                    have_best ? result.best_epoch : epoch, meta.dump(2));
  };

  for (int epoch = start_epoch + 1; epoch <= start_epoch + cfg.max_epochs; ++epoch) {
    double train_loss_acc = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      std::vector<SpectroExample> batch;
      batch.reserve(static_cast<size_t>(cfg.batch_size));
      for (int b = 0; b < cfg.batch_size; ++b)
        batch.push_back(to_spectro_example(
            sample_training_example(pools, cache, aug_cfg, frame_cfg, rng), frame_cfg));

      GradientResult gr;
      try {
        gr = gradients(params, batch, alpha);
      } catch (const NumericalError& e) {
        save_best(epoch, std::string("aborted: ") + e.what());
        throw NumericalError(std::string(e.what()) + " (epoch " +
                             std::to_string(epoch) + "; last good checkpoint at " +
                             ckpt_path.string() + ")");
      }
      train_loss_acc += gr.loss.total;
      adam_step(params, gr.grads, adam, cfg.learning_rate);
    }

    const LossBreakdown val = validate(params, val_set, alpha);
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = train_loss_acc / cfg.steps_per_epoch;
    stats.val_total = val.total;
    stats.val_mse = val.mse;
    stats.val_bce = val.bce;
    result.history.push_back(stats);
    append_history(history_csv, stats, epoch == start_epoch + 1 && !resume);
    std::cerr << "epoch " << epoch << " train " << stats.train_loss << " val "
              << stats.val_total << "\n";

    if (!std::isfinite(val.total)) {
      save_best(epoch, "aborted: non-finite validation loss");
      throw NumericalError("train: non-finite validation loss at epoch " +
                           std::to_string(epoch));
    }

    if (result.best_val - val.total >= cfg.min_improvement) {
      result.best_val = val.total;
      result.best_epoch = epoch;
      best = params;
      best_adam = adam;
      best_rng = rng.state();
      have_best = true;
    } else if (epoch - result.best_epoch >= cfg.patience_epochs) {
      break;  // early stopping
    }
  }

  save_best(result.history.empty() ? start_epoch : result.history.back().epoch,
            "completed");
  return result;
}

}  // namespace iass
