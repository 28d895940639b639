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

#include "iass/model.hpp"

#include <cmath>
#include <cstring>

#include "iass/autodiff.hpp"

namespace iass {

void ModelConfig::validate() const {
  if (num_blocks < 1) throw ConfigError("ModelConfig: num_blocks must be >= 1");
  if (static_cast<int>(channel_widths.size()) != num_blocks)
    throw ConfigError("ModelConfig: channel_widths must have num_blocks entries");
  for (int w : channel_widths)
    if (w < 1) throw ConfigError("ModelConfig: channel widths must be >= 1");
  if (convs_per_block != 3)
    throw ConfigError("ModelConfig: blocks are fixed at three conv layers");
  if (classifier_layers < num_blocks)
    throw ConfigError("ModelConfig: classifier_layers must be >= num_blocks");
  if (inner_kernel[0] < 1 || inner_kernel[1] < 1 || resample_kernel[0] < 1 ||
      resample_kernel[1] < 1)
    throw ConfigError("ModelConfig: kernel sizes must be positive");
  if (resample_stride[0] != 2 || resample_stride[1] != 2)
    throw ConfigError("ModelConfig: only (2,2) resampling stride is supported");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0))
    throw ConfigError("ModelConfig: leaky_slope must be in [0,1)");
  if (alpha < 0.0) throw ConfigError("ModelConfig: alpha must be >= 0");
  if (mask_nonlinearity != "sigmoid")
    throw ConfigError("ModelConfig: unsupported mask nonlinearity");
}

Tensor& SeparatorParams::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw NumericalError("unknown parameter tensor '" + name + "'");
  return it->second;
}

const Tensor& SeparatorParams::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw NumericalError("unknown parameter tensor '" + name + "'");
  return it->second;
}

uint64_t SeparatorParams::checksum() const {
  uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, t] : tensors) {
    mix(name.data(), name.size());
    mix(t.data.data(), t.data.size() * sizeof(double));
  }
  return h;
}

int64_t SeparatorParams::num_parameters() const {
  int64_t n = 0;
  for (const auto& name : trainable) n += at(name).numel();
  return n;
}

namespace {

// Per-layer channel plan derived from the config.
struct Plan {
  int nb;
  std::vector<int64_t> enc_in;    // residual-pair width per encoder block
  std::vector<int64_t> enc_out;   // width after the downsampling conv
  std::vector<int64_t> dec_in;    // residual-pair width per decoder block
  std::vector<int64_t> dec_out;   // width after the upsampling tconv
  std::vector<int64_t> cls_in;    // classifier layer inputs
  std::vector<int64_t> cls_out;
};

Plan make_plan(const ModelConfig& cfg) {
  Plan p;
  p.nb = cfg.num_blocks;
  const auto& c = cfg.channel_widths;
  for (int i = 0; i < p.nb; ++i) {
    p.enc_in.push_back(i == 0 ? 1 : c[static_cast<size_t>(i - 1)]);
    p.enc_out.push_back(c[static_cast<size_t>(i)]);
  }
  p.dec_in.resize(static_cast<size_t>(p.nb));
  p.dec_out.resize(static_cast<size_t>(p.nb));
  for (int i = p.nb - 1; i >= 0; --i) {
    p.dec_in[static_cast<size_t>(i)] =
        (i == p.nb - 1) ? c.back() : 2 * c[static_cast<size_t>(i)];
    p.dec_out[static_cast<size_t>(i)] = p.enc_in[static_cast<size_t>(i)];
  }
  int64_t ch = c.back();
  for (int l = 0; l < cfg.classifier_layers; ++l) {
    p.cls_in.push_back(ch);
    const int64_t out = (l == cfg.classifier_layers - 1)
                            ? 1
                            : std::max<int64_t>(c.back() >> (l + 1), 1);
    p.cls_out.push_back(out);
    ch = out;
  }
  return p;
}

void add_conv(SeparatorParams& p, const std::string& name, int64_t cout,
              int64_t cin, int kh, int kw, bool transposed) {
  // conv weights are [Cout,Cin,kh,kw]; transposed weights [Cin,Cout,kh,kw]
  Tensor w(transposed ? std::vector<int64_t>{cin, cout, kh, kw}
                      : std::vector<int64_t>{cout, cin, kh, kw});
  p.tensors.emplace(name + ".w", std::move(w));
  p.tensors.emplace(name + ".b", Tensor::zeros({cout}));
  p.trainable.push_back(name + ".w");
  p.trainable.push_back(name + ".b");
  p.init_record[name + ".w"] = "uniform(fan_in)";
  p.init_record[name + ".b"] = "zeros";
}

void add_bn(SeparatorParams& p, const std::string& name, int64_t ch) {
  p.tensors.emplace(name + ".gamma", Tensor::full({ch}, 1.0));
  p.tensors.emplace(name + ".beta", Tensor::zeros({ch}));
  p.tensors.emplace(name + ".running_mean", Tensor::zeros({ch}));
  p.tensors.emplace(name + ".running_var", Tensor::full({ch}, 1.0));
  p.trainable.push_back(name + ".gamma");
  p.trainable.push_back(name + ".beta");
  p.init_record[name + ".gamma"] = "ones";
  p.init_record[name + ".beta"] = "zeros";
}

// Graph-side view of the parameter store.
class Binder {
 public:
  Binder(Graph& g, SeparatorParams& params, bool requires_grad)
      : g_(g), params_(params), requires_grad_(requires_grad) {}

  Graph::NodeId operator()(const std::string& name) {
    auto it = ids_.find(name);
    if (it != ids_.end()) return it->second;
    const Graph::NodeId id = g_.input(params_.at(name), requires_grad_);
    ids_.emplace(name, id);
    return id;
  }

  const std::map<std::string, Graph::NodeId>& ids() const { return ids_; }

 private:
  Graph& g_;
  SeparatorParams& params_;
  bool requires_grad_;
  std::map<std::string, Graph::NodeId> ids_;
};

struct NetOutputs {
  Graph::NodeId mask;    // [B,1,F,T] after sigmoid and crop
  Graph::NodeId logits;  // [B,T]
};

// Assembles the padded U-net plus classifier head on the tape.
NetOutputs build_network(Graph& g, Binder& bind, SeparatorParams& params,
                         Graph::NodeId x, int64_t freq, int64_t frames,
                         bool train, bool update_running) {
  const ModelConfig& cfg = params.config;
  const Plan plan = make_plan(cfg);
  const double slope = cfg.leaky_slope;

  const int64_t mult = cfg.pad_multiple();
  const int64_t fp = (freq + mult - 1) / mult * mult;
  const int64_t tp = (frames + mult - 1) / mult * mult;

  auto bn = [&](Graph::NodeId h, const std::string& name) {
    const bool track = !train || update_running;
    Tensor* rm = track ? &params.at(name + ".running_mean") : nullptr;
    Tensor* rv = track ? &params.at(name + ".running_var") : nullptr;
    return g.batch_norm(h, bind(name + ".gamma"), bind(name + ".beta"), rm, rv, train);
  };
  auto residual_pair = [&](Graph::NodeId h, const std::string& prefix,
                           bool transposed) {
    auto layer = [&](Graph::NodeId in, const std::string& conv_name,
                     const std::string& bn_name) {
      Graph::NodeId c = transposed
                            ? g.tconv2d(in, bind(conv_name + ".w"), bind(conv_name + ".b"), 1, 1)
                            : g.conv2d(in, bind(conv_name + ".w"), bind(conv_name + ".b"), 1, 1);
      return g.leaky_relu(bn(c, bn_name), slope);
    };
    Graph::NodeId a = layer(h, prefix + ".conv1", prefix + ".bn1");
    Graph::NodeId b = layer(a, prefix + ".conv2", prefix + ".bn2");
    return g.add(h, b);  // skip two conv hops
  };

  Graph::NodeId h = g.pad_reflect_hw(x, fp, tp);
  std::vector<Graph::NodeId> skips(static_cast<size_t>(plan.nb));
  for (int i = 0; i < plan.nb; ++i) {
    const std::string prefix = "enc" + std::to_string(i);
    Graph::NodeId r = residual_pair(h, prefix, false);
    skips[static_cast<size_t>(i)] = r;
    h = g.conv2d(r, bind(prefix + ".down.w"), bind(prefix + ".down.b"),
                 cfg.resample_stride[0], cfg.resample_stride[1]);
  }
  const Graph::NodeId latent = h;

  for (int i = plan.nb - 1; i >= 0; --i) {
    const std::string prefix = "dec" + std::to_string(i);
    Graph::NodeId r = residual_pair(h, prefix, true);
    h = g.tconv2d(r, bind(prefix + ".up.w"), bind(prefix + ".up.b"),
                  cfg.resample_stride[0], cfg.resample_stride[1]);
    if (i > 0) h = g.concat_channels(h, skips[static_cast<size_t>(i)]);
  }
  NetOutputs out;
  out.mask = g.sigmoid(g.crop_hw(h, freq, frames));

  Graph::NodeId c = latent;
  for (int l = 0; l < cfg.classifier_layers; ++l) {
    const std::string prefix = "cls.conv" + std::to_string(l);
    const int stride_t = l < plan.nb ? 2 : 1;
    c = g.tconv2d(c, bind(prefix + ".w"), bind(prefix + ".b"), 1, stride_t);
    if (l < cfg.classifier_layers - 1)
      c = g.leaky_relu(bn(c, "cls.bn" + std::to_string(l)), slope);
  }
  // [B,1,fp/2^nb,tp] -> per-frame logits
  const Tensor& cv = g.value(c);
  out.logits = g.mean_over_freq(g.crop_hw(c, cv.dim(2), frames));
  return out;
}

Tensor batch_to_tensor(const std::vector<const Eigen::MatrixXd*>& mats) {
  const int64_t bins = mats.front()->rows();
  const int64_t frames = mats.front()->cols();
  Tensor t({static_cast<int64_t>(mats.size()), 1, bins, frames});
  double* dst = t.ptr();
  for (const auto* m : mats) {
    for (int64_t f = 0; f < bins; ++f)
      for (int64_t j = 0; j < frames; ++j) *dst++ = (*m)(f, j);
  }
  return t;
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string(what) + ": non-finite input");
}

}  // namespace

SeparatorParams init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  SeparatorParams p;
  p.config = cfg;
  const Plan plan = make_plan(cfg);
  const int kh = cfg.inner_kernel[0], kw = cfg.inner_kernel[1];
  const int rkh = cfg.resample_kernel[0], rkw = cfg.resample_kernel[1];

  for (int i = 0; i < plan.nb; ++i) {
    const std::string prefix = "enc" + std::to_string(i);
    const int64_t ch = plan.enc_in[static_cast<size_t>(i)];
    add_conv(p, prefix + ".conv1", ch, ch, kh, kw, false);
    add_bn(p, prefix + ".bn1", ch);
    add_conv(p, prefix + ".conv2", ch, ch, kh, kw, false);
    add_bn(p, prefix + ".bn2", ch);
    add_conv(p, prefix + ".down", plan.enc_out[static_cast<size_t>(i)], ch, rkh, rkw, false);
  }
  for (int i = plan.nb - 1; i >= 0; --i) {
    const std::string prefix = "dec" + std::to_string(i);
    const int64_t ch = plan.dec_in[static_cast<size_t>(i)];
    add_conv(p, prefix + ".conv1", ch, ch, kh, kw, true);
    add_bn(p, prefix + ".bn1", ch);
    add_conv(p, prefix + ".conv2", ch, ch, kh, kw, true);
    add_bn(p, prefix + ".bn2", ch);
    add_conv(p, prefix + ".up", plan.dec_out[static_cast<size_t>(i)], ch, rkh, rkw, true);
  }
  for (int l = 0; l < cfg.classifier_layers; ++l) {
    add_conv(p, "cls.conv" + std::to_string(l), plan.cls_out[static_cast<size_t>(l)],
             plan.cls_in[static_cast<size_t>(l)], kh, kw, true);
    if (l < cfg.classifier_layers - 1)
      add_bn(p, "cls.bn" + std::to_string(l), plan.cls_out[static_cast<size_t>(l)]);
  }

  // fan-in-scaled uniform fill, in declaration order for determinism
  for (const auto& name : p.trainable) {
    if (name.size() < 2 || name.substr(name.size() - 2) != ".w") continue;
    Tensor& w = p.at(name);
    const bool transposed = name.rfind("dec", 0) == 0 || name.rfind("cls.", 0) == 0;
    const int64_t fan_in = (transposed ? w.dim(0) : w.dim(1)) * w.dim(2) * w.dim(3);
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    for (double& v : w.data) v = rng.uniform(-bound, bound);
  }
  return p;
}

ForwardOutput forward(SeparatorParams& params, const MagSpectrogram& mix_mag,
                      RunMode mode) {
  params.config.validate();
  check_finite(mix_mag.values, "forward");
  const int64_t bins = mix_mag.bins(), frames = mix_mag.frames();
  if (frames < 1) throw ConfigError("forward: spectrogram has no frames");

  Graph g;
  Binder bind(g, params, /*requires_grad=*/false);
  std::vector<const Eigen::MatrixXd*> mats{&mix_mag.values};
  Graph::NodeId x = g.input(batch_to_tensor(mats), false);
  const bool train = mode == RunMode::Train;
  NetOutputs net = build_network(g, bind, params, x, bins, frames, train, train);

  ForwardOutput out;
  const Tensor& mask = g.value(net.mask);
  out.mask.resize(bins, frames);
  for (int64_t f = 0; f < bins; ++f)
    for (int64_t t = 0; t < frames; ++t)
      out.mask(f, t) = mask.data[static_cast<size_t>(f * frames + t)];
  const Tensor& logits = g.value(net.logits);
  out.activation_logits.assign(logits.data.begin(), logits.data.end());
  return out;
}

MagSpectrogram predicted_spectrogram(const Eigen::MatrixXd& mask,
                                     const MagSpectrogram& mix_mag) {
  if (mask.rows() != mix_mag.values.rows() || mask.cols() != mix_mag.values.cols())
    throw ConfigError("predicted_spectrogram: shape mismatch");
  MagSpectrogram out;
  out.config = mix_mag.config;
  out.values = mask.cwiseProduct(mix_mag.values);
  return out;
}

LossBreakdown loss(const Eigen::MatrixXd& pred_mag,
                   const Eigen::MatrixXd& target_mag,
                   const std::vector<double>& activation_logits,
                   const std::vector<double>& labels, double alpha) {
  if (alpha < 0.0) throw ConfigError("loss: alpha must be >= 0");
  if (pred_mag.rows() != target_mag.rows() || pred_mag.cols() != target_mag.cols())
    throw ConfigError("loss: spectrogram shape mismatch");
  if (activation_logits.size() != labels.size())
    throw ConfigError("loss: logits/labels length mismatch");

  LossBreakdown out;
  out.mse = (pred_mag - target_mag).squaredNorm() /
            static_cast<double>(pred_mag.size());
  double acc = 0.0;
  for (size_t i = 0; i < activation_logits.size(); ++i) {
    const double z = activation_logits[i];
    acc += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - labels[i] * z;
  }
  out.bce = activation_logits.empty() ? 0.0
                                      : acc / static_cast<double>(activation_logits.size());
  out.total = alpha == 0.0 ? out.mse : out.mse + alpha * out.bce;
  return out;
}

GradientResult gradients(SeparatorParams& params,
                         const std::vector<SpectroExample>& batch, double alpha,
                         bool update_running) {
  params.config.validate();
  if (alpha < 0.0) throw ConfigError("gradients: alpha must be >= 0");
  if (batch.empty()) throw ConfigError("gradients: empty batch");
  const int64_t bins = batch.front().mix_mag.rows();
  const int64_t frames = batch.front().mix_mag.cols();
  for (const auto& ex : batch) {
    check_finite(ex.mix_mag, "gradients");
    check_finite(ex.target_mag, "gradients");
    if (ex.mix_mag.rows() != bins || ex.mix_mag.cols() != frames ||
        ex.target_mag.rows() != bins || ex.target_mag.cols() != frames ||
        static_cast<int64_t>(ex.labels.size()) != frames)
      throw ConfigError("gradients: inconsistent example shapes in batch");
  }

  Graph g;
  Binder bind(g, params, /*requires_grad=*/true);
  std::vector<const Eigen::MatrixXd*> mix_mats, tgt_mats;
  for (const auto& ex : batch) {
    mix_mats.push_back(&ex.mix_mag);
    tgt_mats.push_back(&ex.target_mag);
  }
  Graph::NodeId mix = g.input(batch_to_tensor(mix_mats), false);
  Graph::NodeId target = g.input(batch_to_tensor(tgt_mats), false);
  Tensor label_t({static_cast<int64_t>(batch.size()), frames});
  {
    double* dst = label_t.ptr();
    for (const auto& ex : batch) dst = std::copy(ex.labels.begin(), ex.labels.end(), dst);
  }
  Graph::NodeId labels = g.input(std::move(label_t), false);

  NetOutputs net = build_network(g, bind, params, mix, bins, frames,
                                 /*train=*/true, update_running);
  Graph::NodeId pred = g.mul(net.mask, mix);
  Graph::NodeId mse_node = g.mse(pred, target);
  Graph::NodeId bce_node = g.bce_with_logits(net.logits, labels);
  // alpha == 0 keeps the classifier outside the objective entirely
  Graph::NodeId total = alpha == 0.0 ? mse_node : g.add_scaled(mse_node, bce_node, alpha);

  GradientResult result;
  result.loss.mse = g.value(mse_node).data[0];
  result.loss.bce = g.value(bce_node).data[0];
  result.loss.total = g.value(total).data[0];
  if (!std::isfinite(result.loss.total))
    throw NumericalError("gradients: non-finite loss");

  g.backward(total);
  for (const auto& name : params.trainable) {
    const Graph::NodeId id = bind.ids().at(name);
    const Tensor& gv = g.grad(id);
    Tensor grad = gv.data.empty() ? Tensor::zeros(params.at(name).shape) : gv;
    for (double v : grad.data)
      if (!std::isfinite(v))
        throw NumericalError("gradients: non-finite gradient in tensor '" + name + "'");
    result.grads.emplace(name, std::move(grad));
  }
  return result;
}

}  // namespace iass
