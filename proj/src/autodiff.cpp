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

#include "iass/autodiff.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "iass/errors.hpp"

namespace iass {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;

int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

// "Same"-style strided convolution geometry. Output length is ceil(n/s);
// total padding max((out-1)*s + k - n, 0), split front-light.
struct ConvGeom {
  int64_t in_h, in_w, out_h, out_w;
  int kh, kw, sh, sw;
  int64_t pad_top, pad_left;
};

ConvGeom make_geom(int64_t h, int64_t w, int kh, int kw, int sh, int sw) {
  ConvGeom g;
  g.in_h = h;
  g.in_w = w;
  g.kh = kh;
  g.kw = kw;
  g.sh = sh;
  g.sw = sw;
  g.out_h = (h + sh - 1) / sh;
  g.out_w = (w + sw - 1) / sw;
  const int64_t pad_h = std::max<int64_t>((g.out_h - 1) * sh + kh - h, 0);
  const int64_t pad_w = std::max<int64_t>((g.out_w - 1) * sw + kw - w, 0);
  g.pad_top = pad_h / 2;
  g.pad_left = pad_w / 2;
  return g;
}

// Patch matrix of one [C,H,W] item: rows (c,ki,kj), columns output positions.
void im2col(const double* x, int64_t channels, const ConvGeom& g, ColMat* m) {
  const int64_t positions = g.out_h * g.out_w;
  m->resize(channels * g.kh * g.kw, positions);
  for (int64_t oh = 0; oh < g.out_h; ++oh) {
    for (int64_t ow = 0; ow < g.out_w; ++ow) {
      const int64_t p = oh * g.out_w + ow;
      double* col = m->data() + p * m->rows();
      int64_t r = 0;
      for (int64_t c = 0; c < channels; ++c) {
        const double* plane = x + c * g.in_h * g.in_w;
        for (int ki = 0; ki < g.kh; ++ki) {
          const int64_t ih = oh * g.sh + ki - g.pad_top;
          for (int kj = 0; kj < g.kw; ++kj, ++r) {
            const int64_t iw = ow * g.sw + kj - g.pad_left;
            col[r] = (ih >= 0 && ih < g.in_h && iw >= 0 && iw < g.in_w)
                         ? plane[ih * g.in_w + iw]
                         : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patch columns back into a [C,H,W] buffer.
void col2im_add(const ColMat& m, int64_t channels, const ConvGeom& g, double* x) {
  for (int64_t oh = 0; oh < g.out_h; ++oh) {
    for (int64_t ow = 0; ow < g.out_w; ++ow) {
      const int64_t p = oh * g.out_w + ow;
      const double* col = m.data() + p * m.rows();
      int64_t r = 0;
      for (int64_t c = 0; c < channels; ++c) {
        double* plane = x + c * g.in_h * g.in_w;
        for (int ki = 0; ki < g.kh; ++ki) {
          const int64_t ih = oh * g.sh + ki - g.pad_top;
          for (int kj = 0; kj < g.kw; ++kj, ++r) {
            const int64_t iw = ow * g.sw + kj - g.pad_left;
            if (ih >= 0 && ih < g.in_h && iw >= 0 && iw < g.in_w)
              plane[ih * g.in_w + iw] += col[r];
          }
        }
      }
    }
  }
}

void check_4d(const Tensor& t, const char* what) {
  if (t.rank() != 4)
    throw NumericalError(std::string(what) + ": expected a 4-d tensor, got " +
                         t.shape_str());
}

}  // namespace

Graph::NodeId Graph::emplace(Tensor value, bool requires_grad,
                             std::function<void(Graph&, NodeId)> backward_fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backward_fn = std::move(backward_fn);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Graph::NodeId Graph::input(Tensor value, bool requires_grad) {
  return emplace(std::move(value), requires_grad, nullptr);
}

Tensor& Graph::grad_buffer(NodeId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (!n.grad_ready) {
    n.grad = Tensor::zeros(n.value.shape);
    n.grad_ready = true;
  }
  return n.grad;
}

void Graph::backward(NodeId loss) {
  Node& top = nodes_[static_cast<size_t>(loss)];
  if (top.value.numel() != 1)
    throw NumericalError("backward: loss node must be scalar");
  grad_buffer(loss).data[0] = 1.0;
  for (int64_t id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad_ready && n.backward_fn) n.backward_fn(*this, static_cast<NodeId>(id));
  }
}

Graph::NodeId Graph::add(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb)) throw NumericalError("add: shape mismatch");
  Tensor out = va;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += vb.data[i];
  const bool rg = needs_grad(a) || needs_grad(b);
  return emplace(std::move(out), rg, [a, b](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    for (NodeId p : {a, b}) {
      if (!g.needs_grad(p)) continue;
      Tensor& gp = g.grad_buffer(p);
      for (int64_t i = 0; i < d.numel(); ++i) gp.data[i] += d.data[i];
    }
  });
}

Graph::NodeId Graph::mul(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (!va.same_shape(vb)) throw NumericalError("mul: shape mismatch");
  Tensor out = va;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= vb.data[i];
  const bool rg = needs_grad(a) || needs_grad(b);
  return emplace(std::move(out), rg, [a, b](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    if (g.needs_grad(a)) {
      const Tensor& vb = g.value(b);
      Tensor& ga = g.grad_buffer(a);
      for (int64_t i = 0; i < d.numel(); ++i) ga.data[i] += d.data[i] * vb.data[i];
    }
    if (g.needs_grad(b)) {
      const Tensor& va = g.value(a);
      Tensor& gb = g.grad_buffer(b);
      for (int64_t i = 0; i < d.numel(); ++i) gb.data[i] += d.data[i] * va.data[i];
    }
  });
}

Graph::NodeId Graph::leaky_relu(NodeId x, double slope) {
  const Tensor& vx = value(x);
  Tensor out = vx;
  for (double& v : out.data)
    if (v < 0.0) v *= slope;
  return emplace(std::move(out), needs_grad(x), [x, slope](Graph& g, NodeId self) {
    if (!g.needs_grad(x)) return;
    const Tensor& d = g.grad(self);
    const Tensor& vx = g.value(x);
    Tensor& gx = g.grad_buffer(x);
    for (int64_t i = 0; i < d.numel(); ++i)
      gx.data[i] += d.data[i] * (vx.data[i] >= 0.0 ? 1.0 : slope);
  });
}

Graph::NodeId Graph::sigmoid(NodeId x) {
  const Tensor& vx = value(x);
  Tensor out = vx;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return emplace(std::move(out), needs_grad(x), [x](Graph& g, NodeId self) {
    if (!g.needs_grad(x)) return;
    const Tensor& d = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& gx = g.grad_buffer(x);
    for (int64_t i = 0; i < d.numel(); ++i)
      gx.data[i] += d.data[i] * y.data[i] * (1.0 - y.data[i]);
  });
}

Graph::NodeId Graph::concat_channels(NodeId a, NodeId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_4d(va, "concat_channels");
  check_4d(vb, "concat_channels");
  if (va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2) || va.dim(3) != vb.dim(3))
    throw NumericalError("concat_channels: shape mismatch");
  const int64_t batch = va.dim(0), ca = va.dim(1), cb = vb.dim(1);
  const int64_t plane = va.dim(2) * va.dim(3);
  Tensor out({batch, ca + cb, va.dim(2), va.dim(3)});
  for (int64_t n = 0; n < batch; ++n) {
    std::copy_n(va.ptr() + n * ca * plane, ca * plane,
                out.ptr() + n * (ca + cb) * plane);
    std::copy_n(vb.ptr() + n * cb * plane, cb * plane,
                out.ptr() + n * (ca + cb) * plane + ca * plane);
  }
  const bool rg = needs_grad(a) || needs_grad(b);
  return emplace(std::move(out), rg, [a, b, batch, ca, cb, plane](Graph& g, NodeId self) {
    const Tensor& d = g.grad(self);
    if (g.needs_grad(a)) {
      Tensor& ga = g.grad_buffer(a);
      for (int64_t n = 0; n < batch; ++n) {
        const double* src = d.ptr() + n * (ca + cb) * plane;
        double* dst = ga.ptr() + n * ca * plane;
        for (int64_t i = 0; i < ca * plane; ++i) dst[i] += src[i];
      }
    }
    if (g.needs_grad(b)) {
      Tensor& gb = g.grad_buffer(b);
      for (int64_t n = 0; n < batch; ++n) {
        const double* src = d.ptr() + n * (ca + cb) * plane + ca * plane;
        double* dst = gb.ptr() + n * cb * plane;
        for (int64_t i = 0; i < cb * plane; ++i) dst[i] += src[i];
      }
    }
  });
}

Graph::NodeId Graph::pad_reflect_hw(NodeId x, int64_t h, int64_t w) {
  const Tensor& vx = value(x);
  check_4d(vx, "pad_reflect_hw");
  const int64_t batch = vx.dim(0), ch = vx.dim(1), ih = vx.dim(2), iw = vx.dim(3);
  if (h < ih || w < iw) throw NumericalError("pad_reflect_hw: target smaller than input");
  if (h == ih && w == iw) return x;
  Tensor out({batch, ch, h, w});
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t c = 0; c < ch; ++c) {
      const double* src = vx.ptr() + (n * ch + c) * ih * iw;
      double* dst = out.ptr() + (n * ch + c) * h * w;
      for (int64_t i = 0; i < h; ++i) {
        const int64_t si = i < ih ? i : reflect_index(i, ih);
        for (int64_t j = 0; j < w; ++j) {
          const int64_t sj = j < iw ? j : reflect_index(j, iw);
          dst[i * w + j] = src[si * iw + sj];
        }
      }
    }
  return emplace(std::move(out), needs_grad(x),
                 [x, batch, ch, ih, iw, h, w](Graph& g, NodeId self) {
                   if (!g.needs_grad(x)) return;
                   const Tensor& d = g.grad(self);
                   Tensor& gx = g.grad_buffer(x);
                   for (int64_t n = 0; n < batch; ++n)
                     for (int64_t c = 0; c < ch; ++c) {
                       const double* src = d.ptr() + (n * ch + c) * h * w;
                       double* dst = gx.ptr() + (n * ch + c) * ih * iw;
                       for (int64_t i = 0; i < h; ++i) {
                         const int64_t si = i < ih ? i : reflect_index(i, ih);
                         for (int64_t j = 0; j < w; ++j) {
                           const int64_t sj = j < iw ? j : reflect_index(j, iw);
                           dst[si * iw + sj] += src[i * w + j];
                         }
                       }
                     }
                 });
}

Graph::NodeId Graph::crop_hw(NodeId x, int64_t h, int64_t w) {
  const Tensor& vx = value(x);
  check_4d(vx, "crop_hw");
  const int64_t batch = vx.dim(0), ch = vx.dim(1), ih = vx.dim(2), iw = vx.dim(3);
  if (h > ih || w > iw) throw NumericalError("crop_hw: target larger than input");
  if (h == ih && w == iw) return x;
  Tensor out({batch, ch, h, w});
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t c = 0; c < ch; ++c) {
      const double* src = vx.ptr() + (n * ch + c) * ih * iw;
      double* dst = out.ptr() + (n * ch + c) * h * w;
      for (int64_t i = 0; i < h; ++i)
        std::copy_n(src + i * iw, w, dst + i * w);
    }
  return emplace(std::move(out), needs_grad(x),
                 [x, batch, ch, ih, iw, h, w](Graph& g, NodeId self) {
                   if (!g.needs_grad(x)) return;
                   const Tensor& d = g.grad(self);
                   Tensor& gx = g.grad_buffer(x);
                   for (int64_t n = 0; n < batch; ++n)
                     for (int64_t c = 0; c < ch; ++c) {
                       const double* src = d.ptr() + (n * ch + c) * h * w;
                       double* dst = gx.ptr() + (n * ch + c) * ih * iw;
                       for (int64_t i = 0; i < h; ++i)
                         for (int64_t j = 0; j < w; ++j) dst[i * iw + j] += src[i * w + j];
                     }
                 });
}

Graph::NodeId Graph::mean_over_freq(NodeId x) {
  const Tensor& vx = value(x);
  check_4d(vx, "mean_over_freq");
  if (vx.dim(1) != 1) throw NumericalError("mean_over_freq: expected one channel");
  const int64_t batch = vx.dim(0), f = vx.dim(2), t = vx.dim(3);
  Tensor out({batch, t});
  const double inv_f = 1.0 / static_cast<double>(f);
  for (int64_t n = 0; n < batch; ++n) {
    const double* src = vx.ptr() + n * f * t;
    double* dst = out.ptr() + n * t;
    for (int64_t j = 0; j < t; ++j) {
      double acc = 0.0;
      for (int64_t i = 0; i < f; ++i) acc += src[i * t + j];
      dst[j] = acc * inv_f;
    }
  }
  return emplace(std::move(out), needs_grad(x),
                 [x, batch, f, t, inv_f](Graph& g, NodeId self) {
                   if (!g.needs_grad(x)) return;
                   const Tensor& d = g.grad(self);
                   Tensor& gx = g.grad_buffer(x);
                   for (int64_t n = 0; n < batch; ++n) {
                     const double* src = d.ptr() + n * t;
                     double* dst = gx.ptr() + n * f * t;
                     for (int64_t i = 0; i < f; ++i)
                       for (int64_t j = 0; j < t; ++j) dst[i * t + j] += src[j] * inv_f;
                   }
                 });
}

Graph::NodeId Graph::conv2d(NodeId x, NodeId w, NodeId b, int stride_h, int stride_w) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  const Tensor& vb = value(b);
  check_4d(vx, "conv2d input");
  check_4d(vw, "conv2d weight");
  const int64_t batch = vx.dim(0), cin = vx.dim(1);
  const int64_t cout = vw.dim(0);
  if (vw.dim(1) != cin) throw NumericalError("conv2d: channel mismatch");
  if (vb.numel() != cout) throw NumericalError("conv2d: bias size mismatch");
  const int kh = static_cast<int>(vw.dim(2)), kw = static_cast<int>(vw.dim(3));
  const ConvGeom geom = make_geom(vx.dim(2), vx.dim(3), kh, kw, stride_h, stride_w);
  const int64_t positions = geom.out_h * geom.out_w;
  const int64_t ckk = cin * kh * kw;

  Tensor out({batch, cout, geom.out_h, geom.out_w});
  {
    Eigen::Map<const RowMat> wmat(vw.ptr(), cout, ckk);
    Eigen::Map<const Eigen::VectorXd> bias(vb.ptr(), cout);
    ColMat cols;
    for (int64_t n = 0; n < batch; ++n) {
      im2col(vx.ptr() + n * cin * geom.in_h * geom.in_w, cin, geom, &cols);
      Eigen::Map<RowMat> omat(out.ptr() + n * cout * positions, cout, positions);
      omat.noalias() = wmat * cols;
      omat.colwise() += bias;
    }
  }

  const bool rg = needs_grad(x) || needs_grad(w) || needs_grad(b);
  return emplace(std::move(out), rg,
                 [x, w, b, geom, batch, cin, cout, ckk, positions](Graph& g, NodeId self) {
                   const Tensor& d = g.grad(self);
                   const Tensor& vx = g.value(x);
                   const Tensor& vw = g.value(w);
                   Eigen::Map<const RowMat> wmat(vw.ptr(), cout, ckk);
                   ColMat cols, dcols;
                   for (int64_t n = 0; n < batch; ++n) {
                     Eigen::Map<const RowMat> dmat(d.ptr() + n * cout * positions,
                                                   cout, positions);
                     if (g.needs_grad(w)) {
                       im2col(vx.ptr() + n * cin * geom.in_h * geom.in_w, cin, geom, &cols);
                       Eigen::Map<RowMat> gw(g.grad_buffer(w).ptr(), cout, ckk);
                       gw.noalias() += dmat * cols.transpose();
                     }
                     if (g.needs_grad(b)) {
                       Eigen::Map<Eigen::VectorXd> gb(g.grad_buffer(b).ptr(), cout);
                       gb.noalias() += dmat.rowwise().sum();
                     }
                     if (g.needs_grad(x)) {
                       dcols.noalias() = wmat.transpose() * dmat;
                       col2im_add(dcols, cin, geom,
                                  g.grad_buffer(x).ptr() + n * cin * geom.in_h * geom.in_w);
                     }
                   }
                 });
}

Graph::NodeId Graph::tconv2d(NodeId x, NodeId w, NodeId b, int stride_h, int stride_w) {
  const Tensor& vx = value(x);
  const Tensor& vw = value(w);
  const Tensor& vb = value(b);
  check_4d(vx, "tconv2d input");
  check_4d(vw, "tconv2d weight");
  const int64_t batch = vx.dim(0), cin = vx.dim(1);
  if (vw.dim(0) != cin) throw NumericalError("tconv2d: channel mismatch");
  const int64_t cout = vw.dim(1);
  if (vb.numel() != cout) throw NumericalError("tconv2d: bias size mismatch");
  const int kh = static_cast<int>(vw.dim(2)), kw = static_cast<int>(vw.dim(3));
  const int64_t in_h = vx.dim(2), in_w = vx.dim(3);
  const int64_t out_h = in_h * stride_h, out_w = in_w * stride_w;
  // Geometry of the forward conv this layer transposes: (out_h,out_w)->(in_h,in_w).
  const ConvGeom geom = make_geom(out_h, out_w, kh, kw, stride_h, stride_w);
  const int64_t positions = in_h * in_w;  // == geom.out_h * geom.out_w
  const int64_t ckk = cout * kh * kw;

  Tensor out({batch, cout, out_h, out_w});
  {
    Eigen::Map<const RowMat> wmat(vw.ptr(), cin, ckk);
    ColMat cols;
    for (int64_t n = 0; n < batch; ++n) {
      Eigen::Map<const RowMat> xmat(vx.ptr() + n * cin * positions, cin, positions);
      cols.noalias() = wmat.transpose() * xmat;
      double* dst = out.ptr() + n * cout * out_h * out_w;
      col2im_add(cols, cout, geom, dst);
      for (int64_t c = 0; c < cout; ++c) {
        const double bias = vb.data[static_cast<size_t>(c)];
        double* plane = dst + c * out_h * out_w;
        for (int64_t i = 0; i < out_h * out_w; ++i) plane[i] += bias;
      }
    }
  }

  const bool rg = needs_grad(x) || needs_grad(w) || needs_grad(b);
  return emplace(std::move(out), rg,
                 [x, w, b, geom, batch, cin, cout, ckk, positions, out_h, out_w](
                     Graph& g, NodeId self) {
                   const Tensor& d = g.grad(self);
                   const Tensor& vx = g.value(x);
                   const Tensor& vw = g.value(w);
                   Eigen::Map<const RowMat> wmat(vw.ptr(), cin, ckk);
                   ColMat dcols;
                   for (int64_t n = 0; n < batch; ++n) {
                     const double* dptr = d.ptr() + n * cout * out_h * out_w;
                     im2col(dptr, cout, geom, &dcols);
                     if (g.needs_grad(x)) {
                       Eigen::Map<RowMat> gx(g.grad_buffer(x).ptr() + n * cin * positions,
                                             cin, positions);
                       gx.noalias() += wmat * dcols;
                     }
                     if (g.needs_grad(w)) {
                       Eigen::Map<const RowMat> xmat(vx.ptr() + n * cin * positions,
                                                     cin, positions);
                       Eigen::Map<RowMat> gw(g.grad_buffer(w).ptr(), cin, ckk);
                       gw.noalias() += xmat * dcols.transpose();
                     }
                     if (g.needs_grad(b)) {
                       Tensor& gb = g.grad_buffer(b);
                       for (int64_t c = 0; c < cout; ++c) {
                         const double* plane = dptr + c * out_h * out_w;
                         double acc = 0.0;
                         for (int64_t i = 0; i < out_h * out_w; ++i) acc += plane[i];
                         gb.data[static_cast<size_t>(c)] += acc;
                       }
                     }
                   }
                 });
}

Graph::NodeId Graph::batch_norm(NodeId x, NodeId gamma, NodeId beta,
                                Tensor* running_mean, Tensor* running_var,
                                bool train, double momentum, double eps) {
  const Tensor& vx = value(x);
  check_4d(vx, "batch_norm");
  const int64_t batch = vx.dim(0), ch = vx.dim(1), plane = vx.dim(2) * vx.dim(3);
  const Tensor& vg = value(gamma);
  const Tensor& vb = value(beta);
  if (vg.numel() != ch || vb.numel() != ch)
    throw NumericalError("batch_norm: parameter size mismatch");
  const int64_t n_stat = batch * plane;

  std::vector<double> mean(static_cast<size_t>(ch), 0.0);
  std::vector<double> inv_std(static_cast<size_t>(ch), 0.0);

  if (train) {
    for (int64_t c = 0; c < ch; ++c) {
      double s = 0.0, s2 = 0.0;
      for (int64_t n = 0; n < batch; ++n) {
        const double* p = vx.ptr() + (n * ch + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          s += p[i];
          s2 += p[i] * p[i];
        }
      }
      const double mu = s / static_cast<double>(n_stat);
      const double var = std::max(s2 / static_cast<double>(n_stat) - mu * mu, 0.0);
      mean[static_cast<size_t>(c)] = mu;
      inv_std[static_cast<size_t>(c)] = 1.0 / std::sqrt(var + eps);
      if (running_mean && running_var) {
        const double unbiased =
            n_stat > 1 ? var * static_cast<double>(n_stat) / static_cast<double>(n_stat - 1)
                       : var;
        running_mean->data[static_cast<size_t>(c)] =
            (1.0 - momentum) * running_mean->data[static_cast<size_t>(c)] + momentum * mu;
        running_var->data[static_cast<size_t>(c)] =
            (1.0 - momentum) * running_var->data[static_cast<size_t>(c)] +
            momentum * unbiased;
      }
    }
  } else {
    if (!running_mean || !running_var)
      throw NumericalError("batch_norm: eval mode needs running statistics");
    for (int64_t c = 0; c < ch; ++c) {
      mean[static_cast<size_t>(c)] = running_mean->data[static_cast<size_t>(c)];
      inv_std[static_cast<size_t>(c)] =
          1.0 / std::sqrt(running_var->data[static_cast<size_t>(c)] + eps);
    }
  }

  Tensor out(vx.shape);
  for (int64_t n = 0; n < batch; ++n)
    for (int64_t c = 0; c < ch; ++c) {
      const double* src = vx.ptr() + (n * ch + c) * plane;
      double* dst = out.ptr() + (n * ch + c) * plane;
      const double mu = mean[static_cast<size_t>(c)];
      const double is = inv_std[static_cast<size_t>(c)];
      const double gm = vg.data[static_cast<size_t>(c)];
      const double bt = vb.data[static_cast<size_t>(c)];
      for (int64_t i = 0; i < plane; ++i) dst[i] = gm * (src[i] - mu) * is + bt;
    }

  const bool rg = needs_grad(x) || needs_grad(gamma) || needs_grad(beta);
  return emplace(
      std::move(out), rg,
      [x, gamma, beta, batch, ch, plane, n_stat, train, mean = std::move(mean),
       inv_std = std::move(inv_std)](Graph& g, NodeId self) {
        const Tensor& d = g.grad(self);
        const Tensor& vx = g.value(x);
        const Tensor& vg = g.value(gamma);
        for (int64_t c = 0; c < ch; ++c) {
          const double mu = mean[static_cast<size_t>(c)];
          const double is = inv_std[static_cast<size_t>(c)];
          const double gm = vg.data[static_cast<size_t>(c)];

          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (int64_t n = 0; n < batch; ++n) {
            const double* dp = d.ptr() + (n * ch + c) * plane;
            const double* xp = vx.ptr() + (n * ch + c) * plane;
            for (int64_t i = 0; i < plane; ++i) {
              sum_dy += dp[i];
              sum_dy_xhat += dp[i] * (xp[i] - mu) * is;
            }
          }
          if (g.needs_grad(beta))
            g.grad_buffer(beta).data[static_cast<size_t>(c)] += sum_dy;
          if (g.needs_grad(gamma))
            g.grad_buffer(gamma).data[static_cast<size_t>(c)] += sum_dy_xhat;
          if (!g.needs_grad(x)) continue;

          Tensor& gx = g.grad_buffer(x);
          if (train) {
            const double mean_dy = sum_dy / static_cast<double>(n_stat);
            const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(n_stat);
            for (int64_t n = 0; n < batch; ++n) {
              const double* dp = d.ptr() + (n * ch + c) * plane;
              const double* xp = vx.ptr() + (n * ch + c) * plane;
              double* gp = gx.ptr() + (n * ch + c) * plane;
              for (int64_t i = 0; i < plane; ++i) {
                const double xhat = (xp[i] - mu) * is;
                gp[i] += gm * is * (dp[i] - mean_dy - xhat * mean_dy_xhat);
              }
            }
          } else {
            for (int64_t n = 0; n < batch; ++n) {
              const double* dp = d.ptr() + (n * ch + c) * plane;
              double* gp = gx.ptr() + (n * ch + c) * plane;
              for (int64_t i = 0; i < plane; ++i) gp[i] += gm * is * dp[i];
            }
          }
        }
      });
}

Graph::NodeId Graph::mse(NodeId pred, NodeId target) {
  const Tensor& vp = value(pred);
  const Tensor& vt = value(target);
  if (!vp.same_shape(vt)) throw NumericalError("mse: shape mismatch");
  const int64_t n = vp.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double e = vp.data[i] - vt.data[i];
    acc += e * e;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return emplace(std::move(out), needs_grad(pred) || needs_grad(target),
                 [pred, target, n](Graph& g, NodeId self) {
                   const double d = g.grad(self).data[0];
                   const Tensor& vp = g.value(pred);
                   const Tensor& vt = g.value(target);
                   const double scale = 2.0 * d / static_cast<double>(n);
                   if (g.needs_grad(pred)) {
                     Tensor& gp = g.grad_buffer(pred);
                     for (int64_t i = 0; i < n; ++i)
                       gp.data[i] += scale * (vp.data[i] - vt.data[i]);
                   }
                   if (g.needs_grad(target)) {
                     Tensor& gt = g.grad_buffer(target);
                     for (int64_t i = 0; i < n; ++i)
                       gt.data[i] -= scale * (vp.data[i] - vt.data[i]);
                   }
                 });
}

Graph::NodeId Graph::bce_with_logits(NodeId logits, NodeId labels) {
  const Tensor& vz = value(logits);
  const Tensor& vy = value(labels);
  if (!vz.same_shape(vy)) throw NumericalError("bce_with_logits: shape mismatch");
  const int64_t n = vz.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double z = vz.data[i];
    // softplus(z) - y*z, evaluated stably
    acc += std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))) - vy.data[i] * z;
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  return emplace(std::move(out), needs_grad(logits),
                 [logits, labels, n](Graph& g, NodeId self) {
                   if (!g.needs_grad(logits)) return;
                   const double d = g.grad(self).data[0];
                   const Tensor& vz = g.value(logits);
                   const Tensor& vy = g.value(labels);
                   Tensor& gz = g.grad_buffer(logits);
                   const double scale = d / static_cast<double>(n);
                   for (int64_t i = 0; i < n; ++i) {
                     const double s = 1.0 / (1.0 + std::exp(-vz.data[i]));
                     gz.data[i] += scale * (s - vy.data[i]);
                   }
                 });
}

Graph::NodeId Graph::add_scaled(NodeId a, NodeId b, double alpha) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.numel() != 1 || vb.numel() != 1)
    throw NumericalError("add_scaled: scalar nodes expected");
  Tensor out = Tensor::scalar(va.data[0] + alpha * vb.data[0]);
  return emplace(std::move(out), needs_grad(a) || needs_grad(b),
                 [a, b, alpha](Graph& g, NodeId self) {
                   const double d = g.grad(self).data[0];
                   if (g.needs_grad(a)) g.grad_buffer(a).data[0] += d;
                   if (g.needs_grad(b)) g.grad_buffer(b).data[0] += alpha * d;
                 });
}

}  // namespace iass
