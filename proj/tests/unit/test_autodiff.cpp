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
#include <functional>

#include "iass/autodiff.hpp"
#include "iass/rng.hpp"

using namespace iass;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

// Central-difference check of d(loss)/d(inputs[k]) for every input tensor,
// over a sample of coordinates.
void fd_check(const std::function<Graph::NodeId(Graph&, std::vector<Graph::NodeId>&)>& build,
              std::vector<Tensor> inputs, Rng& rng, double h = 1e-5,
              double tol = 1e-5) {
  auto eval = [&](const std::vector<Tensor>& vals) {
    Graph g;
    std::vector<Graph::NodeId> ids;
    for (const auto& t : vals) ids.push_back(g.input(t, true));
    return g.value(build(g, ids)).data[0];
  };

  // analytic gradients
  Graph g;
  std::vector<Graph::NodeId> ids;
  for (const auto& t : inputs) ids.push_back(g.input(t, true));
  const Graph::NodeId loss = build(g, ids);
  g.backward(loss);

  for (size_t k = 0; k < inputs.size(); ++k) {
    const Tensor& grad = g.grad(ids[k]);
    REQUIRE(grad.numel() == inputs[k].numel());
    const int64_t samples = std::min<int64_t>(inputs[k].numel(), 6);
    for (int64_t s = 0; s < samples; ++s) {
      const int64_t idx = rng.uniform_int(0, inputs[k].numel() - 1);
      std::vector<Tensor> plus = inputs, minus = inputs;
      plus[k].data[idx] += h;
      minus[k].data[idx] -= h;
      const double fd = (eval(plus) - eval(minus)) / (2.0 * h);
      const double an = grad.data[idx];
      const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
      INFO("input ", k, " coord ", idx, " fd ", fd, " analytic ", an);
      CHECK(std::abs(fd - an) / denom <= tol);
    }
  }
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("conv2d forward matches a naive loop") {
  Rng rng(1);
  const Tensor x = random_tensor({1, 2, 5, 6}, rng);
  const Tensor w = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);

  Graph g;
  const auto xid = g.input(x), wid = g.input(w), bid = g.input(b);
  const auto out = g.conv2d(xid, wid, bid, 1, 1);
  const Tensor& y = g.value(out);
  REQUIRE(y.shape == std::vector<int64_t>{1, 3, 5, 6});

  // naive "same" convolution
  for (int64_t co = 0; co < 3; ++co)
    for (int64_t oh = 0; oh < 5; ++oh)
      for (int64_t ow = 0; ow < 6; ++ow) {
        double acc = b.data[static_cast<size_t>(co)];
        for (int64_t ci = 0; ci < 2; ++ci)
          for (int64_t ki = 0; ki < 3; ++ki)
            for (int64_t kj = 0; kj < 3; ++kj) {
              const int64_t ih = oh + ki - 1, iw = ow + kj - 1;
              if (ih < 0 || ih >= 5 || iw < 0 || iw >= 6) continue;
              acc += x.data[static_cast<size_t>((ci * 5 + ih) * 6 + iw)] *
                     w.data[static_cast<size_t>(((co * 2 + ci) * 3 + ki) * 3 + kj)];
            }
        CHECK(y.data[static_cast<size_t>((co * 5 + oh) * 6 + ow)] ==
              doctest::Approx(acc).epsilon(1e-12));
      }
}

TEST_CASE("strided conv and its transpose mirror shapes") {
  Rng rng(2);
  Graph g;
  const auto x = g.input(random_tensor({2, 3, 8, 6}, rng));
  const auto w = g.input(random_tensor({5, 3, 3, 1}, rng));
  const auto b = g.input(random_tensor({5}, rng));
  const auto down = g.conv2d(x, w, b, 2, 2);
  CHECK(g.value(down).shape == std::vector<int64_t>{2, 5, 4, 3});

  const auto wt = g.input(random_tensor({5, 3, 3, 1}, rng));
  const auto bt = g.input(random_tensor({3}, rng));
  const auto up = g.tconv2d(down, wt, bt, 2, 2);
  CHECK(g.value(up).shape == std::vector<int64_t>{2, 3, 8, 6});
}

TEST_CASE("tconv2d is the adjoint of conv2d") {
  // <conv(x), y> == <x, tconv(y)>. The conv weight [Cout,Cin,kh,kw] is the
  // tconv weight [Cin_t,Cout_t,kh,kw] verbatim: same matrix, adjoint ops.
  Rng rng(3);
  const Tensor w = random_tensor({4, 2, 3, 3}, rng);  // conv: 2 -> 4 channels

  const Tensor x = random_tensor({1, 2, 6, 4}, rng);
  const Tensor y = random_tensor({1, 4, 3, 2}, rng);

  Graph g;
  const auto zero4 = g.input(Tensor::zeros({4}));
  const auto zero2 = g.input(Tensor::zeros({2}));
  const auto cx = g.conv2d(g.input(x), g.input(w), zero4, 2, 2);
  const auto ty = g.tconv2d(g.input(y), g.input(w), zero2, 2, 2);

  double lhs = 0.0, rhs = 0.0;
  for (int64_t i = 0; i < y.numel(); ++i) lhs += g.value(cx).data[i] * y.data[i];
  for (int64_t i = 0; i < x.numel(); ++i) rhs += g.value(ty).data[i] * x.data[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("gradients: conv2d") {
  Rng rng(4);
  fd_check(
      [](Graph& g, std::vector<Graph::NodeId>& in) {
        const auto out = g.conv2d(in[0], in[1], in[2], 1, 1);
        return g.mse(out, in[3]);
      },
      {random_tensor({2, 2, 4, 5}, rng), random_tensor({3, 2, 3, 3}, rng),
       random_tensor({3}, rng), random_tensor({2, 3, 4, 5}, rng)},
      rng);
}

TEST_CASE("gradients: strided conv2d with the resampling kernel") {
  Rng rng(5);
  fd_check(
      [](Graph& g, std::vector<Graph::NodeId>& in) {
        const auto out = g.conv2d(in[0], in[1], in[2], 2, 2);
        return g.mse(out, in[3]);
      },
      {random_tensor({1, 2, 6, 8}, rng), random_tensor({3, 2, 3, 1}, rng),
       random_tensor({3}, rng), random_tensor({1, 3, 3, 4}, rng)},
      rng);
}

TEST_CASE("gradients: tconv2d") {
  Rng rng(6);
  fd_check(
      [](Graph& g, std::vector<Graph::NodeId>& in) {
        const auto out = g.tconv2d(in[0], in[1], in[2], 2, 2);
        return g.mse(out, in[3]);
      },
      {random_tensor({2, 3, 3, 4}, rng), random_tensor({3, 2, 3, 1}, rng),
       random_tensor({2}, rng), random_tensor({2, 2, 6, 8}, rng)},
      rng);
}

TEST_CASE("gradients: batch norm in training mode") {
  Rng rng(7);
  fd_check(
      [](Graph& g, std::vector<Graph::NodeId>& in) {
        const auto out =
            g.batch_norm(in[0], in[1], in[2], nullptr, nullptr, /*train=*/true);
        return g.mse(out, in[3]);
      },
      {random_tensor({3, 2, 3, 4}, rng), random_tensor({2}, rng, 0.5),
       random_tensor({2}, rng, 0.5), random_tensor({3, 2, 3, 4}, rng)},
      rng, 1e-5, 1e-4);
}

TEST_CASE("gradients: batch norm in eval mode") {
  Rng rng(8);
  Tensor rm = Tensor::zeros({2});
  Tensor rv = Tensor::full({2}, 1.0);
  rm.data = {0.1, -0.2};
  rv.data = {1.5, 0.7};
  fd_check(
      [&](Graph& g, std::vector<Graph::NodeId>& in) {
        const auto out = g.batch_norm(in[0], in[1], in[2], &rm, &rv, /*train=*/false);
        return g.mse(out, in[3]);
      },
      {random_tensor({2, 2, 3, 3}, rng), random_tensor({2}, rng),
       random_tensor({2}, rng), random_tensor({2, 2, 3, 3}, rng)},
      rng);
}

TEST_CASE("batch norm updates running statistics only when tracking") {
  Rng rng(9);
  const Tensor x = random_tensor({2, 2, 3, 3}, rng);
  Tensor rm = Tensor::zeros({2});
  Tensor rv = Tensor::full({2}, 1.0);
  Graph g;
  const auto gid = g.input(Tensor::full({2}, 1.0));
  const auto bid = g.input(Tensor::zeros({2}));
  (void)g.batch_norm(g.input(x), gid, bid, &rm, &rv, true);
  CHECK(rm.data[0] != 0.0);
  CHECK(rv.data[0] != 1.0);

  // eval mode reads but never writes
  const Tensor rm_copy = rm, rv_copy = rv;
  (void)g.batch_norm(g.input(x), gid, bid, &rm, &rv, false);
  CHECK(rm.data == rm_copy.data);
  CHECK(rv.data == rv_copy.data);
}

TEST_CASE("gradients: activation, pad, crop, concat, mean composite") {
  Rng rng(10);
  fd_check(
      [](Graph& g, std::vector<Graph::NodeId>& in) {
        auto h = g.pad_reflect_hw(in[0], 6, 8);
        h = g.leaky_relu(h, 0.2);
        h = g.concat_channels(h, g.sigmoid(h));
        h = g.crop_hw(h, 5, 7);
        h = g.conv2d(h, in[1], in[2], 1, 1);
        h = g.crop_hw(h, 5, 7);
        return g.mse(g.mean_over_freq(h), in[3]);
      },
      {random_tensor({2, 1, 5, 7}, rng), random_tensor({1, 2, 3, 3}, rng),
       random_tensor({1}, rng), random_tensor({2, 7}, rng)},
      rng);
}

TEST_CASE("gradients: residual add and elementwise mul") {
  Rng rng(11);
  fd_check(
      [](Graph& g, std::vector<Graph::NodeId>& in) {
        const auto h = g.add(in[0], g.leaky_relu(in[0], 0.2));
        return g.mse(g.mul(h, in[1]), in[2]);
      },
      {random_tensor({1, 2, 3, 4}, rng), random_tensor({1, 2, 3, 4}, rng),
       random_tensor({1, 2, 3, 4}, rng)},
      rng);
}

TEST_CASE("gradients: bce with logits, including the scaled total") {
  Rng rng(12);
  Tensor labels({2, 6});
  for (auto& v : labels.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  fd_check(
      [&](Graph& g, std::vector<Graph::NodeId>& in) {
        const auto bce = g.bce_with_logits(in[0], g.input(labels));
        const auto mse = g.mse(g.sigmoid(in[1]), g.input(Tensor::zeros({2, 6})));
        return g.add_scaled(mse, bce, 0.37);
      },
      {random_tensor({2, 6}, rng, 3.0), random_tensor({2, 6}, rng)}, rng);
}

TEST_CASE("bce value is the stable softplus form") {
  Graph g;
  Tensor z({2});
  z.data = {20.0, -20.0};
  Tensor y({2});
  y.data = {1.0, 0.0};
  const auto loss = g.bce_with_logits(g.input(z), g.input(y));
  CHECK(g.value(loss).data[0] ==
        doctest::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-12));

  // ln 2 at zero logits against label one
  Graph g2;
  Tensor z0({1}), y1({1});
  z0.data = {0.0};
  y1.data = {1.0};
  CHECK(g2.value(g2.bce_with_logits(g2.input(z0), g2.input(y1))).data[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("no gradient flows into non-grad inputs") {
  Rng rng(13);
  Graph g;
  const auto x = g.input(random_tensor({1, 1, 4, 4}, rng), false);
  const auto w = g.input(random_tensor({1, 1, 3, 3}, rng), true);
  const auto b = g.input(Tensor::zeros({1}), true);
  const auto loss = g.mse(g.conv2d(x, w, b, 1, 1), g.input(Tensor::zeros({1, 1, 4, 4})));
  g.backward(loss);
  CHECK(g.grad(x).data.empty());
  CHECK(g.grad(w).numel() == 9);
}

}  // TEST_SUITE
