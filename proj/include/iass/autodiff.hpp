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

#include <functional>
#include <vector>

#include "iass/tensor.hpp"

namespace iass {

/// Define-by-run reverse-mode tape over Tensor values. Operations append
/// nodes; backward() walks the tape in reverse, accumulating gradients into
/// every node reachable from a requires-grad input.
///
/// Convolution geometry follows the "same" convention: a stride-s layer maps
/// length n to ceil(n/s), and its transposed counterpart maps n to n*s, so
/// encoder/decoder mirrors line up without output-padding bookkeeping.
class Graph {
 public:
  using NodeId = int32_t;

  NodeId input(Tensor value, bool requires_grad = false);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  const Tensor& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }

  /// Seed d(loss)/d(loss)=1 at a scalar node and accumulate gradients.
  void backward(NodeId loss);

  // --- elementwise and structural ops ---
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId leaky_relu(NodeId x, double slope);
  NodeId sigmoid(NodeId x);
  NodeId concat_channels(NodeId a, NodeId b);           // [B,C1,H,W]+[B,C2,H,W]
  NodeId pad_reflect_hw(NodeId x, int64_t h, int64_t w);  // end-pad to (h,w)
  NodeId crop_hw(NodeId x, int64_t h, int64_t w);         // keep leading (h,w)
  NodeId mean_over_freq(NodeId x);                        // [B,1,F,T] -> [B,T]

  // --- learnable layers ---
  NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride_h, int stride_w);
  NodeId tconv2d(NodeId x, NodeId w, NodeId b, int stride_h, int stride_w);
  /// Batch normalization per channel over (batch, H, W). In training mode
  /// batch statistics are used and, when `running_*` are given, folded into
  /// the running buffers in place. Eval mode reads the running buffers.
  NodeId batch_norm(NodeId x, NodeId gamma, NodeId beta, Tensor* running_mean,
                    Tensor* running_var, bool train, double momentum = 0.1,
                    double eps = 1e-5);

  // --- reductions / losses ---
  NodeId mse(NodeId pred, NodeId target);                 // scalar mean
  NodeId bce_with_logits(NodeId logits, NodeId labels);   // scalar mean
  NodeId add_scaled(NodeId a, NodeId b, double alpha);    // a + alpha*b

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::function<void(Graph&, NodeId)> backward_fn;
  };

  NodeId emplace(Tensor value, bool requires_grad,
                 std::function<void(Graph&, NodeId)> backward_fn);
  Tensor& grad_buffer(NodeId id);
  bool needs_grad(NodeId id) const {
    return nodes_[static_cast<size_t>(id)].requires_grad;
  }

  std::vector<Node> nodes_;
};

}  // namespace iass
