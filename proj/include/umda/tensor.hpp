// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "umda/errors.hpp"

namespace umda {

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad; // sized lazily, only when requires_grad
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn; // empty for leaves

    int size() const { return static_cast<int>(data.size()); }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

} // namespace detail

/// Dense row-major float64 tensor with reverse-mode gradient support.
///
/// A Tensor is a cheap handle onto a shared node. Operations record the
/// computation graph; Tensor::backward() on a scalar accumulates gradients
/// into every reachable node with requires_grad set. Every operation
/// validates that its output is finite and throws NumericError otherwise.
class Tensor {
public:
    Tensor() = default;

    /// Leaf tensor filled with a constant.
    explicit Tensor(std::vector<int> shape, double fill = 0.0, bool requires_grad = false);

    /// Leaf tensor from explicit data (length must match the shape product).
    Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);

    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    int extent(int axis) const { return node_->shape.at(static_cast<std::size_t>(axis)); }
    int size() const { return node_->size(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b);

    const std::vector<double>& data() const { return node_->data; }
    /// Mutable view of a leaf's payload (optimizer updates, grad-check nudges).
    std::vector<double>& raw_data();

    /// Accumulated gradient; zeros if backward never reached this tensor.
    std::vector<double> grad_or_zeros() const;
    const std::vector<double>& grad() const { return node_->grad; }

    double value() const; // size-1 tensors only
    double at_flat(int i) const { return node_->data[static_cast<std::size_t>(i)]; }

    /// Copy with the graph history dropped (constant leaf).
    Tensor detached() const;

    void zero_grad();

    /// Reverse-mode sweep from a scalar output.
    void backward() const;

    std::shared_ptr<detail::Node> node() const { return node_; }
    static Tensor from_node(std::shared_ptr<detail::Node> n);

private:
    std::shared_ptr<detail::Node> node_;
};

int shape_size(const std::vector<int>& shape);

// ---------------------------------------------------------------------------
// Elementwise and scalar ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div_elem(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor exp_elem(const Tensor& a);
Tensor log_elem(const Tensor& a);
Tensor sqrt_elem(const Tensor& a);
Tensor abs_elem(const Tensor& a);
Tensor square(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
/// Elementwise min/max; on ties the gradient goes to the first argument.
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);

// ---------------------------------------------------------------------------
// Linear algebra and shape ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b); // rank-2 x rank-2
Tensor transpose(const Tensor& a);               // rank-2
/// Adds a length-n row vector to every row of an [m, n] matrix.
Tensor add_rowvec(const Tensor& x, const Tensor& row);
Tensor softmax(const Tensor& x, int axis);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor dot(const Tensor& a, const Tensor& b); // flat inner product -> scalar
/// Multiplies every element of x by a size-1 tensor (both sides get grads).
Tensor scale_by(const Tensor& x, const Tensor& s);
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor slice_rows(const Tensor& x, int r0, int r1); // rank-2, rows [r0, r1)
Tensor slice_cols(const Tensor& x, int c0, int c1); // rank-2, cols [c0, c1)
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
/// Stacks k same-shape tensors into a new leading axis of extent k.
Tensor stack0(const std::vector<Tensor>& parts);
/// Picks sub-tensor i along the leading axis (drops that axis).
Tensor index0(const Tensor& x, int i);
/// Gathers flat indices into a rank-1 tensor; duplicate indices accumulate
/// gradient.
Tensor gather(const Tensor& x, const std::vector<int>& flat_indices);

// ---------------------------------------------------------------------------
// Neural-net building blocks
// ---------------------------------------------------------------------------

/// Per-row layer normalization of an [m, n] matrix with learnable scale/shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

/// 2-D cross-correlation. x: [N, Cin, H, W], w: [Cout, Cin, kh, kw],
/// bias: [Cout] or undefined. Output extents follow the standard floor rule.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding);

/// Per-channel batch normalization of [N, C, H, W]. In training mode the
/// batch statistics are used and the running buffers (plain leaves) are
/// updated in place; in evaluation mode the running buffers are used.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var,
                  bool training, double momentum = 0.1, double eps = 1e-5);

} // namespace umda
