// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 umda contributors

#include "umda/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace umda {

using detail::Node;

int shape_size(const std::vector<int>& shape) {
    int n = 1;
    for (int e : shape) {
        if (e <= 0) throw DimensionError("tensor extent must be positive");
        n *= e;
    }
    return n;
}

namespace {

void check_finite(const std::vector<double>& v, const char* where) {
    for (double x : v) {
        if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + where);
    }
}

std::shared_ptr<Node> make_leaf(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    auto n = std::make_shared<Node>();
    if (static_cast<int>(data.size()) != shape_size(shape)) {
        throw DimensionError("data length does not match shape");
    }
    check_finite(data, "leaf tensor");
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->requires_grad = requires_grad;
    n->is_leaf = true;
    if (requires_grad) n->ensure_grad();
    return n;
}

bool any_requires_grad(const std::vector<std::shared_ptr<Node>>& parents) {
    for (const auto& p : parents) {
        if (p->requires_grad) return true;
    }
    return false;
}

/// Wires a result node into the graph. When no parent participates in
/// gradients the node is detached (no parents, no closure) so dead graph
/// segments are never retained.
Tensor make_op(std::vector<int> shape, std::vector<double> data,
               std::vector<std::shared_ptr<Node>> parents,
               std::function<void(Node&)> backward_fn,
               const char* name) {
    check_finite(data, name);
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(data);
    n->is_leaf = false;
    if (any_requires_grad(parents)) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor::from_node(std::move(n));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) throw DimensionError(std::string(op) + ": shape mismatch");
}

void accum(Node& p, const std::vector<double>& g) {
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

} // namespace

Tensor::Tensor(std::vector<int> shape, double fill, bool requires_grad) {
    std::vector<double> data(static_cast<std::size_t>(shape_size(shape)), fill);
    node_ = make_leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    node_ = make_leaf(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor({1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::from_node(std::shared_ptr<Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
}

void Tensor::set_requires_grad(bool b) {
    if (!node_->is_leaf) throw ValidationError("requires_grad is adjustable on leaves only");
    node_->requires_grad = b;
    if (b) {
        node_->ensure_grad();
    } else {
        node_->grad.clear();
    }
}

std::vector<double>& Tensor::raw_data() {
    if (!node_->is_leaf) throw ValidationError("raw_data is available on leaves only");
    return node_->data;
}

std::vector<double> Tensor::grad_or_zeros() const {
    if (node_->grad.size() == node_->data.size()) return node_->grad;
    return std::vector<double>(node_->data.size(), 0.0);
}

double Tensor::value() const {
    if (size() != 1) throw DimensionError("value() requires a size-1 tensor");
    return node_->data[0];
}

Tensor Tensor::detached() const {
    return Tensor(node_->shape, node_->data, false);
}

void Tensor::zero_grad() {
    if (node_->requires_grad) {
        node_->ensure_grad();
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }
}

void Tensor::backward() const {
    if (size() != 1) throw DimensionError("backward() requires a scalar output");
    if (!node_->requires_grad) return;

    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [cur, idx] = stack.back();
        if (idx < cur->parents.size()) {
            Node* next = cur->parents[idx].get();
            ++idx;
            if (next->requires_grad && !visited.count(next)) {
                visited.insert(next);
                stack.emplace_back(next, 0);
            }
        } else {
            order.push_back(cur);
            stack.pop_back();
        }
    }

    node_->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

namespace {

template <class Fwd, class Bwd>
Tensor binary_elem(const Tensor& a, const Tensor& b, Fwd fwd, Bwd bwd, const char* name) {
    require_same_shape(a, b, name);
    const auto& da = a.data();
    const auto& db = b.data();
    std::vector<double> out(da.size());
    for (std::size_t i = 0; i < da.size(); ++i) out[i] = fwd(da[i], db[i]);
    auto pa = a.node();
    auto pb = b.node();
    return make_op(a.shape(), std::move(out), {pa, pb},
                   [pa, pb, bwd](Node& n) {
                       std::vector<double> ga(n.data.size()), gb(n.data.size());
                       for (std::size_t i = 0; i < n.data.size(); ++i) {
                           auto [dga, dgb] = bwd(pa->data[i], pb->data[i], n.data[i]);
                           ga[i] = dga * n.grad[i];
                           gb[i] = dgb * n.grad[i];
                       }
                       accum(*pa, ga);
                       accum(*pb, gb);
                   },
                   name);
}

template <class Fwd, class Bwd>
Tensor unary_elem(const Tensor& a, Fwd fwd, Bwd bwd, const char* name) {
    const auto& da = a.data();
    std::vector<double> out(da.size());
    for (std::size_t i = 0; i < da.size(); ++i) out[i] = fwd(da[i]);
    auto pa = a.node();
    return make_op(a.shape(), std::move(out), {pa},
                   [pa, bwd](Node& n) {
                       std::vector<double> ga(n.data.size());
                       for (std::size_t i = 0; i < n.data.size(); ++i) {
                           ga[i] = bwd(pa->data[i], n.data[i]) * n.grad[i];
                       }
                       accum(*pa, ga);
                   },
                   name);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elem(a, b, [](double x, double y) { return x + y; },
                       [](double, double, double) { return std::pair<double, double>(1.0, 1.0); }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elem(a, b, [](double x, double y) { return x - y; },
                       [](double, double, double) { return std::pair<double, double>(1.0, -1.0); }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elem(a, b, [](double x, double y) { return x * y; },
                       [](double x, double y, double) { return std::pair<double, double>(y, x); }, "mul");
}

Tensor div_elem(const Tensor& a, const Tensor& b) {
    return binary_elem(a, b, [](double x, double y) { return x / y; },
                       [](double x, double y, double) {
                           return std::pair<double, double>(1.0 / y, -x / (y * y));
                       },
                       "div");
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    return binary_elem(a, b, [](double x, double y) { return x <= y ? x : y; },
                       [](double x, double y, double) {
                           return x <= y ? std::pair<double, double>(1.0, 0.0)
                                         : std::pair<double, double>(0.0, 1.0);
                       },
                       "minimum");
}

Tensor maximum(const Tensor& a, const Tensor& b) {
    return binary_elem(a, b, [](double x, double y) { return x >= y ? x : y; },
                       [](double x, double y, double) {
                           return x >= y ? std::pair<double, double>(1.0, 0.0)
                                         : std::pair<double, double>(0.0, 1.0);
                       },
                       "maximum");
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary_elem(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; }, "add_scalar");
}

Tensor mul_scalar(const Tensor& a, double s) {
    return unary_elem(a, [s](double x) { return x * s; }, [s](double, double) { return s; }, "mul_scalar");
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor exp_elem(const Tensor& a) {
    return unary_elem(a, [](double x) { return std::exp(x); },
                      [](double, double y) { return y; }, "exp");
}

Tensor log_elem(const Tensor& a) {
    return unary_elem(a, [](double x) { return std::log(x); },
                      [](double x, double) { return 1.0 / x; }, "log");
}

Tensor sqrt_elem(const Tensor& a) {
    return unary_elem(a, [](double x) { return std::sqrt(x); },
                      [](double, double y) { return 0.5 / y; }, "sqrt");
}

Tensor abs_elem(const Tensor& a) {
    return unary_elem(a, [](double x) { return std::abs(x); },
                      [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }, "abs");
}

Tensor square(const Tensor& a) {
    return unary_elem(a, [](double x) { return x * x; },
                      [](double x, double) { return 2.0 * x; }, "square");
}

Tensor relu(const Tensor& a) {
    return unary_elem(a, [](double x) { return x > 0 ? x : 0.0; },
                      [](double x, double) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

Tensor sigmoid(const Tensor& a) {
    return unary_elem(a,
                      [](double x) {
                          return x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                        : std::exp(x) / (1.0 + std::exp(x));
                      },
                      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return unary_elem(a,
                      [=](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
                      [=](double x, double) {
                          const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
                          const double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
                          return cdf + x * pdf;
                      },
                      "gelu");
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (lo > hi) throw ValidationError("clamp: lo > hi");
    return unary_elem(a, [=](double x) { return std::min(std::max(x, lo), hi); },
                      [=](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; }, "clamp");
}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) throw DimensionError("matmul: rank-2 operands required");
    const int m = a.extent(0), k = a.extent(1);
    const int k2 = b.extent(0), n = b.extent(1);
    if (k != k2) throw DimensionError("matmul: inner extents differ");

    std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (int i = 0; i < m; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = B + p * n;
            double* orow = out.data() + i * n;
            for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
        }
    }
    auto pa = a.node();
    auto pb = b.node();
    return make_op({m, n}, std::move(out), {pa, pb},
                   [pa, pb, m, k, n](Node& node) {
                       const double* G = node.grad.data();
                       if (pa->requires_grad) {
                           pa->ensure_grad();
                           double* GA = pa->grad.data();
                           const double* B = pb->data.data();
                           // dA = dC * B^T
                           for (int i = 0; i < m; ++i)
                               for (int j = 0; j < n; ++j) {
                                   const double g = G[i * n + j];
                                   if (g == 0.0) continue;
                                   const double* brow = B; // B[p*n + j]
                                   for (int p = 0; p < k; ++p) GA[i * k + p] += g * brow[p * n + j];
                               }
                       }
                       if (pb->requires_grad) {
                           pb->ensure_grad();
                           double* GB = pb->grad.data();
                           const double* A = pa->data.data();
                           // dB = A^T * dC
                           for (int i = 0; i < m; ++i)
                               for (int p = 0; p < k; ++p) {
                                   const double aip = A[i * k + p];
                                   if (aip == 0.0) continue;
                                   const double* grow = G + i * n;
                                   double* gbrow = GB + p * n;
                                   for (int j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
                               }
                       }
                   },
                   "matmul");
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transpose: rank-2 operand required");
    const int m = a.extent(0), n = a.extent(1);
    std::vector<double> out(a.data().size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
    auto pa = a.node();
    return make_op({n, m}, std::move(out), {pa},
                   [pa, m, n](Node& node) {
                       if (!pa->requires_grad) return;
                       pa->ensure_grad();
                       for (int i = 0; i < m; ++i)
                           for (int j = 0; j < n; ++j) pa->grad[i * n + j] += node.grad[j * m + i];
                   },
                   "transpose");
}

Tensor add_rowvec(const Tensor& x, const Tensor& row) {
    if (x.rank() != 2 || row.rank() != 1) throw DimensionError("add_rowvec: [m,n] + [n] required");
    const int m = x.extent(0), n = x.extent(1);
    if (row.extent(0) != n) throw DimensionError("add_rowvec: row length mismatch");
    std::vector<double> out(x.data().size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[i * n + j] = x.data()[i * n + j] + row.data()[j];
    auto px = x.node();
    auto pr = row.node();
    return make_op({m, n}, std::move(out), {px, pr},
                   [px, pr, m, n](Node& node) {
                       if (px->requires_grad) {
                           px->ensure_grad();
                           for (std::size_t i = 0; i < node.grad.size(); ++i) px->grad[i] += node.grad[i];
                       }
                       if (pr->requires_grad) {
                           pr->ensure_grad();
                           for (int i = 0; i < m; ++i)
                               for (int j = 0; j < n; ++j) pr->grad[j] += node.grad[i * n + j];
                       }
                   },
                   "add_rowvec");
}

Tensor softmax(const Tensor& x, int axis) {
    const int r = x.rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw DimensionError("softmax: axis out of range");
    const auto& shape = x.shape();
    const int len = shape[static_cast<std::size_t>(axis)];
    int outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
    for (int i = axis + 1; i < r; ++i) inner *= shape[static_cast<std::size_t>(i)];

    std::vector<double> out(x.data().size());
    const double* X = x.data().data();
    for (int o = 0; o < outer; ++o) {
        for (int in = 0; in < inner; ++in) {
            const int base = o * len * inner + in;
            double mx = X[base];
            for (int l = 1; l < len; ++l) mx = std::max(mx, X[base + l * inner]);
            double denom = 0.0;
            for (int l = 0; l < len; ++l) {
                const double e = std::exp(X[base + l * inner] - mx);
                out[static_cast<std::size_t>(base + l * inner)] = e;
                denom += e;
            }
            for (int l = 0; l < len; ++l) out[static_cast<std::size_t>(base + l * inner)] /= denom;
        }
    }
    auto px = x.node();
    return make_op(shape, std::move(out), {px},
                   [px, outer, inner, len](Node& node) {
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       const double* Y = node.data.data();
                       const double* G = node.grad.data();
                       for (int o = 0; o < outer; ++o) {
                           for (int in = 0; in < inner; ++in) {
                               const int base = o * len * inner + in;
                               double s = 0.0;
                               for (int l = 0; l < len; ++l) s += G[base + l * inner] * Y[base + l * inner];
                               for (int l = 0; l < len; ++l) {
                                   const int idx = base + l * inner;
                                   px->grad[static_cast<std::size_t>(idx)] += Y[idx] * (G[idx] - s);
                               }
                           }
                       }
                   },
                   "softmax");
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    auto px = x.node();
    return make_op({1}, {s}, {px},
                   [px](Node& node) {
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       for (auto& g : px->grad) g += node.grad[0];
                   },
                   "sum");
}

Tensor mean(const Tensor& x) {
    return mul_scalar(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) throw DimensionError("dot: size mismatch");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a.data()[static_cast<std::size_t>(i)] * b.data()[static_cast<std::size_t>(i)];
    auto pa = a.node();
    auto pb = b.node();
    return make_op({1}, {s}, {pa, pb},
                   [pa, pb](Node& node) {
                       const double g = node.grad[0];
                       if (pa->requires_grad) {
                           pa->ensure_grad();
                           for (std::size_t i = 0; i < pa->data.size(); ++i) pa->grad[i] += g * pb->data[i];
                       }
                       if (pb->requires_grad) {
                           pb->ensure_grad();
                           for (std::size_t i = 0; i < pb->data.size(); ++i) pb->grad[i] += g * pa->data[i];
                       }
                   },
                   "dot");
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
    if (s.size() != 1) throw DimensionError("scale_by: scale must be a size-1 tensor");
    const double sv = s.data()[0];
    std::vector<double> out(x.data().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * sv;
    auto px = x.node();
    auto ps = s.node();
    return make_op(x.shape(), std::move(out), {px, ps},
                   [px, ps](Node& node) {
                       const double sv = ps->data[0];
                       if (px->requires_grad) {
                           px->ensure_grad();
                           for (std::size_t i = 0; i < node.grad.size(); ++i) px->grad[i] += node.grad[i] * sv;
                       }
                       if (ps->requires_grad) {
                           ps->ensure_grad();
                           double acc = 0.0;
                           for (std::size_t i = 0; i < node.grad.size(); ++i) acc += node.grad[i] * px->data[i];
                           ps->grad[0] += acc;
                       }
                   },
                   "scale_by");
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
    if (shape_size(shape) != x.size()) throw DimensionError("reshape: element count mismatch");
    auto px = x.node();
    return make_op(std::move(shape), x.data(), {px},
                   [px](Node& node) {
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       for (std::size_t i = 0; i < node.grad.size(); ++i) px->grad[i] += node.grad[i];
                   },
                   "reshape");
}

Tensor slice_rows(const Tensor& x, int r0, int r1) {
    if (x.rank() != 2) throw DimensionError("slice_rows: rank-2 operand required");
    const int m = x.extent(0), n = x.extent(1);
    if (r0 < 0 || r1 > m || r0 >= r1) throw DimensionError("slice_rows: bad range");
    std::vector<double> out(static_cast<std::size_t>(r1 - r0) * n);
    std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(r0) * n,
              x.data().begin() + static_cast<std::ptrdiff_t>(r1) * n, out.begin());
    auto px = x.node();
    return make_op({r1 - r0, n}, std::move(out), {px},
                   [px, r0, n](Node& node) {
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       for (std::size_t i = 0; i < node.grad.size(); ++i)
                           px->grad[static_cast<std::size_t>(r0) * n + i] += node.grad[i];
                   },
                   "slice_rows");
}

Tensor slice_cols(const Tensor& x, int c0, int c1) {
    if (x.rank() != 2) throw DimensionError("slice_cols: rank-2 operand required");
    const int m = x.extent(0), n = x.extent(1);
    if (c0 < 0 || c1 > n || c0 >= c1) throw DimensionError("slice_cols: bad range");
    const int w = c1 - c0;
    std::vector<double> out(static_cast<std::size_t>(m) * w);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < w; ++j) out[static_cast<std::size_t>(i) * w + j] = x.data()[static_cast<std::size_t>(i) * n + c0 + j];
    auto px = x.node();
    return make_op({m, w}, std::move(out), {px},
                   [px, c0, n, w, m](Node& node) {
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       for (int i = 0; i < m; ++i)
                           for (int j = 0; j < w; ++j)
                               px->grad[static_cast<std::size_t>(i) * n + c0 + j] +=
                                   node.grad[static_cast<std::size_t>(i) * w + j];
                   },
                   "slice_cols");
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const int n = parts[0].extent(1);
    int m = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.extent(1) != n) throw DimensionError("concat_rows: column mismatch");
        m += p.extent(0);
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m) * n);
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<int> row_offsets;
    int off = 0;
    for (const auto& p : parts) {
        out.insert(out.end(), p.data().begin(), p.data().end());
        parents.push_back(p.node());
        row_offsets.push_back(off);
        off += p.extent(0);
    }
    return make_op({m, n}, std::move(out), parents,
                   [parents, row_offsets, n](Node& node) {
                       for (std::size_t k = 0; k < parents.size(); ++k) {
                           auto& p = parents[k];
                           if (!p->requires_grad) continue;
                           p->ensure_grad();
                           const std::size_t base = static_cast<std::size_t>(row_offsets[k]) * n;
                           for (std::size_t i = 0; i < p->data.size(); ++i) p->grad[i] += node.grad[base + i];
                       }
                   },
                   "concat_rows");
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const int m = parts[0].extent(0);
    int n = 0;
    for (const auto& p : parts) {
        if (p.rank() != 2 || p.extent(0) != m) throw DimensionError("concat_cols: row mismatch");
        n += p.extent(1);
    }
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    std::vector<std::shared_ptr<Node>> parents;
    std::vector<int> col_offsets;
    std::vector<int> widths;
    int off = 0;
    for (const auto& p : parts) {
        const int w = p.extent(1);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
                out[static_cast<std::size_t>(i) * n + off + j] = p.data()[static_cast<std::size_t>(i) * w + j];
        parents.push_back(p.node());
        col_offsets.push_back(off);
        widths.push_back(w);
        off += w;
    }
    return make_op({m, n}, std::move(out), parents,
                   [parents, col_offsets, widths, m, n](Node& node) {
                       for (std::size_t k = 0; k < parents.size(); ++k) {
                           auto& p = parents[k];
                           if (!p->requires_grad) continue;
                           p->ensure_grad();
                           const int w = widths[k];
                           const int off = col_offsets[k];
                           for (int i = 0; i < m; ++i)
                               for (int j = 0; j < w; ++j)
                                   p->grad[static_cast<std::size_t>(i) * w + j] +=
                                       node.grad[static_cast<std::size_t>(i) * n + off + j];
                       }
                   },
                   "concat_cols");
}

Tensor stack0(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("stack0: no inputs");
    const auto& s0 = parts[0].shape();
    std::vector<double> out;
    out.reserve(parts.size() * parts[0].data().size());
    std::vector<std::shared_ptr<Node>> parents;
    for (const auto& p : parts) {
        if (p.shape() != s0) throw DimensionError("stack0: shape mismatch");
        out.insert(out.end(), p.data().begin(), p.data().end());
        parents.push_back(p.node());
    }
    std::vector<int> shape;
    shape.push_back(static_cast<int>(parts.size()));
    shape.insert(shape.end(), s0.begin(), s0.end());
    const std::size_t block = parts[0].data().size();
    return make_op(std::move(shape), std::move(out), parents,
                   [parents, block](Node& node) {
                       for (std::size_t k = 0; k < parents.size(); ++k) {
                           auto& p = parents[k];
                           if (!p->requires_grad) continue;
                           p->ensure_grad();
                           for (std::size_t i = 0; i < block; ++i) p->grad[i] += node.grad[k * block + i];
                       }
                   },
                   "stack0");
}

Tensor index0(const Tensor& x, int i) {
    if (x.rank() < 1) throw DimensionError("index0: rank >= 1 required");
    const int k = x.extent(0);
    if (i < 0 || i >= k) throw DimensionError("index0: index out of range");
    std::vector<int> shape(x.shape().begin() + 1, x.shape().end());
    if (shape.empty()) shape.push_back(1);
    const std::size_t block = static_cast<std::size_t>(shape_size(shape));
    std::vector<double> out(x.data().begin() + static_cast<std::ptrdiff_t>(i) * block,
                            x.data().begin() + static_cast<std::ptrdiff_t>(i + 1) * block);
    auto px = x.node();
    return make_op(std::move(shape), std::move(out), {px},
                   [px, i, block](Node& node) {
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       for (std::size_t j = 0; j < block; ++j) px->grad[i * block + j] += node.grad[j];
                   },
                   "index0");
}

Tensor gather(const Tensor& x, const std::vector<int>& flat_indices) {
    std::vector<double> out(flat_indices.size());
    for (std::size_t k = 0; k < flat_indices.size(); ++k) {
        const int idx = flat_indices[k];
        if (idx < 0 || idx >= x.size()) throw DimensionError("gather: index out of range");
        out[k] = x.data()[static_cast<std::size_t>(idx)];
    }
    auto px = x.node();
    auto indices = flat_indices;
    return make_op({static_cast<int>(flat_indices.size())}, std::move(out), {px},
                   [px, indices](Node& node) {
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       for (std::size_t k = 0; k < indices.size(); ++k)
                           px->grad[static_cast<std::size_t>(indices[k])] += node.grad[k];
                   },
                   "gather");
}

// ---------------------------------------------------------------------------
// Neural-net building blocks
// ---------------------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.rank() != 2) throw DimensionError("layer_norm: rank-2 input required");
    const int m = x.extent(0), n = x.extent(1);
    if (gamma.size() != n || beta.size() != n) throw DimensionError("layer_norm: scale/shift length mismatch");

    std::vector<double> out(x.data().size());
    std::vector<double> xhat(x.data().size());
    std::vector<double> inv_sigma(static_cast<std::size_t>(m));
    const double* X = x.data().data();
    for (int i = 0; i < m; ++i) {
        double mu = 0.0;
        for (int j = 0; j < n; ++j) mu += X[i * n + j];
        mu /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = X[i * n + j] - mu;
            var += d * d;
        }
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_sigma[static_cast<std::size_t>(i)] = is;
        for (int j = 0; j < n; ++j) {
            const double xh = (X[i * n + j] - mu) * is;
            xhat[static_cast<std::size_t>(i) * n + j] = xh;
            out[static_cast<std::size_t>(i) * n + j] = gamma.data()[static_cast<std::size_t>(j)] * xh +
                                                       beta.data()[static_cast<std::size_t>(j)];
        }
    }
    auto px = x.node();
    auto pg = gamma.node();
    auto pb = beta.node();
    return make_op({m, n}, std::move(out), {px, pg, pb},
                   [px, pg, pb, xhat, inv_sigma, m, n](Node& node) {
                       const double* G = node.grad.data();
                       if (pg->requires_grad) {
                           pg->ensure_grad();
                           for (int i = 0; i < m; ++i)
                               for (int j = 0; j < n; ++j)
                                   pg->grad[static_cast<std::size_t>(j)] +=
                                       G[i * n + j] * xhat[static_cast<std::size_t>(i) * n + j];
                       }
                       if (pb->requires_grad) {
                           pb->ensure_grad();
                           for (int i = 0; i < m; ++i)
                               for (int j = 0; j < n; ++j) pb->grad[static_cast<std::size_t>(j)] += G[i * n + j];
                       }
                       if (px->requires_grad) {
                           px->ensure_grad();
                           for (int i = 0; i < m; ++i) {
                               double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                               for (int j = 0; j < n; ++j) {
                                   const double dxh = G[i * n + j] * pg->data[static_cast<std::size_t>(j)];
                                   mean_dxhat += dxh;
                                   mean_dxhat_xhat += dxh * xhat[static_cast<std::size_t>(i) * n + j];
                               }
                               mean_dxhat /= n;
                               mean_dxhat_xhat /= n;
                               const double is = inv_sigma[static_cast<std::size_t>(i)];
                               for (int j = 0; j < n; ++j) {
                                   const double dxh = G[i * n + j] * pg->data[static_cast<std::size_t>(j)];
                                   px->grad[static_cast<std::size_t>(i) * n + j] +=
                                       is * (dxh - mean_dxhat -
                                             xhat[static_cast<std::size_t>(i) * n + j] * mean_dxhat_xhat);
                               }
                           }
                       }
                   },
                   "layer_norm");
}

namespace {

struct ConvDims {
    int n, cin, h, w;
    int cout, kh, kw;
    int oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int padding) {
    if (x.rank() != 4 || w.rank() != 4) throw DimensionError("conv2d: rank-4 input and kernel required");
    if (stride < 1) throw DimensionError("conv2d: stride must be >= 1");
    if (padding < 0) throw DimensionError("conv2d: padding must be >= 0");
    ConvDims d{};
    d.n = x.extent(0);
    d.cin = x.extent(1);
    d.h = x.extent(2);
    d.w = x.extent(3);
    d.cout = w.extent(0);
    d.kh = w.extent(2);
    d.kw = w.extent(3);
    if (w.extent(1) != d.cin) throw DimensionError("conv2d: channel mismatch");
    if (d.kh > d.h + 2 * padding || d.kw > d.w + 2 * padding)
        throw DimensionError("conv2d: kernel larger than padded input");
    d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
    d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
    return d;
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    const ConvDims d = conv_dims(x, w, stride, padding);
    const bool has_bias = bias.defined();
    if (has_bias && bias.size() != d.cout) throw DimensionError("conv2d: bias length mismatch");

    std::vector<double> out(static_cast<std::size_t>(d.n) * d.cout * d.oh * d.ow, 0.0);
    const double* X = x.data().data();
    const double* W = w.data().data();
    for (int nn = 0; nn < d.n; ++nn) {
        for (int co = 0; co < d.cout; ++co) {
            const double b = has_bias ? bias.data()[static_cast<std::size_t>(co)] : 0.0;
            for (int oy = 0; oy < d.oh; ++oy) {
                for (int ox = 0; ox < d.ow; ++ox) {
                    double acc = b;
                    const int iy0 = oy * stride - padding;
                    const int ix0 = ox * stride - padding;
                    for (int ci = 0; ci < d.cin; ++ci) {
                        const double* xp = X + ((nn * d.cin + ci) * d.h) * d.w;
                        const double* wp = W + ((co * d.cin + ci) * d.kh) * d.kw;
                        for (int ky = 0; ky < d.kh; ++ky) {
                            const int iy = iy0 + ky;
                            if (iy < 0 || iy >= d.h) continue;
                            for (int kx = 0; kx < d.kw; ++kx) {
                                const int ix = ix0 + kx;
                                if (ix < 0 || ix >= d.w) continue;
                                acc += xp[iy * d.w + ix] * wp[ky * d.kw + kx];
                            }
                        }
                    }
                    out[static_cast<std::size_t>(((nn * d.cout + co) * d.oh + oy)) * d.ow + ox] = acc;
                }
            }
        }
    }

    auto px = x.node();
    auto pw = w.node();
    auto pb = has_bias ? bias.node() : nullptr;
    std::vector<std::shared_ptr<Node>> parents{px, pw};
    if (pb) parents.push_back(pb);
    return make_op({d.n, d.cout, d.oh, d.ow}, std::move(out), parents,
                   [px, pw, pb, d, stride, padding](Node& node) {
                       const double* G = node.grad.data();
                       if (pb && pb->requires_grad) {
                           pb->ensure_grad();
                           for (int nn = 0; nn < d.n; ++nn)
                               for (int co = 0; co < d.cout; ++co) {
                                   double s = 0.0;
                                   const double* gp = G + ((nn * d.cout + co) * d.oh) * d.ow;
                                   for (int i = 0; i < d.oh * d.ow; ++i) s += gp[i];
                                   pb->grad[static_cast<std::size_t>(co)] += s;
                               }
                       }
                       const bool need_x = px->requires_grad;
                       const bool need_w = pw->requires_grad;
                       if (!need_x && !need_w) return;
                       if (need_x) px->ensure_grad();
                       if (need_w) pw->ensure_grad();
                       const double* X = px->data.data();
                       const double* W = pw->data.data();
                       for (int nn = 0; nn < d.n; ++nn) {
                           for (int co = 0; co < d.cout; ++co) {
                               const double* gp = G + ((nn * d.cout + co) * d.oh) * d.ow;
                               for (int oy = 0; oy < d.oh; ++oy) {
                                   for (int ox = 0; ox < d.ow; ++ox) {
                                       const double g = gp[oy * d.ow + ox];
                                       if (g == 0.0) continue;
                                       const int iy0 = oy * stride - padding;
                                       const int ix0 = ox * stride - padding;
                                       for (int ci = 0; ci < d.cin; ++ci) {
                                           const double* xp = X + ((nn * d.cin + ci) * d.h) * d.w;
                                           const double* wp = W + ((co * d.cin + ci) * d.kh) * d.kw;
                                           double* gxp = need_x ? px->grad.data() + ((nn * d.cin + ci) * d.h) * d.w : nullptr;
                                           double* gwp = need_w ? pw->grad.data() + ((co * d.cin + ci) * d.kh) * d.kw : nullptr;
                                           for (int ky = 0; ky < d.kh; ++ky) {
                                               const int iy = iy0 + ky;
                                               if (iy < 0 || iy >= d.h) continue;
                                               for (int kx = 0; kx < d.kw; ++kx) {
                                                   const int ix = ix0 + kx;
                                                   if (ix < 0 || ix >= d.w) continue;
                                                   if (need_x) gxp[iy * d.w + ix] += g * wp[ky * d.kw + kx];
                                                   if (need_w) gwp[ky * d.kw + kx] += g * xp[iy * d.w + ix];
                                               }
                                           }
                                       }
                                   }
                               }
                           }
                       }
                   },
                   "conv2d");
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var,
                  bool training, double momentum, double eps) {
    if (x.rank() != 4) throw DimensionError("batch_norm: rank-4 input required");
    const int n = x.extent(0), c = x.extent(1), h = x.extent(2), w = x.extent(3);
    if (gamma.size() != c || beta.size() != c || running_mean.size() != c || running_var.size() != c)
        throw DimensionError("batch_norm: per-channel parameter length mismatch");

    const int spatial = h * w;
    const int count = n * spatial;
    std::vector<double> mu(static_cast<std::size_t>(c)), var(static_cast<std::size_t>(c));
    const double* X = x.data().data();
    if (training) {
        for (int ci = 0; ci < c; ++ci) {
            double m = 0.0;
            for (int nn = 0; nn < n; ++nn) {
                const double* xp = X + ((nn * c + ci) * spatial);
                for (int i = 0; i < spatial; ++i) m += xp[i];
            }
            m /= count;
            double v = 0.0;
            for (int nn = 0; nn < n; ++nn) {
                const double* xp = X + ((nn * c + ci) * spatial);
                for (int i = 0; i < spatial; ++i) {
                    const double dd = xp[i] - m;
                    v += dd * dd;
                }
            }
            v /= count;
            mu[static_cast<std::size_t>(ci)] = m;
            var[static_cast<std::size_t>(ci)] = v;
        }
        // Update running statistics in place (plain buffers, no gradient).
        auto& rm = running_mean.raw_data();
        auto& rv = running_var.raw_data();
        for (int ci = 0; ci < c; ++ci) {
            rm[static_cast<std::size_t>(ci)] =
                (1.0 - momentum) * rm[static_cast<std::size_t>(ci)] + momentum * mu[static_cast<std::size_t>(ci)];
            rv[static_cast<std::size_t>(ci)] =
                (1.0 - momentum) * rv[static_cast<std::size_t>(ci)] + momentum * var[static_cast<std::size_t>(ci)];
        }
    } else {
        for (int ci = 0; ci < c; ++ci) {
            mu[static_cast<std::size_t>(ci)] = running_mean.data()[static_cast<std::size_t>(ci)];
            var[static_cast<std::size_t>(ci)] = running_var.data()[static_cast<std::size_t>(ci)];
        }
    }

    std::vector<double> inv_sigma(static_cast<std::size_t>(c));
    for (int ci = 0; ci < c; ++ci)
        inv_sigma[static_cast<std::size_t>(ci)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(ci)] + eps);

    std::vector<double> out(x.data().size());
    std::vector<double> xhat(x.data().size());
    for (int nn = 0; nn < n; ++nn) {
        for (int ci = 0; ci < c; ++ci) {
            const double m = mu[static_cast<std::size_t>(ci)];
            const double is = inv_sigma[static_cast<std::size_t>(ci)];
            const double g = gamma.data()[static_cast<std::size_t>(ci)];
            const double b = beta.data()[static_cast<std::size_t>(ci)];
            const std::size_t base = static_cast<std::size_t>((nn * c + ci)) * spatial;
            for (int i = 0; i < spatial; ++i) {
                const double xh = (X[base + i] - m) * is;
                xhat[base + i] = xh;
                out[base + i] = g * xh + b;
            }
        }
    }

    auto px = x.node();
    auto pg = gamma.node();
    auto pb = beta.node();
    return make_op({n, c, h, w}, std::move(out), {px, pg, pb},
                   [px, pg, pb, xhat, inv_sigma, n, c, spatial, count, training](Node& node) {
                       const double* G = node.grad.data();
                       if (pg->requires_grad) {
                           pg->ensure_grad();
                           for (int nn = 0; nn < n; ++nn)
                               for (int ci = 0; ci < c; ++ci) {
                                   const std::size_t base = static_cast<std::size_t>((nn * c + ci)) * spatial;
                                   double s = 0.0;
                                   for (int i = 0; i < spatial; ++i) s += G[base + i] * xhat[base + i];
                                   pg->grad[static_cast<std::size_t>(ci)] += s;
                               }
                       }
                       if (pb->requires_grad) {
                           pb->ensure_grad();
                           for (int nn = 0; nn < n; ++nn)
                               for (int ci = 0; ci < c; ++ci) {
                                   const std::size_t base = static_cast<std::size_t>((nn * c + ci)) * spatial;
                                   double s = 0.0;
                                   for (int i = 0; i < spatial; ++i) s += G[base + i];
                                   pb->grad[static_cast<std::size_t>(ci)] += s;
                               }
                       }
                       if (!px->requires_grad) return;
                       px->ensure_grad();
                       for (int ci = 0; ci < c; ++ci) {
                           const double g = pg->data[static_cast<std::size_t>(ci)];
                           const double is = inv_sigma[static_cast<std::size_t>(ci)];
                           if (training) {
                               double mean_d = 0.0, mean_dx = 0.0;
                               for (int nn = 0; nn < n; ++nn) {
                                   const std::size_t base = static_cast<std::size_t>((nn * c + ci)) * spatial;
                                   for (int i = 0; i < spatial; ++i) {
                                       const double dxh = G[base + i] * g;
                                       mean_d += dxh;
                                       mean_dx += dxh * xhat[base + i];
                                   }
                               }
                               mean_d /= count;
                               mean_dx /= count;
                               for (int nn = 0; nn < n; ++nn) {
                                   const std::size_t base = static_cast<std::size_t>((nn * c + ci)) * spatial;
                                   for (int i = 0; i < spatial; ++i) {
                                       const double dxh = G[base + i] * g;
                                       px->grad[base + i] += is * (dxh - mean_d - xhat[base + i] * mean_dx);
                                   }
                               }
                           } else {
                               for (int nn = 0; nn < n; ++nn) {
                                   const std::size_t base = static_cast<std::size_t>((nn * c + ci)) * spatial;
                                   for (int i = 0; i < spatial; ++i) px->grad[base + i] += G[base + i] * g * is;
                               }
                           }
                       }
                   },
                   "batch_norm");
}

} // namespace umda
