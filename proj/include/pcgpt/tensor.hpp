#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "pcgpt/common.hpp"

// Dense row-major tensors with taped reverse-mode differentiation. Each op
// records a node whose parents link back through the expression; backward()
// replays the tape in reverse creation order, which is a valid reverse
// topological order because operands always exist before their results.

namespace pcgpt::num {

namespace detail {
inline uint64_t& node_counter() {
    thread_local uint64_t counter = 0;
    return counter;
}
inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}
}  // namespace detail

/// RAII guard disabling tape recording (inference paths).
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

template <class S>
struct Node {
    std::vector<int> shape;
    std::vector<S> value;
    std::vector<S> grad;  // sized on first use
    bool requires_grad = false;
    uint64_t id = 0;
    std::vector<std::shared_ptr<Node<S>>> parents;
    std::function<void(Node<S>&)> backprop;

    int64_t numel() const { return static_cast<int64_t>(value.size()); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), S(0));
    }
};

inline int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 1) throw std::invalid_argument("tensor shape dims must be positive");
        n *= d;
    }
    return n;
}

template <class S>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<S>> node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
        auto node = std::make_shared<Node<S>>();
        node->shape = std::move(shape);
        node->value.assign(static_cast<size_t>(shape_numel(node->shape)), S(0));
        node->requires_grad = requires_grad;
        node->id = detail::node_counter()++;
        return Tensor(std::move(node));
    }

    static Tensor from(std::vector<int> shape, std::vector<S> data, bool requires_grad = false) {
        if (shape_numel(shape) != static_cast<int64_t>(data.size()))
            throw std::invalid_argument("Tensor::from: data length does not match shape");
        auto node = std::make_shared<Node<S>>();
        node->shape = std::move(shape);
        node->value = std::move(data);
        node->requires_grad = requires_grad;
        node->id = detail::node_counter()++;
        return Tensor(std::move(node));
    }

    static Tensor scalar(S v, bool requires_grad = false) {
        return from({1}, {v}, requires_grad);
    }

    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev,
                        bool requires_grad = true) {
        Tensor t = zeros(std::move(shape), requires_grad);
        for (S& v : t.value()) v = static_cast<S>(rng.normal(0.0, stddev));
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    std::vector<S>& value() { return node_->value; }
    const std::vector<S>& value() const { return node_->value; }
    std::vector<S>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    bool requires_grad() const { return node_->requires_grad; }
    std::shared_ptr<Node<S>> node() const { return node_; }

    S item() const {
        if (node_->numel() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
        return node_->value[0];
    }

private:
    std::shared_ptr<Node<S>> node_;
};

namespace detail {

template <class S>
std::shared_ptr<Node<S>> make_result(std::vector<int> shape,
                                     std::vector<std::shared_ptr<Node<S>>> parents) {
    auto node = std::make_shared<Node<S>>();
    node->shape = std::move(shape);
    node->value.assign(static_cast<size_t>(shape_numel(node->shape)), S(0));
    bool needs_grad = false;
    if (grad_mode()) {
        for (const auto& p : parents)
            if (p->requires_grad) needs_grad = true;
    }
    node->requires_grad = needs_grad;
    if (needs_grad) node->parents = std::move(parents);
    node->id = node_counter()++;
    return node;
}

// C[R,n] += A[R,m] * B[m,n]
template <class S>
void mm_nn(const S* a, const S* b, S* c, int64_t rows, int64_t m, int64_t n) {
    for (int64_t r = 0; r < rows; ++r) {
        S* crow = c + r * n;
        const S* arow = a + r * m;
        for (int64_t k = 0; k < m; ++k) {
            const S av = arow[k];
            if (av == S(0)) continue;
            const S* brow = b + k * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[R,m] += A[R,n] * B[m,n]^T
template <class S>
void mm_nt(const S* a, const S* b, S* c, int64_t rows, int64_t n, int64_t m) {
    for (int64_t r = 0; r < rows; ++r) {
        const S* arow = a + r * n;
        S* crow = c + r * m;
        for (int64_t k = 0; k < m; ++k) {
            const S* brow = b + k * n;
            S acc = S(0);
            for (int64_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
            crow[k] += acc;
        }
    }
}

// C[m,n] += A[R,m]^T * B[R,n]
template <class S>
void mm_tn(const S* a, const S* b, S* c, int64_t rows, int64_t m, int64_t n) {
    for (int64_t r = 0; r < rows; ++r) {
        const S* arow = a + r * m;
        const S* brow = b + r * n;
        for (int64_t k = 0; k < m; ++k) {
            const S av = arow[k];
            if (av == S(0)) continue;
            S* crow = c + k * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

inline void check(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(msg);
}

}  // namespace detail

/// a [..., m] times b [m, n] -> [..., n]; leading dims of a are flattened.
template <class S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check(a.shape().size() >= 1 && b.shape().size() == 2,
                  "matmul: need a rank>=1 lhs and rank-2 rhs");
    const int m = b.shape()[0];
    const int n = b.shape()[1];
    detail::check(a.shape().back() == m, "matmul: inner dimensions disagree");
    const int64_t rows = a.numel() / m;

    std::vector<int> out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    auto node = detail::make_result<S>(std::move(out_shape), {a.node(), b.node()});
    detail::mm_nn(a.value().data(), b.value().data(), node->value.data(), rows, m, n);

    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backprop = [an, bn, rows, m, n](Node<S>& out) {
            if (an->requires_grad) {
                an->ensure_grad();
                detail::mm_nt(out.grad.data(), bn->value.data(), an->grad.data(), rows, n, m);
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                detail::mm_tn(an->value.data(), out.grad.data(), bn->grad.data(), rows, m, n);
            }
        };
    }
    return Tensor<S>(std::move(node));
}

/// Elementwise sum; b's shape must equal the trailing shape of a (broadcast
/// over a's leading dims) or match exactly.
template <class S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
    const auto& as = a.shape();
    const auto& bs = b.shape();
    detail::check(bs.size() <= as.size(), "add: rhs rank exceeds lhs rank");
    for (size_t i = 0; i < bs.size(); ++i)
        detail::check(bs[bs.size() - 1 - i] == as[as.size() - 1 - i],
                      "add: rhs shape is not a suffix of lhs shape");
    const int64_t bn_len = b.numel();
    const int64_t reps = a.numel() / bn_len;

    auto node = detail::make_result<S>(as, {a.node(), b.node()});
    const S* av = a.value().data();
    const S* bv = b.value().data();
    S* ov = node->value.data();
    for (int64_t r = 0; r < reps; ++r)
        for (int64_t i = 0; i < bn_len; ++i) ov[r * bn_len + i] = av[r * bn_len + i] + bv[i];

    if (node->requires_grad) {
        auto an = a.node();
        auto bnn = b.node();
        node->backprop = [an, bnn, reps, bn_len](Node<S>& out) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i];
            }
            if (bnn->requires_grad) {
                bnn->ensure_grad();
                for (int64_t r = 0; r < reps; ++r)
                    for (int64_t i = 0; i < bn_len; ++i)
                        bnn->grad[static_cast<size_t>(i)] +=
                            out.grad[static_cast<size_t>(r * bn_len + i)];
            }
        };
    }
    return Tensor<S>(std::move(node));
}

template <class S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
    detail::check(a.shape() == b.shape(), "mul: shapes must match");
    auto node = detail::make_result<S>(a.shape(), {a.node(), b.node()});
    for (size_t i = 0; i < node->value.size(); ++i) node->value[i] = a.value()[i] * b.value()[i];
    if (node->requires_grad) {
        auto an = a.node();
        auto bn = b.node();
        node->backprop = [an, bn](Node<S>& out) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (size_t i = 0; i < out.grad.size(); ++i)
                    an->grad[i] += out.grad[i] * bn->value[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (size_t i = 0; i < out.grad.size(); ++i)
                    bn->grad[i] += out.grad[i] * an->value[i];
            }
        };
    }
    return Tensor<S>(std::move(node));
}

template <class S>
Tensor<S> scale(const Tensor<S>& a, double c) {
    auto node = detail::make_result<S>(a.shape(), {a.node()});
    const S cs = static_cast<S>(c);
    for (size_t i = 0; i < node->value.size(); ++i) node->value[i] = a.value()[i] * cs;
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an, cs](Node<S>& out) {
            an->ensure_grad();
            for (size_t i = 0; i < out.grad.size(); ++i) an->grad[i] += out.grad[i] * cs;
        };
    }
    return Tensor<S>(std::move(node));
}

/// Softmax over the last dimension, numerically stabilized.
template <class S>
Tensor<S> softmax(const Tensor<S>& a) {
    const int dim = a.shape().back();
    const int64_t rows = a.numel() / dim;
    auto node = detail::make_result<S>(a.shape(), {a.node()});
    for (int64_t r = 0; r < rows; ++r) {
        const S* in = a.value().data() + r * dim;
        S* out = node->value.data() + r * dim;
        S mx = in[0];
        for (int i = 1; i < dim; ++i) mx = std::max(mx, in[i]);
        S sum = S(0);
        for (int i = 0; i < dim; ++i) {
            out[i] = std::exp(in[i] - mx);
            sum += out[i];
        }
        const S inv = S(1) / sum;
        for (int i = 0; i < dim; ++i) out[i] *= inv;
    }
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an, rows, dim](Node<S>& out) {
            an->ensure_grad();
            for (int64_t r = 0; r < rows; ++r) {
                const S* y = out.value.data() + r * dim;
                const S* dy = out.grad.data() + r * dim;
                S dot = S(0);
                for (int i = 0; i < dim; ++i) dot += dy[i] * y[i];
                S* dx = an->grad.data() + r * dim;
                for (int i = 0; i < dim; ++i) dx[i] += (dy[i] - dot) * y[i];
            }
        };
    }
    return Tensor<S>(std::move(node));
}

/// Layer normalization over the last dimension with learned gain and bias.
template <class S>
Tensor<S> layer_norm(const Tensor<S>& a, const Tensor<S>& gain, const Tensor<S>& bias,
                     double eps = 1e-5) {
    const int dim = a.shape().back();
    detail::check(gain.numel() == dim && bias.numel() == dim,
                  "layer_norm: gain/bias length must equal last dim");
    const int64_t rows = a.numel() / dim;
    auto node = detail::make_result<S>(a.shape(), {a.node(), gain.node(), bias.node()});

    // Normalized activations and per-row inverse stddev, kept for backward.
    auto xhat = std::make_shared<std::vector<S>>(a.value().size());
    auto inv_std = std::make_shared<std::vector<S>>(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const S* in = a.value().data() + r * dim;
        S mean = S(0);
        for (int i = 0; i < dim; ++i) mean += in[i];
        mean /= static_cast<S>(dim);
        S var = S(0);
        for (int i = 0; i < dim; ++i) var += (in[i] - mean) * (in[i] - mean);
        var /= static_cast<S>(dim);
        const S istd = S(1) / std::sqrt(var + static_cast<S>(eps));
        (*inv_std)[static_cast<size_t>(r)] = istd;
        S* xh = xhat->data() + r * dim;
        S* out = node->value.data() + r * dim;
        for (int i = 0; i < dim; ++i) {
            xh[i] = (in[i] - mean) * istd;
            out[i] = gain.value()[static_cast<size_t>(i)] * xh[i] +
                     bias.value()[static_cast<size_t>(i)];
        }
    }
    if (node->requires_grad) {
        auto an = a.node();
        auto gn = gain.node();
        auto bn = bias.node();
        node->backprop = [an, gn, bn, xhat, inv_std, rows, dim](Node<S>& out) {
            for (int64_t r = 0; r < rows; ++r) {
                const S* dy = out.grad.data() + r * dim;
                const S* xh = xhat->data() + r * dim;
                if (gn->requires_grad) {
                    gn->ensure_grad();
                    for (int i = 0; i < dim; ++i) gn->grad[static_cast<size_t>(i)] += dy[i] * xh[i];
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    for (int i = 0; i < dim; ++i) bn->grad[static_cast<size_t>(i)] += dy[i];
                }
                if (an->requires_grad) {
                    an->ensure_grad();
                    S* dx = an->grad.data() + r * dim;
                    S mean_dxhat = S(0), mean_dxhat_xhat = S(0);
                    for (int i = 0; i < dim; ++i) {
                        const S dxh = dy[i] * gn->value[static_cast<size_t>(i)];
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * xh[i];
                    }
                    mean_dxhat /= static_cast<S>(dim);
                    mean_dxhat_xhat /= static_cast<S>(dim);
                    const S istd = (*inv_std)[static_cast<size_t>(r)];
                    for (int i = 0; i < dim; ++i) {
                        const S dxh = dy[i] * gn->value[static_cast<size_t>(i)];
                        dx[i] += istd * (dxh - mean_dxhat - xh[i] * mean_dxhat_xhat);
                    }
                }
            }
        };
    }
    return Tensor<S>(std::move(node));
}

namespace detail {
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;
}  // namespace detail

/// GELU, tanh approximation.
template <class S>
Tensor<S> gelu(const Tensor<S>& a) {
    auto node = detail::make_result<S>(a.shape(), {a.node()});
    const double kC = detail::kGeluC;
    const double kA = detail::kGeluA;
    for (size_t i = 0; i < node->value.size(); ++i) {
        const double x = static_cast<double>(a.value()[i]);
        node->value[i] = static_cast<S>(0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x))));
    }
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an, kC, kA](Node<S>& out) {
            an->ensure_grad();
            for (size_t i = 0; i < out.grad.size(); ++i) {
                const double x = static_cast<double>(an->value[i]);
                const double u = kC * (x + kA * x * x * x);
                const double t = std::tanh(u);
                const double sech2 = 1.0 - t * t;
                const double d = 0.5 * (1.0 + t) + 0.5 * x * sech2 * kC * (1.0 + 3.0 * kA * x * x);
                an->grad[i] += out.grad[i] * static_cast<S>(d);
            }
        };
    }
    return Tensor<S>(std::move(node));
}

template <class S>
Tensor<S> relu(const Tensor<S>& a) {
    auto node = detail::make_result<S>(a.shape(), {a.node()});
    for (size_t i = 0; i < node->value.size(); ++i)
        node->value[i] = a.value()[i] > S(0) ? a.value()[i] : S(0);
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an](Node<S>& out) {
            an->ensure_grad();
            for (size_t i = 0; i < out.grad.size(); ++i)
                if (an->value[i] > S(0)) an->grad[i] += out.grad[i];
        };
    }
    return Tensor<S>(std::move(node));
}

/// Rows of `table` gathered by index: table [V, D], indices length n -> [n, D].
template <class S>
Tensor<S> embedding_lookup(const Tensor<S>& table, const std::vector<int>& indices) {
    detail::check(table.shape().size() == 2, "embedding_lookup: table must be rank 2");
    const int vocab = table.shape()[0];
    const int dim = table.shape()[1];
    for (int idx : indices)
        detail::check(idx >= 0 && idx < vocab, "embedding_lookup: index out of range");
    auto node = detail::make_result<S>({static_cast<int>(indices.size()), dim}, {table.node()});
    for (size_t r = 0; r < indices.size(); ++r)
        std::copy_n(table.value().data() + static_cast<int64_t>(indices[r]) * dim, dim,
                    node->value.data() + static_cast<int64_t>(r) * dim);
    if (node->requires_grad) {
        auto tn = table.node();
        auto idx = std::make_shared<std::vector<int>>(indices);
        node->backprop = [tn, idx, dim](Node<S>& out) {
            tn->ensure_grad();
            for (size_t r = 0; r < idx->size(); ++r) {
                S* dst = tn->grad.data() + static_cast<int64_t>((*idx)[r]) * dim;
                const S* src = out.grad.data() + static_cast<int64_t>(r) * dim;
                for (int i = 0; i < dim; ++i) dst[i] += src[i];
            }
        };
    }
    return Tensor<S>(std::move(node));
}

/// Concatenation along `axis`; all other dims must agree.
template <class S>
Tensor<S> concat(const std::vector<Tensor<S>>& parts, int axis) {
    detail::check(!parts.empty(), "concat: no inputs");
    const auto& base = parts[0].shape();
    const int rank = static_cast<int>(base.size());
    detail::check(axis >= 0 && axis < rank, "concat: axis out of range");
    std::vector<int> out_shape = base;
    int axis_total = 0;
    for (const auto& p : parts) {
        detail::check(static_cast<int>(p.shape().size()) == rank, "concat: rank mismatch");
        for (int d = 0; d < rank; ++d)
            if (d != axis)
                detail::check(p.shape()[d] == base[d], "concat: non-axis dims must match");
        axis_total += p.shape()[axis];
    }
    out_shape[axis] = axis_total;

    int64_t outer = 1, inner = 1;
    for (int d = 0; d < axis; ++d) outer *= base[d];
    for (int d = axis + 1; d < rank; ++d) inner *= base[d];

    std::vector<std::shared_ptr<Node<S>>> parents;
    for (const auto& p : parts) parents.push_back(p.node());
    auto node = detail::make_result<S>(out_shape, parents);

    const int64_t out_stride = static_cast<int64_t>(axis_total) * inner;
    int64_t offset = 0;
    for (const auto& p : parts) {
        const int64_t p_stride = static_cast<int64_t>(p.shape()[axis]) * inner;
        for (int64_t o = 0; o < outer; ++o)
            std::copy_n(p.value().data() + o * p_stride, p_stride,
                        node->value.data() + o * out_stride + offset);
        offset += p_stride;
    }
    if (node->requires_grad) {
        auto px = parents;
        auto sizes = std::make_shared<std::vector<int64_t>>();
        for (const auto& p : parts)
            sizes->push_back(static_cast<int64_t>(p.shape()[axis]) * inner);
        node->backprop = [px, sizes, outer, out_stride](Node<S>& out) {
            int64_t off = 0;
            for (size_t i = 0; i < px.size(); ++i) {
                const int64_t stride = (*sizes)[i];
                if (px[i]->requires_grad) {
                    px[i]->ensure_grad();
                    for (int64_t o = 0; o < outer; ++o) {
                        const S* src = out.grad.data() + o * out_stride + off;
                        S* dst = px[i]->grad.data() + o * stride;
                        for (int64_t j = 0; j < stride; ++j) dst[j] += src[j];
                    }
                }
                off += stride;
            }
        };
    }
    return Tensor<S>(std::move(node));
}

/// Inverted dropout: identity when not training or p == 0.
template <class S>
Tensor<S> dropout(const Tensor<S>& a, double p, bool train, Rng& rng) {
    detail::check(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
    if (!train || p == 0.0) return a;
    auto node = detail::make_result<S>(a.shape(), {a.node()});
    auto keep = std::make_shared<std::vector<uint8_t>>(a.value().size());
    const S scale_up = static_cast<S>(1.0 / (1.0 - p));
    for (size_t i = 0; i < node->value.size(); ++i) {
        const bool k = rng.uniform() >= p;
        (*keep)[i] = k;
        node->value[i] = k ? a.value()[i] * scale_up : S(0);
    }
    if (node->requires_grad) {
        auto an = a.node();
        node->backprop = [an, keep, scale_up](Node<S>& out) {
            an->ensure_grad();
            for (size_t i = 0; i < out.grad.size(); ++i)
                if ((*keep)[i]) an->grad[i] += out.grad[i] * scale_up;
        };
    }
    return Tensor<S>(std::move(node));
}

/// Weighted negative log-likelihood from raw logits. logits [..., V] is
/// treated as R rows; loss = sum_r weight[r] * (logsumexp(row) - row[target]).
template <class S>
Tensor<S> cross_entropy_from_logits(const Tensor<S>& logits, const std::vector<int>& targets,
                                    const std::vector<double>& weights) {
    const int vocab = logits.shape().back();
    const int64_t rows = logits.numel() / vocab;
    detail::check(static_cast<int64_t>(targets.size()) == rows,
                  "cross_entropy: one target per logit row required");
    detail::check(weights.empty() || static_cast<int64_t>(weights.size()) == rows,
                  "cross_entropy: weight count must match rows");
    for (int t : targets) detail::check(t >= 0 && t < vocab, "cross_entropy: target out of range");

    auto node = detail::make_result<S>({1}, {logits.node()});
    double total = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        const S* row = logits.value().data() + r * vocab;
        S mx = row[0];
        for (int i = 1; i < vocab; ++i) mx = std::max(mx, row[i]);
        double sum = 0.0;
        for (int i = 0; i < vocab; ++i) sum += std::exp(static_cast<double>(row[i] - mx));
        const double lse = std::log(sum) + static_cast<double>(mx);
        const double w = weights.empty() ? 1.0 / static_cast<double>(rows)
                                         : weights[static_cast<size_t>(r)];
        total += w * (lse - static_cast<double>(row[targets[static_cast<size_t>(r)]]));
    }
    node->value[0] = static_cast<S>(total);

    if (node->requires_grad) {
        auto ln = logits.node();
        auto tgt = std::make_shared<std::vector<int>>(targets);
        auto wts = std::make_shared<std::vector<double>>(weights);
        node->backprop = [ln, tgt, wts, rows, vocab](Node<S>& out) {
            ln->ensure_grad();
            const S dl = out.grad[0];
            for (int64_t r = 0; r < rows; ++r) {
                const S* row = ln->value.data() + r * vocab;
                S* drow = ln->grad.data() + r * vocab;
                S mx = row[0];
                for (int i = 1; i < vocab; ++i) mx = std::max(mx, row[i]);
                double sum = 0.0;
                for (int i = 0; i < vocab; ++i) sum += std::exp(static_cast<double>(row[i] - mx));
                const double w = wts->empty() ? 1.0 / static_cast<double>(rows)
                                              : (*wts)[static_cast<size_t>(r)];
                for (int i = 0; i < vocab; ++i) {
                    const double p = std::exp(static_cast<double>(row[i] - mx)) / sum;
                    const double onehot = i == (*tgt)[static_cast<size_t>(r)] ? 1.0 : 0.0;
                    drow[i] += dl * static_cast<S>(w * (p - onehot));
                }
            }
        };
    }
    return Tensor<S>(std::move(node));
}

/// Single-row convenience overload.
template <class S>
Tensor<S> cross_entropy_from_logits(const Tensor<S>& logits, int target_index) {
    detail::check(logits.shape().size() == 1, "cross_entropy: expected a logit vector");
    return cross_entropy_from_logits(logits, std::vector<int>{target_index},
                                     std::vector<double>{1.0});
}

/// Multi-head scaled-dot-product attention over q,k,v of shape [B, T, D] with
/// a shared boolean [T, T] visibility mask (true = may attend). Every row of
/// the mask must allow at least one position.
template <class S>
Tensor<S> attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v, int n_heads,
                    const std::vector<uint8_t>& mask) {
    detail::check(q.shape().size() == 3, "attention: q must be [B,T,D]");
    detail::check(q.shape() == k.shape() && q.shape() == v.shape(),
                  "attention: q/k/v shapes must match");
    const int B = q.shape()[0];
    const int T = q.shape()[1];
    const int D = q.shape()[2];
    detail::check(D % n_heads == 0, "attention: D must divide by n_heads");
    detail::check(static_cast<int>(mask.size()) == T * T, "attention: mask must be T*T");
    for (int i = 0; i < T; ++i) {
        bool any = false;
        for (int j = 0; j < T; ++j) any = any || mask[static_cast<size_t>(i * T + j)];
        detail::check(any, "attention: mask row with no visible position");
    }
    const int hd = D / n_heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(hd));

    auto node = detail::make_result<S>(q.shape(), {q.node(), k.node(), v.node()});
    // Attention probabilities kept for backward: [B, H, T, T].
    auto probs = std::make_shared<std::vector<S>>(
        static_cast<size_t>(B) * n_heads * T * T, S(0));

    const S* qv = q.value().data();
    const S* kv = k.value().data();
    const S* vv = v.value().data();
    S* ov = node->value.data();
    std::vector<S> scores(static_cast<size_t>(T));
    for (int b = 0; b < B; ++b) {
        for (int h = 0; h < n_heads; ++h) {
            const int off = h * hd;
            S* p_base = probs->data() + ((static_cast<int64_t>(b) * n_heads + h) * T) * T;
            for (int i = 0; i < T; ++i) {
                const S* qi = qv + (static_cast<int64_t>(b) * T + i) * D + off;
                S mx = std::numeric_limits<S>::lowest();
                for (int j = 0; j < T; ++j) {
                    if (!mask[static_cast<size_t>(i * T + j)]) continue;
                    const S* kj = kv + (static_cast<int64_t>(b) * T + j) * D + off;
                    S dot = S(0);
                    for (int d = 0; d < hd; ++d) dot += qi[d] * kj[d];
                    scores[static_cast<size_t>(j)] = dot * static_cast<S>(inv_sqrt);
                    mx = std::max(mx, scores[static_cast<size_t>(j)]);
                }
                S sum = S(0);
                S* prow = p_base + static_cast<int64_t>(i) * T;
                for (int j = 0; j < T; ++j) {
                    if (!mask[static_cast<size_t>(i * T + j)]) continue;
                    const S e = std::exp(scores[static_cast<size_t>(j)] - mx);
                    prow[j] = e;
                    sum += e;
                }
                const S inv = S(1) / sum;
                S* oi = ov + (static_cast<int64_t>(b) * T + i) * D + off;
                for (int d = 0; d < hd; ++d) oi[d] = S(0);
                for (int j = 0; j < T; ++j) {
                    if (!mask[static_cast<size_t>(i * T + j)]) continue;
                    prow[j] *= inv;
                    const S* vj = vv + (static_cast<int64_t>(b) * T + j) * D + off;
                    const S pj = prow[j];
                    for (int d = 0; d < hd; ++d) oi[d] += pj * vj[d];
                }
            }
        }
    }

    if (node->requires_grad) {
        auto qn = q.node();
        auto kn = k.node();
        auto vn = v.node();
        auto msk = std::make_shared<std::vector<uint8_t>>(mask);
        node->backprop = [qn, kn, vn, probs, msk, B, T, D, n_heads, hd, inv_sqrt](Node<S>& out) {
            qn->ensure_grad();
            kn->ensure_grad();
            vn->ensure_grad();
            std::vector<S> dp(static_cast<size_t>(T));
            for (int b = 0; b < B; ++b) {
                for (int h = 0; h < n_heads; ++h) {
                    const int off = h * hd;
                    const S* p_base =
                        probs->data() + ((static_cast<int64_t>(b) * n_heads + h) * T) * T;
                    for (int i = 0; i < T; ++i) {
                        const S* doi = out.grad.data() + (static_cast<int64_t>(b) * T + i) * D + off;
                        const S* prow = p_base + static_cast<int64_t>(i) * T;
                        // dP and dV
                        S dot = S(0);
                        for (int j = 0; j < T; ++j) {
                            if (!(*msk)[static_cast<size_t>(i * T + j)]) {
                                dp[static_cast<size_t>(j)] = S(0);
                                continue;
                            }
                            const S* vj = vn->value.data() +
                                          (static_cast<int64_t>(b) * T + j) * D + off;
                            S acc = S(0);
                            for (int d = 0; d < hd; ++d) acc += doi[d] * vj[d];
                            dp[static_cast<size_t>(j)] = acc;
                            dot += acc * prow[j];
                            S* dvj = vn->grad.data() + (static_cast<int64_t>(b) * T + j) * D + off;
                            const S pj = prow[j];
                            for (int d = 0; d < hd; ++d) dvj[d] += pj * doi[d];
                        }
                        // dS rows feed dQ and dK
                        const S* qi = qn->value.data() +
                                      (static_cast<int64_t>(b) * T + i) * D + off;
                        S* dqi = qn->grad.data() + (static_cast<int64_t>(b) * T + i) * D + off;
                        for (int j = 0; j < T; ++j) {
                            if (!(*msk)[static_cast<size_t>(i * T + j)]) continue;
                            const S ds = prow[j] * (dp[static_cast<size_t>(j)] - dot) *
                                         static_cast<S>(inv_sqrt);
                            if (ds == S(0)) continue;
                            const S* kj = kn->value.data() +
                                          (static_cast<int64_t>(b) * T + j) * D + off;
                            S* dkj = kn->grad.data() + (static_cast<int64_t>(b) * T + j) * D + off;
                            for (int d = 0; d < hd; ++d) {
                                dqi[d] += ds * kj[d];
                                dkj[d] += ds * qi[d];
                            }
                        }
                    }
                }
            }
        };
    }
    return Tensor<S>(std::move(node));
}

/// x [B, T, D] -> rows [start, start+len) of axis 1.
template <class S>
Tensor<S> slice_axis1(const Tensor<S>& x, int start, int len) {
    detail::check(x.shape().size() == 3, "slice_axis1: expected [B,T,D]");
    const int B = x.shape()[0];
    const int T = x.shape()[1];
    const int D = x.shape()[2];
    detail::check(start >= 0 && len >= 1 && start + len <= T, "slice_axis1: range out of bounds");
    auto node = detail::make_result<S>({B, len, D}, {x.node()});
    for (int b = 0; b < B; ++b)
        std::copy_n(x.value().data() + (static_cast<int64_t>(b) * T + start) * D,
                    static_cast<int64_t>(len) * D,
                    node->value.data() + static_cast<int64_t>(b) * len * D);
    if (node->requires_grad) {
        auto xn = x.node();
        node->backprop = [xn, B, T, D, start, len](Node<S>& out) {
            xn->ensure_grad();
            for (int b = 0; b < B; ++b) {
                const S* src = out.grad.data() + static_cast<int64_t>(b) * len * D;
                S* dst = xn->grad.data() + (static_cast<int64_t>(b) * T + start) * D;
                for (int64_t i = 0; i < static_cast<int64_t>(len) * D; ++i) dst[i] += src[i];
            }
        };
    }
    return Tensor<S>(std::move(node));
}

template <class S>
Tensor<S> reshape(const Tensor<S>& x, std::vector<int> new_shape) {
    detail::check(shape_numel(new_shape) == x.numel(), "reshape: element count must not change");
    auto node = detail::make_result<S>(std::move(new_shape), {x.node()});
    node->value = x.value();
    if (node->requires_grad) {
        auto xn = x.node();
        node->backprop = [xn](Node<S>& out) {
            xn->ensure_grad();
            for (size_t i = 0; i < out.grad.size(); ++i) xn->grad[i] += out.grad[i];
        };
    }
    return Tensor<S>(std::move(node));
}

template <class S>
Tensor<S> sum(const Tensor<S>& x) {
    auto node = detail::make_result<S>({1}, {x.node()});
    S total = S(0);
    for (S v : x.value()) total += v;
    node->value[0] = total;
    if (node->requires_grad) {
        auto xn = x.node();
        node->backprop = [xn](Node<S>& out) {
            xn->ensure_grad();
            for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += out.grad[0];
        };
    }
    return Tensor<S>(std::move(node));
}

/// Reverse-mode sweep from a scalar loss: accumulates dLoss/dX into the grad
/// of every requires_grad tensor reachable through the tape, then releases
/// the recorded closures (the graph is consumed).
template <class S>
void backward(const Tensor<S>& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be scalar");
    if (!loss.requires_grad() || !loss.node()->backprop)
        throw std::invalid_argument("backward: loss has no recorded graph");

    // Collect reachable nodes; reverse creation order is reverse-topological.
    std::vector<Node<S>*> order;
    std::unordered_set<Node<S>*> seen;
    std::vector<Node<S>*> stack = {loss.node().get()};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        Node<S>* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (const auto& p : n->parents)
            if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const Node<S>* a, const Node<S>* b) { return a->id > b->id; });

    loss.node()->ensure_grad();
    loss.node()->grad[0] = S(1);
    for (Node<S>* n : order) {
        if (!n->backprop) continue;
        if (n->grad.size() != n->value.size()) continue;  // no gradient flowed here
        n->backprop(*n);
        n->backprop = nullptr;
    }
}

}  // namespace pcgpt::num
