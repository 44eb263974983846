#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ddg/errors.hpp"
#include "ddg/tensor.hpp"

namespace ddg {

// Named, trainable tensor. grad always matches value's shape.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

    void zero_grad() { grad.fill(0.0); }
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
struct Value {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& val() const;
};

// Reverse-mode tape, rebuilt per forward pass. Nodes are appended in
// topological order, so backward is a single reverse sweep.
class Tape {
public:
    Value constant(Tensor v) {
        v.require_finite("Tape::constant");
        return push(std::move(v), nullptr);
    }

    // Leaf referencing a Param; after backward() the node's gradient is
    // accumulated into p.grad. One node per Param per tape.
    Value leaf(Param& p) {
        for (auto& [id, q] : param_leaves_)
            if (q == &p) return Value{this, id};
        Value v = push(p.value, nullptr);
        param_leaves_.emplace_back(v.id, &p);
        return v;
    }

    const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }

    Tensor& grad_of(std::size_t id) {
        Node& n = nodes_[id];
        if (n.grad.numel() == 0) n.grad = Tensor::zeros_like(n.value);
        return n.grad;
    }

    // Backpropagates d(loss)/d(node) for every node reachable from `loss`,
    // then accumulates leaf gradients into their Params. A second backward on
    // the same tape requires clear_grads() first.
    void backward(Value loss) {
        if (loss.tape != this) throw Error("backward: value does not belong to this tape");
        const Tensor& lv = nodes_[loss.id].value;
        if (lv.numel() != 1)
            throw ShapeError("backward: loss must be scalar, got shape " + shape_str(lv.shape()));
        if (consumed_)
            throw Error("backward: tape already consumed; run a fresh forward or clear_grads()");
        consumed_ = true;

        grad_of(loss.id)[0] = 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.grad.numel() == 0 || !n.backward) continue;
            n.backward(*this, n.grad);
        }

        reached_param_ = false;
        for (auto& [id, p] : param_leaves_) {
            Node& n = nodes_[id];
            if (n.grad.numel() == 0) continue;
            reached_param_ = true;
            for (std::size_t k = 0; k < n.grad.numel(); ++k) p->grad[k] += n.grad[k];
        }
    }

    // True if the last backward reached at least one Param leaf; a detached
    // graph leaves this false and all Param grads untouched.
    bool backward_reached_param() const { return reached_param_; }

    void clear_grads() {
        for (Node& n : nodes_) n.grad = Tensor();
        consumed_ = false;
    }

    std::size_t size() const { return nodes_.size(); }

    using BackwardFn = std::function<void(Tape&, const Tensor&)>;

    Value push(Tensor v, BackwardFn fn) {
        nodes_.push_back(Node{std::move(v), Tensor(), std::move(fn)});
        return Value{this, nodes_.size() - 1};
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;  // empty until touched by backward
        BackwardFn backward;
    };

    std::vector<Node> nodes_;
    std::vector<std::pair<std::size_t, Param*>> param_leaves_;
    bool consumed_ = false;
    bool reached_param_ = false;
};

inline const Tensor& Value::val() const { return tape->value_of(id); }

namespace detail {

inline Tape& same_tape(Value a, Value b, const char* op) {
    if (a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
    return *a.tape;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---- operation set ---------------------------------------------------------

// matmul: [m,k]x[k,n] -> [m,n]; also accepts a rank-1 left operand [k] -> [n].
inline Value matmul(Value a, Value b) {
    Tape& t = detail::same_tape(a, b, "matmul");
    const Tensor& A = a.val();
    const Tensor& B = b.val();
    if (B.rank() != 2)
        throw ShapeError("matmul: right operand must be rank-2, got " + shape_str(B.shape()));
    const bool vec = A.rank() == 1;
    if (!vec && A.rank() != 2)
        throw ShapeError("matmul: left operand must be rank-1 or rank-2, got " +
                         shape_str(A.shape()));
    const std::size_t m = vec ? 1 : A.dim(0);
    const std::size_t k = vec ? A.dim(0) : A.dim(1);
    const std::size_t n = B.dim(1);
    if (k != B.dim(0))
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(A.shape()) + " x " +
                         shape_str(B.shape()));

    Tensor out(vec ? Shape{n} : Shape{m, n});
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = A.data() + i * k;
        double* orow = out.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = B.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    out.require_finite("matmul");

    auto fn = [a, b, m, k, n](Tape& tp, const Tensor& g) {
        const Tensor& A = tp.value_of(a.id);
        const Tensor& B = tp.value_of(b.id);
        Tensor& ga = tp.grad_of(a.id);
        Tensor& gb = tp.grad_of(b.id);
        // dA += g * B^T
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t kk = 0; kk < k; ++kk) {
                double s = 0.0;
                const double* grow = g.data() + i * n;
                const double* brow = B.data() + kk * n;
                for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                ga[i * k + kk] += s;
            }
        // dB += A^T * g
        for (std::size_t kk = 0; kk < k; ++kk)
            for (std::size_t i = 0; i < m; ++i) {
                const double av = A[i * k + kk];
                if (av == 0.0) continue;
                const double* grow = g.data() + i * n;
                double* gbrow = gb.data() + kk * n;
                for (std::size_t j = 0; j < n; ++j) gbrow[j] += av * grow[j];
            }
    };
    return t.push(std::move(out), std::move(fn));
}

// add_bias: x [m,n] + b [n] broadcast over rows; rank-1 x [n] + b [n] adds directly.
inline Value add_bias(Value x, Value b) {
    Tape& t = detail::same_tape(x, b, "add_bias");
    const Tensor& X = x.val();
    const Tensor& B = b.val();
    if (B.rank() != 1)
        throw ShapeError("add_bias: bias must be rank-1, got " + shape_str(B.shape()));
    const std::size_t n = B.dim(0);
    const std::size_t m = X.rank() == 1 ? 1 : X.dim(0);
    const std::size_t xn = X.rank() == 1 ? X.dim(0) : X.dim(1);
    if (X.rank() > 2 || xn != n)
        throw ShapeError("add_bias: shape mismatch " + shape_str(X.shape()) + " vs " +
                         shape_str(B.shape()));

    Tensor out = X;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += B[j];
    out.require_finite("add_bias");

    auto fn = [x, b, m, n](Tape& tp, const Tensor& g) {
        Tensor& gx = tp.grad_of(x.id);
        Tensor& gb = tp.grad_of(b.id);
        for (std::size_t k = 0; k < g.numel(); ++k) gx[k] += g[k];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    };
    return t.push(std::move(out), std::move(fn));
}

inline Value add(Value a, Value b) {
    Tape& t = detail::same_tape(a, b, "add");
    const Tensor& A = a.val();
    const Tensor& B = b.val();
    detail::check_same_shape(A, B, "add");
    Tensor out = A;
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] += B[k];
    out.require_finite("add");
    auto fn = [a, b](Tape& tp, const Tensor& g) {
        Tensor& ga = tp.grad_of(a.id);
        Tensor& gb = tp.grad_of(b.id);
        for (std::size_t k = 0; k < g.numel(); ++k) {
            ga[k] += g[k];
            gb[k] += g[k];
        }
    };
    return t.push(std::move(out), std::move(fn));
}

inline Value sub(Value a, Value b) {
    Tape& t = detail::same_tape(a, b, "sub");
    const Tensor& A = a.val();
    const Tensor& B = b.val();
    detail::check_same_shape(A, B, "sub");
    Tensor out = A;
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] -= B[k];
    out.require_finite("sub");
    auto fn = [a, b](Tape& tp, const Tensor& g) {
        Tensor& ga = tp.grad_of(a.id);
        Tensor& gb = tp.grad_of(b.id);
        for (std::size_t k = 0; k < g.numel(); ++k) {
            ga[k] += g[k];
            gb[k] -= g[k];
        }
    };
    return t.push(std::move(out), std::move(fn));
}

inline Value relu(Value x) {
    Tape& t = *x.tape;
    Tensor out = x.val();
    for (std::size_t k = 0; k < out.numel(); ++k)
        if (out[k] < 0.0) out[k] = 0.0;
    auto fn = [x](Tape& tp, const Tensor& g) {
        const Tensor& X = tp.value_of(x.id);
        Tensor& gx = tp.grad_of(x.id);
        for (std::size_t k = 0; k < g.numel(); ++k)
            if (X[k] > 0.0) gx[k] += g[k];
    };
    return t.push(std::move(out), std::move(fn));
}

inline Value sigmoid(Value x) {
    Tape& t = *x.tape;
    Tensor out = x.val();
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] = 1.0 / (1.0 + std::exp(-out[k]));
    out.require_finite("sigmoid");
    // ds/dx = s(1-s), recomputed from the input
    auto fn = [x](Tape& tp, const Tensor& g) {
        const Tensor& X = tp.value_of(x.id);
        Tensor& gx = tp.grad_of(x.id);
        for (std::size_t k = 0; k < g.numel(); ++k) {
            const double s = 1.0 / (1.0 + std::exp(-X[k]));
            gx[k] += g[k] * s * (1.0 - s);
        }
    };
    return t.push(std::move(out), std::move(fn));
}

// elementwise |x|; subgradient sign(x) with sign(0) = 0
inline Value abs(Value x) {
    Tape& t = *x.tape;
    Tensor out = x.val();
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] = std::fabs(out[k]);
    auto fn = [x](Tape& tp, const Tensor& g) {
        const Tensor& X = tp.value_of(x.id);
        Tensor& gx = tp.grad_of(x.id);
        for (std::size_t k = 0; k < g.numel(); ++k) {
            if (X[k] > 0.0)
                gx[k] += g[k];
            else if (X[k] < 0.0)
                gx[k] -= g[k];
        }
    };
    return t.push(std::move(out), std::move(fn));
}

inline Value scale(Value x, double c) {
    Tape& t = *x.tape;
    Tensor out = x.val();
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] *= c;
    out.require_finite("scale");
    auto fn = [x, c](Tape& tp, const Tensor& g) {
        Tensor& gx = tp.grad_of(x.id);
        for (std::size_t k = 0; k < g.numel(); ++k) gx[k] += c * g[k];
    };
    return t.push(std::move(out), std::move(fn));
}

inline Value add_scalar(Value x, double c) {
    Tape& t = *x.tape;
    Tensor out = x.val();
    for (std::size_t k = 0; k < out.numel(); ++k) out[k] += c;
    out.require_finite("add_scalar");
    auto fn = [x](Tape& tp, const Tensor& g) {
        Tensor& gx = tp.grad_of(x.id);
        for (std::size_t k = 0; k < g.numel(); ++k) gx[k] += g[k];
    };
    return t.push(std::move(out), std::move(fn));
}

// concatenate rank-1 tensors along the feature axis
inline Value concat(Value a, Value b) {
    Tape& t = detail::same_tape(a, b, "concat");
    const Tensor& A = a.val();
    const Tensor& B = b.val();
    if (A.rank() != 1 || B.rank() != 1)
        throw ShapeError("concat: expects rank-1 operands, got " + shape_str(A.shape()) +
                         " and " + shape_str(B.shape()));
    const std::size_t na = A.dim(0), nb = B.dim(0);
    Tensor out(Shape{na + nb});
    for (std::size_t k = 0; k < na; ++k) out[k] = A[k];
    for (std::size_t k = 0; k < nb; ++k) out[na + k] = B[k];
    auto fn = [a, b, na, nb](Tape& tp, const Tensor& g) {
        Tensor& ga = tp.grad_of(a.id);
        Tensor& gb = tp.grad_of(b.id);
        for (std::size_t k = 0; k < na; ++k) ga[k] += g[k];
        for (std::size_t k = 0; k < nb; ++k) gb[k] += g[na + k];
    };
    return t.push(std::move(out), std::move(fn));
}

// reduce to scalar; fixed left-to-right accumulation for determinism
inline Value reduce_sum(Value x) {
    Tape& t = *x.tape;
    const Tensor& X = x.val();
    double s = 0.0;
    for (std::size_t k = 0; k < X.numel(); ++k) s += X[k];
    Tensor out = Tensor::scalar(s);
    out.require_finite("reduce_sum");
    auto fn = [x](Tape& tp, const Tensor& g) {
        Tensor& gx = tp.grad_of(x.id);
        for (std::size_t k = 0; k < gx.numel(); ++k) gx[k] += g[0];
    };
    return t.push(std::move(out), std::move(fn));
}

inline Value reduce_mean(Value x) {
    const std::size_t n = x.val().numel();
    return scale(reduce_sum(x), 1.0 / static_cast<double>(n));
}

// softmax cross-entropy from logits with log-sum-exp stabilization
inline Value softmax_cross_entropy(Value logits, std::size_t label) {
    Tape& t = *logits.tape;
    const Tensor& L = logits.val();
    if (L.rank() != 1)
        throw ShapeError("softmax_cross_entropy: logits must be rank-1, got " +
                         shape_str(L.shape()));
    const std::size_t c = L.dim(0);
    if (label >= c)
        throw ConfigError("softmax_cross_entropy: label " + std::to_string(label) +
                          " out of range [0," + std::to_string(c) + ")");
    double mx = L[0];
    for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, L[k]);
    double se = 0.0;
    for (std::size_t k = 0; k < c; ++k) se += std::exp(L[k] - mx);
    const double lse = mx + std::log(se);
    Tensor out = Tensor::scalar(lse - L[label]);
    out.require_finite("softmax_cross_entropy");
    auto fn = [logits, label, c, mx, se](Tape& tp, const Tensor& g) {
        const Tensor& L = tp.value_of(logits.id);
        Tensor& gl = tp.grad_of(logits.id);
        for (std::size_t k = 0; k < c; ++k) {
            double p = std::exp(L[k] - mx) / se;
            gl[k] += g[0] * (p - (k == label ? 1.0 : 0.0));
        }
    };
    return t.push(std::move(out), std::move(fn));
}

// row-wise softmax cross-entropy over [m,C] logits, reduced to the mean
inline Value softmax_cross_entropy_batch(Value logits, const std::vector<std::size_t>& labels) {
    Tape& t = *logits.tape;
    const Tensor& L = logits.val();
    if (L.rank() != 2)
        throw ShapeError("softmax_cross_entropy_batch: logits must be rank-2, got " +
                         shape_str(L.shape()));
    const std::size_t m = L.dim(0), c = L.dim(1);
    if (labels.size() != m)
        throw ShapeError("softmax_cross_entropy_batch: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(m) + " rows");
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] >= c)
            throw ConfigError("softmax_cross_entropy_batch: label out of range in row " +
                              std::to_string(i));
        const double* row = L.data() + i * c;
        double mx = row[0];
        for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, row[k]);
        double se = 0.0;
        for (std::size_t k = 0; k < c; ++k) se += std::exp(row[k] - mx);
        total += mx + std::log(se) - row[labels[i]];
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(m));
    out.require_finite("softmax_cross_entropy_batch");
    auto fn = [logits, labels, m, c](Tape& tp, const Tensor& g) {
        const Tensor& L = tp.value_of(logits.id);
        Tensor& gl = tp.grad_of(logits.id);
        const double scale = g[0] / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double* row = L.data() + i * c;
            double mx = row[0];
            for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, row[k]);
            double se = 0.0;
            for (std::size_t k = 0; k < c; ++k) se += std::exp(row[k] - mx);
            for (std::size_t k = 0; k < c; ++k) {
                const double p = std::exp(row[k] - mx) / se;
                gl[i * c + k] += scale * (p - (k == labels[i] ? 1.0 : 0.0));
            }
        }
    };
    return t.push(std::move(out), std::move(fn));
}

// l1 distance as a composite: sum |a - b|
inline Value l1_distance(Value a, Value b) { return reduce_sum(abs(sub(a, b))); }

}  // namespace ddg
