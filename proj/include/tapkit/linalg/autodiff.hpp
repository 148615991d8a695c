#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "tapkit/linalg/ops.hpp"

namespace tapkit::ad {

using NodeId = std::size_t;

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

    const Matrix& value() const;
    const Matrix& grad() const;
    NodeId id() const noexcept { return id_; }
    Tape* tape() const noexcept { return tape_; }
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }

private:
    Tape* tape_ = nullptr;
    NodeId id_ = 0;
};

/// Order in which backward() visits nodes. Both are valid reverse topological
/// orders; gradients come out bitwise identical because contributions to each
/// node are summed in consumer-id order regardless of visit order.
enum class Traversal { reverse_creation, depth_first };

/// Records matrix-valued nodes in creation order and runs reverse-mode
/// differentiation with per-op backward rules.
class Tape {
public:
    /// Fills grads[i] with d(loss)/d(input i) given the node's output gradient.
    /// Entries for inputs that do not require gradients may be left empty.
    using BackwardFn = std::function<void(const Tape& tape, NodeId self, const Matrix& out_grad,
                                          std::vector<Matrix>& grads)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value) { return push(std::move(value), {}, nullptr, false); }
    Var variable(Matrix value) { return push(std::move(value), {}, nullptr, true); }

    /// Records an op node. requires_grad is inherited from the inputs.
    Var record(Matrix value, std::vector<NodeId> inputs, BackwardFn backward) {
        bool needs = false;
        for (NodeId in : inputs) needs = needs || nodes_[in].requires_grad;
        return push(std::move(value), std::move(inputs), needs ? std::move(backward) : nullptr, needs);
    }

    const Matrix& value(NodeId id) const { return nodes_[id].value; }
    const Matrix& grad(NodeId id) const { return nodes_[id].grad; }
    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
    const std::vector<NodeId>& inputs(NodeId id) const { return nodes_[id].inputs; }
    std::size_t size() const noexcept { return nodes_.size(); }

    void backward(Var root, Traversal order = Traversal::reverse_creation) {
        const Matrix& out = value(root.id());
        if (out.rows() != 1 || out.cols() != 1) {
            throw Error(ErrorKind::dimension, "backward requires a scalar root, got " + out.shape_string());
        }
        for (auto& node : nodes_) node.grad = Matrix();

        std::vector<std::vector<Contribution>> pending(nodes_.size());
        pending[root.id()].push_back({root.id(), 0, Matrix(1, 1, 1.0)});

        std::vector<Matrix> grads;
        for (NodeId id : visit_order(root.id(), order)) {
            Node& node = nodes_[id];
            if (!node.requires_grad || pending[id].empty()) continue;
            node.grad = accumulate(pending[id], node.value);
            pending[id].clear();
            if (!node.backward) continue;
            grads.assign(node.inputs.size(), Matrix());
            node.backward(*this, id, node.grad, grads);
            for (std::size_t slot = 0; slot < node.inputs.size(); ++slot) {
                NodeId in = node.inputs[slot];
                if (!nodes_[in].requires_grad || grads[slot].empty()) continue;
                pending[in].push_back({id, slot, std::move(grads[slot])});
            }
        }
        for (auto& node : nodes_)
            if (node.requires_grad && node.grad.empty()) node.grad = Matrix(node.value.rows(), node.value.cols());
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::vector<NodeId> inputs;
        BackwardFn backward;
        bool requires_grad = false;
    };

    struct Contribution {
        NodeId consumer;
        std::size_t slot;
        Matrix grad;
    };

    Var push(Matrix value, std::vector<NodeId> inputs, BackwardFn backward, bool requires_grad) {
        nodes_.push_back(Node{std::move(value), Matrix(), std::move(inputs), std::move(backward), requires_grad});
        return Var(this, nodes_.size() - 1);
    }

    static Matrix accumulate(std::vector<Contribution>& parts, const Matrix& like) {
        Matrix total(like.rows(), like.cols());
        std::sort(parts.begin(), parts.end(), [](const Contribution& a, const Contribution& b) {
            return a.consumer != b.consumer ? a.consumer < b.consumer : a.slot < b.slot;
        });
        for (const auto& part : parts) total += part.grad;
        return total;
    }

    std::vector<NodeId> visit_order(NodeId root, Traversal order) const {
        std::vector<NodeId> result;
        if (order == Traversal::reverse_creation) {
            for (NodeId id = root + 1; id-- > 0;) result.push_back(id);
            return result;
        }
        // Iterative DFS post-order from the root, then reversed. Inputs are
        // pushed last-to-first so the visit differs from creation order.
        std::vector<char> state(nodes_.size(), 0);
        std::vector<std::pair<NodeId, std::size_t>> stack{{root, 0}};
        state[root] = 1;
        while (!stack.empty()) {
            auto& [id, next] = stack.back();
            const auto& ins = nodes_[id].inputs;
            if (next < ins.size()) {
                NodeId child = ins[ins.size() - 1 - next];
                ++next;
                if (!state[child]) {
                    state[child] = 1;
                    stack.emplace_back(child, 0);
                }
                continue;
            }
            result.push_back(id);
            stack.pop_back();
        }
        std::reverse(result.begin(), result.end());
        return result;
    }

    std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(id_); }
inline const Matrix& Var::grad() const { return tape_->grad(id_); }

namespace detail {
inline Tape& same_tape(const Var& a, const Var& b) {
    if (a.tape() != b.tape() || a.tape() == nullptr) throw Error(ErrorKind::input, "operands live on different tapes");
    return *a.tape();
}
} // namespace detail

inline Var matmul(Var a, Var b) {
    Tape& tape = detail::same_tape(a, b);
    return tape.record(tapkit::matmul(a.value(), b.value()), {a.id(), b.id()},
                       [a = a.id(), b = b.id()](const Tape& t, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                           if (t.requires_grad(a)) grads[0] = tapkit::matmul_nt(g, t.value(b));
                           if (t.requires_grad(b)) grads[1] = tapkit::matmul_tn(t.value(a), g);
                       });
}

/// a * b^T
inline Var matmul_nt(Var a, Var b) {
    Tape& tape = detail::same_tape(a, b);
    return tape.record(tapkit::matmul_nt(a.value(), b.value()), {a.id(), b.id()},
                       [a = a.id(), b = b.id()](const Tape& t, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                           if (t.requires_grad(a)) grads[0] = tapkit::matmul(g, t.value(b));
                           if (t.requires_grad(b)) grads[1] = tapkit::matmul_tn(g, t.value(a));
                       });
}

inline Var add(Var a, Var b) {
    Tape& tape = detail::same_tape(a, b);
    if (!a.value().same_shape(b.value())) {
        throw Error(ErrorKind::dimension, "add shape mismatch: " + a.value().shape_string() + " + " +
                                              b.value().shape_string());
    }
    return tape.record(a.value() + b.value(), {a.id(), b.id()},
                       [](const Tape&, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                           grads[0] = g;
                           grads[1] = g;
                       });
}

/// x + bias, where bias is 1 x cols and is broadcast over rows.
inline Var add_row(Var x, Var bias) {
    Tape& tape = detail::same_tape(x, bias);
    const Matrix& xv = x.value();
    const Matrix& bv = bias.value();
    if (bv.rows() != 1 || bv.cols() != xv.cols()) {
        throw Error(ErrorKind::dimension,
                    "row bias " + bv.shape_string() + " does not broadcast over " + xv.shape_string());
    }
    Matrix out = xv;
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bv(0, c);
    return tape.record(std::move(out), {x.id(), bias.id()},
                       [](const Tape&, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                           grads[0] = g;
                           Matrix gb(1, g.cols());
                           for (std::size_t r = 0; r < g.rows(); ++r)
                               for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
                           grads[1] = std::move(gb);
                       });
}

inline Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

inline Var scale(Var a, double s) {
    return a.tape()->record(a.value() * s, {a.id()},
                            [s](const Tape&, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                                grads[0] = g * s;
                            });
}

inline Var relu(Var a) {
    Matrix out = a.value();
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return a.tape()->record(std::move(out), {a.id()},
                            [a = a.id()](const Tape& t, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                                Matrix d = g;
                                const Matrix& x = t.value(a);
                                for (std::size_t i = 0; i < d.size(); ++i)
                                    if (!(x[i] > 0.0)) d[i] = 0.0;
                                grads[0] = std::move(d);
                            });
}

inline Var softmax_rows(Var a) {
    return a.tape()->record(tapkit::softmax_rows(a.value()), {a.id()},
                            [](const Tape& t, NodeId self, const Matrix& g, std::vector<Matrix>& grads) {
                                const Matrix& y = t.value(self);
                                Matrix d(y.rows(), y.cols());
                                for (std::size_t r = 0; r < y.rows(); ++r) {
                                    double dot = 0.0;
                                    for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                                    for (std::size_t c = 0; c < y.cols(); ++c) d(r, c) = y(r, c) * (g(r, c) - dot);
                                }
                                grads[0] = std::move(d);
                            });
}

/// Column-wise mean over rows: n x c -> 1 x c.
inline Var mean_rows(Var a) {
    const Matrix& x = a.value();
    if (x.rows() == 0) throw Error(ErrorKind::input, "mean_rows of an empty matrix");
    Matrix out(1, x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) out(0, c) += x(r, c);
    out *= 1.0 / static_cast<double>(x.rows());
    const std::size_t n = x.rows();
    return a.tape()->record(std::move(out), {a.id()},
                            [n](const Tape&, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                                Matrix d(n, g.cols());
                                for (std::size_t r = 0; r < n; ++r)
                                    for (std::size_t c = 0; c < g.cols(); ++c) d(r, c) = g(0, c) / static_cast<double>(n);
                                grads[0] = std::move(d);
                            });
}

/// [a | b] along columns.
inline Var concat_cols(Var a, Var b) {
    Tape& tape = detail::same_tape(a, b);
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.rows() != bv.rows()) {
        throw Error(ErrorKind::dimension, "concat_cols row mismatch: " + av.shape_string() + " | " + bv.shape_string());
    }
    Matrix out(av.rows(), av.cols() + bv.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) {
        std::copy(av.row(r).begin(), av.row(r).end(), out.row(r).begin());
        std::copy(bv.row(r).begin(), bv.row(r).end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(av.cols()));
    }
    const std::size_t split = av.cols();
    return tape.record(std::move(out), {a.id(), b.id()},
                       [split](const Tape&, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                           Matrix ga(g.rows(), split);
                           Matrix gb(g.rows(), g.cols() - split);
                           for (std::size_t r = 0; r < g.rows(); ++r) {
                               for (std::size_t c = 0; c < split; ++c) ga(r, c) = g(r, c);
                               for (std::size_t c = split; c < g.cols(); ++c) gb(r, c - split) = g(r, c);
                           }
                           grads[0] = std::move(ga);
                           grads[1] = std::move(gb);
                       });
}

/// Parameter-free layer normalization of each row.
inline Var layer_norm_rows(Var a, double eps = 1e-5) {
    const Matrix& x = a.value();
    Matrix y(x.rows(), x.cols());
    std::vector<double> inv_std(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double mean = 0.0;
        for (double v : x.row(r)) mean += v;
        mean /= static_cast<double>(x.cols());
        double var = 0.0;
        for (double v : x.row(r)) var += (v - mean) * (v - mean);
        var /= static_cast<double>(x.cols());
        inv_std[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < x.cols(); ++c) y(r, c) = (x(r, c) - mean) * inv_std[r];
    }
    return a.tape()->record(std::move(y), {a.id()},
                            [inv_std = std::move(inv_std)](const Tape& t, NodeId self, const Matrix& g,
                                                           std::vector<Matrix>& grads) {
                                const Matrix& y = t.value(self);
                                const double cols = static_cast<double>(y.cols());
                                Matrix d(y.rows(), y.cols());
                                for (std::size_t r = 0; r < y.rows(); ++r) {
                                    double g_mean = 0.0;
                                    double gy_mean = 0.0;
                                    for (std::size_t c = 0; c < y.cols(); ++c) {
                                        g_mean += g(r, c);
                                        gy_mean += g(r, c) * y(r, c);
                                    }
                                    g_mean /= cols;
                                    gy_mean /= cols;
                                    for (std::size_t c = 0; c < y.cols(); ++c)
                                        d(r, c) = inv_std[r] * (g(r, c) - g_mean - y(r, c) * gy_mean);
                                }
                                grads[0] = std::move(d);
                            });
}

/// Temporal im2col with edge replication: row t of the result holds rows
/// t - width/2 .. t + width/2 of x (clamped to [0, n)), concatenated.
/// width must be odd.
inline Var unfold_time(Var a, std::size_t width) {
    if (width % 2 == 0) throw Error(ErrorKind::input, "unfold_time width must be odd, got " + std::to_string(width));
    const Matrix& x = a.value();
    const std::size_t n = x.rows();
    const std::size_t c = x.cols();
    const auto half = static_cast<std::ptrdiff_t>(width / 2);
    auto source = [n, half](std::size_t t, std::size_t j) {
        auto s = static_cast<std::ptrdiff_t>(t) + static_cast<std::ptrdiff_t>(j) - half;
        return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(s, 0, static_cast<std::ptrdiff_t>(n) - 1));
    };
    Matrix out(n, width * c);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t j = 0; j < width; ++j) {
            auto src = x.row(source(t, j));
            std::copy(src.begin(), src.end(), out.row(t).begin() + static_cast<std::ptrdiff_t>(j * c));
        }
    return a.tape()->record(std::move(out), {a.id()},
                            [n, c, width, source](const Tape&, NodeId, const Matrix& g, std::vector<Matrix>& grads) {
                                Matrix d(n, c);
                                for (std::size_t t = 0; t < n; ++t)
                                    for (std::size_t j = 0; j < width; ++j) {
                                        auto dst = d.row(source(t, j));
                                        for (std::size_t k = 0; k < c; ++k) dst[k] += g(t, j * c + k);
                                    }
                                grads[0] = std::move(d);
                            });
}

/// Mean cross-entropy of row-wise softmax(logits) against integer labels.
inline Var cross_entropy_rows(Var logits, const std::vector<std::size_t>& labels) {
    const Matrix& z = logits.value();
    if (labels.size() != z.rows()) {
        throw Error(ErrorKind::dimension, "cross_entropy_rows: " + std::to_string(labels.size()) +
                                              " labels for " + std::to_string(z.rows()) + " rows");
    }
    for (std::size_t label : labels)
        if (label >= z.cols()) {
            throw Error(ErrorKind::input, "label " + std::to_string(label) + " out of range for " +
                                              std::to_string(z.cols()) + " classes");
        }
    Matrix probs = tapkit::softmax_rows(z);
    double total = 0.0;
    for (std::size_t r = 0; r < z.rows(); ++r) {
        auto row = z.row(r);
        double peak = *std::max_element(row.begin(), row.end());
        double lse = 0.0;
        for (double v : row) lse += std::exp(v - peak);
        total += peak + std::log(lse) - row[labels[r]];
    }
    const double n = static_cast<double>(z.rows());
    return logits.tape()->record(Matrix(1, 1, total / n), {logits.id()},
                                 [probs = std::move(probs), labels, n](const Tape&, NodeId, const Matrix& g,
                                                                       std::vector<Matrix>& grads) {
                                     Matrix d = probs;
                                     for (std::size_t r = 0; r < d.rows(); ++r) d(r, labels[r]) -= 1.0;
                                     d *= g(0, 0) / n;
                                     grads[0] = std::move(d);
                                 });
}

} // namespace tapkit::ad
