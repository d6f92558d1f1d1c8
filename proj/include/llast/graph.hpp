// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over dense tensors. Every
// trainable module in the pipeline is built from the operation set below.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "llast/tensor.hpp"

namespace llast {

namespace detail {

// numpy-style trailing-aligned broadcast. Each aligned dim must be equal or 1.
inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
    size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    for (size_t i = 0; i < rank; ++i) {
        int64_t da = i < a.size() ? a[a.size() - 1 - i] : 1;
        int64_t db = i < b.size() ? b[b.size() - 1 - i] : 1;
        if (da != db && da != 1 && db != 1) {
            throw ShapeError(std::string(op) + " shape mismatch: " + shape_str(a) + " vs " + shape_str(b));
        }
        out[rank - 1 - i] = std::max(da, db);
    }
    return out;
}

// Row-major strides of `from` as seen inside `to`; 0 where `from` broadcasts.
inline std::vector<int64_t> broadcast_strides(const Shape& from, const Shape& to) {
    std::vector<int64_t> strides(to.size(), 0);
    int64_t s = 1;
    for (size_t i = 0; i < from.size(); ++i) {
        size_t fi = from.size() - 1 - i;
        size_t ti = to.size() - 1 - i;
        strides[ti] = (from[fi] == 1 && to[ti] != 1) ? 0 : s;
        s *= from[fi];
    }
    return strides;
}

// Walk every flat index of `shape`, yielding the matching flat offsets of two
// broadcast inputs.
template <typename F>
void broadcast_walk(const Shape& shape, const std::vector<int64_t>& sa, const std::vector<int64_t>& sb, F&& f) {
    int64_t total = shape_numel(shape);
    size_t rank = shape.size();
    std::vector<int64_t> idx(rank, 0);
    int64_t oa = 0, ob = 0;
    for (int64_t flat = 0; flat < total; ++flat) {
        f(flat, oa, ob);
        for (size_t d = rank; d-- > 0;) {
            ++idx[d];
            oa += sa[d];
            ob += sb[d];
            if (idx[d] < shape[d]) break;
            oa -= sa[d] * shape[d];
            ob -= sb[d] * shape[d];
            idx[d] = 0;
        }
    }
}

// c[m x n] (+)= a[m x k] . b[k x n]
template <typename S>
void mm_nn(const S* a, const S* b, S* c, int64_t m, int64_t k, int64_t n, bool acc) {
    if (!acc) std::fill(c, c + m * n, S(0));
    for (int64_t i = 0; i < m; ++i) {
        const S* arow = a + i * k;
        S* crow = c + i * n;
        for (int64_t p = 0; p < k; ++p) {
            S av = arow[p];
            if (av == S(0)) continue;
            const S* brow = b + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// c[m x k] (+)= a[m x n] . b[k x n]^T
template <typename S>
void mm_nt(const S* a, const S* b, S* c, int64_t m, int64_t n, int64_t k, bool acc) {
    for (int64_t i = 0; i < m; ++i) {
        const S* arow = a + i * n;
        S* crow = c + i * k;
        for (int64_t j = 0; j < k; ++j) {
            const S* brow = b + j * n;
            S s = acc ? crow[j] : S(0);
            for (int64_t p = 0; p < n; ++p) s += arow[p] * brow[p];
            crow[j] = s;
        }
    }
}

// c[k x n] (+)= a[m x k]^T . b[m x n]
template <typename S>
void mm_tn(const S* a, const S* b, S* c, int64_t m, int64_t k, int64_t n, bool acc) {
    if (!acc) std::fill(c, c + k * n, S(0));
    for (int64_t i = 0; i < m; ++i) {
        const S* arow = a + i * k;
        const S* brow = b + i * n;
        for (int64_t p = 0; p < k; ++p) {
            S av = arow[p];
            if (av == S(0)) continue;
            S* crow = c + p * n;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// One forward pass builds one Graph; backward() replays the tape in exact
// reverse execution order, accumulates into Parameter::grad for every
// trainable parameter reachable from the loss, and consumes the tape.
template <typename S>
class Graph {
public:
    struct Ref {
        int32_t idx = -1;
        bool valid() const { return idx >= 0; }
    };

    explicit Graph(bool record_tape = true) : record_(record_tape) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Ref input(Tensor<S> value) { return push(std::move(value), {}, nullptr, false); }

    Ref param(Parameter<S>& p) {
        auto it = param_nodes_.find(&p);
        if (it != param_nodes_.end()) return Ref{it->second};
        Ref r = push(p.value, {}, nullptr, record_ && p.trainable);
        nodes_[static_cast<size_t>(r.idx)].param = &p;
        param_nodes_.emplace(&p, r.idx);
        return r;
    }

    Ref add(Ref a, Ref b) { return binary_broadcast(a, b, "add", /*is_mul=*/false); }
    Ref mul(Ref a, Ref b) { return binary_broadcast(a, b, "mul", /*is_mul=*/true); }

    Ref scale(Ref a, S c) {
        const Tensor<S>& x = value(a);
        Tensor<S> out(x.shape());
        for (int64_t i = 0; i < x.numel(); ++i) out.at(i) = x.at(i) * c;
        return unary(a, std::move(out), [c](Graph& g, int32_t self, int32_t in) {
            const Tensor<S>& go = g.nodes_[self].grad;
            Tensor<S>& gi = g.grad_buf(in);
            for (int64_t i = 0; i < go.numel(); ++i) gi.at(i) += go.at(i) * c;
        });
    }

    Ref matmul(Ref a, Ref b) {
        const Tensor<S>& x = value(a);
        const Tensor<S>& y = value(b);
        if (x.rank() != 2 || y.rank() != 2 || x.dim(1) != y.dim(0)) {
            throw ShapeError("matmul shape mismatch: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
        }
        int64_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
        Tensor<S> out({m, n});
        detail::mm_nn(x.data(), y.data(), out.data(), m, k, n, false);
        return binary(a, b, std::move(out), [m, k, n](Graph& g, int32_t self, int32_t ia, int32_t ib) {
            const Tensor<S>& go = g.nodes_[self].grad;
            if (g.wants_grad(ia)) {
                detail::mm_nt(go.data(), g.nodes_[ib].value.data(), g.grad_buf(ia).data(), m, n, k, true);
            }
            if (g.wants_grad(ib)) {
                detail::mm_tn(g.nodes_[ia].value.data(), go.data(), g.grad_buf(ib).data(), m, k, n, true);
            }
        });
    }

    Ref transpose(Ref a) {
        const Tensor<S>& x = value(a);
        if (x.rank() != 2) throw ShapeError("transpose expects rank 2, got " + shape_str(x.shape()));
        int64_t r = x.dim(0), c = x.dim(1);
        Tensor<S> out({c, r});
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) out.at(j, i) = x.at(i, j);
        return unary(a, std::move(out), [r, c](Graph& g, int32_t self, int32_t in) {
            const Tensor<S>& go = g.nodes_[self].grad;
            Tensor<S>& gi = g.grad_buf(in);
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j) gi.at(i, j) += go.at(j, i);
        });
    }

    Ref reshape(Ref a, Shape target) {
        const Tensor<S>& x = value(a);
        if (shape_numel(target) != x.numel()) {
            throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(target) + " changes element count");
        }
        Tensor<S> out(std::move(target), x.vec());
        return unary(a, std::move(out), [](Graph& g, int32_t self, int32_t in) {
            const Tensor<S>& go = g.nodes_[self].grad;
            Tensor<S>& gi = g.grad_buf(in);
            for (int64_t i = 0; i < go.numel(); ++i) gi.at(i) += go.at(i);
        });
    }

    Ref concat(const std::vector<Ref>& parts, int axis) {
        if (parts.empty()) throw ShapeError("concat of zero tensors");
        if (axis != 0 && axis != 1) throw ShapeError("concat supports axis 0 or 1");
        const Tensor<S>& first = value(parts[0]);
        if (first.rank() != 2) throw ShapeError("concat expects rank 2, got " + shape_str(first.shape()));
        int64_t fixed = axis == 0 ? first.dim(1) : first.dim(0);
        int64_t total = 0;
        std::vector<int32_t> idxs;
        for (Ref p : parts) {
            const Tensor<S>& t = value(p);
            int64_t f = axis == 0 ? t.dim(1) : t.dim(0);
            if (t.rank() != 2 || f != fixed) {
                throw ShapeError("concat shape mismatch: " + shape_str(first.shape()) + " vs " + shape_str(t.shape()));
            }
            total += axis == 0 ? t.dim(0) : t.dim(1);
            idxs.push_back(p.idx);
        }
        Shape oshape = axis == 0 ? Shape{total, fixed} : Shape{fixed, total};
        Tensor<S> out(oshape);
        int64_t off = 0;
        for (Ref p : parts) {
            const Tensor<S>& t = value(p);
            if (axis == 0) {
                std::copy(t.data(), t.data() + t.numel(), out.data() + off * fixed);
                off += t.dim(0);
            } else {
                for (int64_t i = 0; i < fixed; ++i)
                    std::copy(t.data() + i * t.dim(1), t.data() + (i + 1) * t.dim(1), out.data() + i * total + off);
                off += t.dim(1);
            }
        }
        bool needs = false;
        for (int32_t i : idxs) needs = needs || nodes_[static_cast<size_t>(i)].needs_grad;
        auto bp = [idxs, axis, total, fixed](Graph& g) {
            int32_t self = g.current_bp_node_;
            const Tensor<S>& go = g.nodes_[self].grad;
            int64_t off = 0;
            for (int32_t i : idxs) {
                const Tensor<S>& t = g.nodes_[i].value;
                int64_t span = axis == 0 ? t.dim(0) : t.dim(1);
                if (g.wants_grad(i)) {
                    Tensor<S>& gi = g.grad_buf(i);
                    if (axis == 0) {
                        for (int64_t e = 0; e < span * fixed; ++e) gi.at(e) += go.at(off * fixed + e);
                    } else {
                        for (int64_t r = 0; r < fixed; ++r)
                            for (int64_t c = 0; c < span; ++c) gi.at(r, c) += go.at(r * total + off + c);
                    }
                }
                off += span;
            }
        };
        return push(std::move(out), idxs, needs && record_ ? std::function<void(Graph&)>(bp) : nullptr, needs);
    }

    Ref slice(Ref a, int axis, int64_t start, int64_t len) {
        const Tensor<S>& x = value(a);
        if (x.rank() != 2 || (axis != 0 && axis != 1)) throw ShapeError("slice expects rank 2, axis 0 or 1");
        int64_t limit = x.dim(axis);
        if (start < 0 || len < 1 || start + len > limit) {
            throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                             ") out of range for " + shape_str(x.shape()));
        }
        int64_t rows = x.dim(0), cols = x.dim(1);
        Tensor<S> out(axis == 0 ? Shape{len, cols} : Shape{rows, len});
        if (axis == 0) {
            std::copy(x.data() + start * cols, x.data() + (start + len) * cols, out.data());
        } else {
            for (int64_t r = 0; r < rows; ++r)
                std::copy(x.data() + r * cols + start, x.data() + r * cols + start + len, out.data() + r * len);
        }
        return unary(a, std::move(out), [axis, start, len, rows, cols](Graph& g, int32_t self, int32_t in) {
            const Tensor<S>& go = g.nodes_[self].grad;
            Tensor<S>& gi = g.grad_buf(in);
            if (axis == 0) {
                for (int64_t e = 0; e < len * cols; ++e) gi.at(start * cols + e) += go.at(e);
            } else {
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t c = 0; c < len; ++c) gi.at(r, c + start) += go.at(r, c);
            }
        });
    }

    // Numerically stabilized by max-subtraction. axis in {0, 1} for rank 2;
    // rank-1 tensors use axis 0.
    Ref softmax(Ref a, int axis) {
        const Tensor<S>& x = value(a);
        Tensor<S> out = softmax_value(x, axis);
        int64_t slices, span, sstride, estride;
        softmax_layout(x, axis, slices, span, sstride, estride);
        return unary(a, std::move(out), [slices, span, sstride, estride](Graph& g, int32_t self, int32_t in) {
            const Tensor<S>& y = g.nodes_[self].value;
            const Tensor<S>& go = g.nodes_[self].grad;
            Tensor<S>& gi = g.grad_buf(in);
            for (int64_t s = 0; s < slices; ++s) {
                int64_t base = s * sstride;
                S dot = S(0);
                for (int64_t e = 0; e < span; ++e) dot += go.at(base + e * estride) * y.at(base + e * estride);
                for (int64_t e = 0; e < span; ++e) {
                    int64_t i = base + e * estride;
                    gi.at(i) += y.at(i) * (go.at(i) - dot);
                }
            }
        });
    }

    // Row-wise normalization over the last axis of a rank-2 input (rank-1 is
    // treated as one row). gain/bias are rank-1 of the row width.
    Ref layer_norm(Ref xr, Ref gain, Ref bias, S eps = S(1e-5)) {
        const Tensor<S>& x = value(xr);
        const Tensor<S>& g0 = value(gain);
        const Tensor<S>& b0 = value(bias);
        int64_t rows = x.rank() == 2 ? x.dim(0) : 1;
        int64_t cols = x.rank() == 2 ? x.dim(1) : x.dim(0);
        if (x.rank() > 2 || g0.numel() != cols || b0.numel() != cols) {
            throw ShapeError("layer_norm shape mismatch: x " + shape_str(x.shape()) + ", gain " +
                             shape_str(g0.shape()) + ", bias " + shape_str(b0.shape()));
        }
        Tensor<S> out(x.shape());
        Tensor<S> xhat(x.shape());
        std::vector<S> inv_std(static_cast<size_t>(rows));
        for (int64_t r = 0; r < rows; ++r) {
            const S* xp = x.data() + r * cols;
            S mean = S(0);
            for (int64_t c = 0; c < cols; ++c) mean += xp[c];
            mean /= static_cast<S>(cols);
            S var = S(0);
            for (int64_t c = 0; c < cols; ++c) {
                S d = xp[c] - mean;
                var += d * d;
            }
            var /= static_cast<S>(cols);
            S is = S(1) / std::sqrt(var + eps);
            inv_std[static_cast<size_t>(r)] = is;
            for (int64_t c = 0; c < cols; ++c) {
                S xh = (xp[c] - mean) * is;
                xhat.at(r * cols + c) = xh;
                out.at(r * cols + c) = xh * g0.at(c) + b0.at(c);
            }
        }
        std::vector<int32_t> ins = {xr.idx, gain.idx, bias.idx};
        bool needs = false;
        for (int32_t i : ins) needs = needs || nodes_[static_cast<size_t>(i)].needs_grad;
        auto bp = [xi = xr.idx, gi_ = gain.idx, bi = bias.idx, rows, cols, xhat = std::move(xhat),
                   inv_std = std::move(inv_std)](Graph& g) {
            int32_t self = g.current_bp_node_;
            const Tensor<S>& go = g.nodes_[self].grad;
            const Tensor<S>& gv = g.nodes_[gi_].value;
            if (g.wants_grad(gi_)) {
                Tensor<S>& dg = g.grad_buf(gi_);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t c = 0; c < cols; ++c) dg.at(c) += go.at(r * cols + c) * xhat.at(r * cols + c);
            }
            if (g.wants_grad(bi)) {
                Tensor<S>& db = g.grad_buf(bi);
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t c = 0; c < cols; ++c) db.at(c) += go.at(r * cols + c);
            }
            if (g.wants_grad(xi)) {
                Tensor<S>& dx = g.grad_buf(xi);
                for (int64_t r = 0; r < rows; ++r) {
                    S m1 = S(0), m2 = S(0);
                    for (int64_t c = 0; c < cols; ++c) {
                        S dxh = go.at(r * cols + c) * gv.at(c);
                        m1 += dxh;
                        m2 += dxh * xhat.at(r * cols + c);
                    }
                    m1 /= static_cast<S>(cols);
                    m2 /= static_cast<S>(cols);
                    S is = inv_std[static_cast<size_t>(r)];
                    for (int64_t c = 0; c < cols; ++c) {
                        S dxh = go.at(r * cols + c) * gv.at(c);
                        dx.at(r * cols + c) += is * (dxh - m1 - xhat.at(r * cols + c) * m2);
                    }
                }
            }
        };
        return push(std::move(out), ins, needs && record_ ? std::function<void(Graph&)>(bp) : nullptr, needs);
    }

    // Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
    Ref gelu(Ref a) {
        static const S inv_sqrt2 = S(0.70710678118654752440);
        static const S inv_sqrt2pi = S(0.39894228040143267794);
        const Tensor<S>& x = value(a);
        Tensor<S> out(x.shape());
        for (int64_t i = 0; i < x.numel(); ++i) {
            out.at(i) = S(0.5) * x.at(i) * (S(1) + std::erf(x.at(i) * inv_sqrt2));
        }
        return unary(a, std::move(out), [](Graph& g, int32_t self, int32_t in) {
            const Tensor<S>& x = g.nodes_[in].value;
            const Tensor<S>& go = g.nodes_[self].grad;
            Tensor<S>& gi = g.grad_buf(in);
            for (int64_t i = 0; i < x.numel(); ++i) {
                S v = x.at(i);
                S cdf = S(0.5) * (S(1) + std::erf(v * inv_sqrt2));
                S pdf = inv_sqrt2pi * std::exp(S(-0.5) * v * v);
                gi.at(i) += go.at(i) * (cdf + v * pdf);
            }
        });
    }

    // Gather rows of a [V x d] table; gradient scatter-adds into the table.
    Ref embedding(Ref table, std::vector<int32_t> ids) {
        const Tensor<S>& t = value(table);
        if (t.rank() != 2) throw ShapeError("embedding table must be rank 2, got " + shape_str(t.shape()));
        if (ids.empty()) throw ShapeError("embedding lookup with no ids");
        int64_t v = t.dim(0), d = t.dim(1);
        for (int32_t id : ids) {
            if (id < 0 || id >= v) {
                throw ShapeError("embedding id " + std::to_string(id) + " out of range [0, " + std::to_string(v) + ")");
            }
        }
        Tensor<S> out({static_cast<int64_t>(ids.size()), d});
        for (size_t i = 0; i < ids.size(); ++i) {
            std::copy(t.data() + ids[i] * d, t.data() + (ids[i] + 1) * d, out.data() + static_cast<int64_t>(i) * d);
        }
        return unary(table, std::move(out), [ids = std::move(ids), d](Graph& g, int32_t self, int32_t in) {
            const Tensor<S>& go = g.nodes_[self].grad;
            Tensor<S>& gi = g.grad_buf(in);
            for (size_t i = 0; i < ids.size(); ++i) {
                for (int64_t c = 0; c < d; ++c) gi.at(ids[i] * d + c) += go.at(static_cast<int64_t>(i) * d + c);
            }
        });
    }

    Ref sum(Ref a) {
        const Tensor<S>& x = value(a);
        S total = S(0);
        for (int64_t i = 0; i < x.numel(); ++i) total += x.at(i);
        Tensor<S> out({1});
        out.at(0) = total;
        return unary(a, std::move(out), [](Graph& g, int32_t self, int32_t in) {
            S go = g.nodes_[self].grad.at(0);
            Tensor<S>& gi = g.grad_buf(in);
            for (int64_t i = 0; i < gi.numel(); ++i) gi.at(i) += go;
        });
    }

    Ref mean(Ref a) {
        int64_t n = value(a).numel();
        return scale(sum(a), S(1) / static_cast<S>(n));
    }

    // Mean over masked positions of -log softmax(logits)[target]. Unmasked
    // positions contribute exactly zero.
    Ref masked_cross_entropy(Ref logits, std::vector<int32_t> targets, std::vector<uint8_t> mask) {
        const Tensor<S>& x = value(logits);
        if (x.rank() != 2) throw ShapeError("masked_cross_entropy expects [L x V] logits");
        int64_t L = x.dim(0), V = x.dim(1);
        if (static_cast<int64_t>(targets.size()) != L || static_cast<int64_t>(mask.size()) != L) {
            throw ShapeError("masked_cross_entropy: logits " + shape_str(x.shape()) + " vs " +
                             std::to_string(targets.size()) + " targets, " + std::to_string(mask.size()) + " mask");
        }
        std::vector<int64_t> rows;
        for (int64_t i = 0; i < L; ++i) {
            if (mask[static_cast<size_t>(i)]) rows.push_back(i);
        }
        if (rows.empty()) throw DegenerateBatchError("masked_cross_entropy: all-false loss mask");
        for (int64_t r : rows) {
            int32_t tgt = targets[static_cast<size_t>(r)];
            if (tgt < 0 || tgt >= V) {
                throw ShapeError("target id " + std::to_string(tgt) + " out of range [0, " + std::to_string(V) + ")");
            }
        }
        // Probabilities saved for masked rows only; they drive the backward pass.
        Tensor<S> probs({static_cast<int64_t>(rows.size()), V});
        S loss = S(0);
        for (size_t q = 0; q < rows.size(); ++q) {
            const S* row = x.data() + rows[q] * V;
            S mx = row[0];
            for (int64_t c = 1; c < V; ++c) mx = std::max(mx, row[c]);
            S z = S(0);
            for (int64_t c = 0; c < V; ++c) z += std::exp(row[c] - mx);
            S lse = mx + std::log(z);
            loss += lse - row[targets[static_cast<size_t>(rows[q])]];
            for (int64_t c = 0; c < V; ++c) probs.at(static_cast<int64_t>(q) * V + c) = std::exp(row[c] - lse);
        }
        S inv_m = S(1) / static_cast<S>(rows.size());
        loss *= inv_m;
        Tensor<S> out({1});
        out.at(0) = loss;
        return unary(logits, std::move(out),
                     [rows = std::move(rows), targets = std::move(targets), probs = std::move(probs), V,
                      inv_m](Graph& g, int32_t self, int32_t in) {
                              S go = g.nodes_[self].grad.at(0);
                              Tensor<S>& gi = g.grad_buf(in);
                              for (size_t q = 0; q < rows.size(); ++q) {
                                  int64_t r = rows[q];
                                  for (int64_t c = 0; c < V; ++c) {
                                      gi.at(r, c) += go * inv_m * probs.at(static_cast<int64_t>(q) * V + c);
                                  }
                                  gi.at(r, targets[static_cast<size_t>(r)]) -= go * inv_m;
                              }
                          });
    }

    const Tensor<S>& value(Ref r) const { return nodes_.at(static_cast<size_t>(r.idx)).value; }

    // Populated only after backward() for nodes reachable from the loss.
    const Tensor<S>& grad(Ref r) const { return nodes_.at(static_cast<size_t>(r.idx)).grad; }

    bool consumed() const { return consumed_; }

    void backward(Ref loss) {
        if (consumed_) throw StaleTapeError("backward on a consumed tape; re-run the forward pass first");
        if (!loss.valid() || value(loss).numel() != 1) {
            throw ShapeError("backward expects a scalar loss");
        }
        size_t root = static_cast<size_t>(loss.idx);
        // Mark ancestors of the loss so unrelated parameters never see a grad.
        std::vector<uint8_t> reach(nodes_.size(), 0);
        reach[root] = 1;
        for (size_t i = root + 1; i-- > 0;) {
            if (!reach[i] || !nodes_[i].needs_grad) continue;
            for (int32_t in : nodes_[i].inputs) reach[static_cast<size_t>(in)] = 1;
        }
        if (nodes_[root].needs_grad) {
            grad_buf(loss.idx).at(0) = S(1);
            for (size_t i = root + 1; i-- > 0;) {
                Node& n = nodes_[i];
                if (!reach[i] || !n.needs_grad) continue;
                if (n.backprop) {
                    current_bp_node_ = static_cast<int32_t>(i);
                    n.backprop(*this);
                }
                if (n.param && n.param->trainable) {
                    if (!n.param->has_grad()) n.param->grad = Tensor<S>(n.param->value.shape());
                    for (int64_t e = 0; e < n.grad.numel(); ++e) n.param->grad.at(e) += n.grad.at(e);
                }
            }
        }
        // Tape cleared; values and node grads stay readable.
        for (Node& n : nodes_) n.backprop = nullptr;
        consumed_ = true;
    }

private:
    struct Node {
        Tensor<S> value;
        Tensor<S> grad;
        std::vector<int32_t> inputs;
        std::function<void(Graph&)> backprop;
        Parameter<S>* param = nullptr;
        bool needs_grad = false;
    };

    bool wants_grad(int32_t idx) const { return nodes_[static_cast<size_t>(idx)].needs_grad; }

    Tensor<S>& grad_buf(int32_t idx) {
        Node& n = nodes_[static_cast<size_t>(idx)];
        if (n.grad.empty()) n.grad = Tensor<S>(n.value.shape());
        return n.grad;
    }

    Ref push(Tensor<S> value, std::vector<int32_t> inputs, std::function<void(Graph&)> bp, bool needs) {
        Node n;
        n.value = std::move(value);
        n.inputs = std::move(inputs);
        n.backprop = std::move(bp);
        n.needs_grad = needs;
        nodes_.push_back(std::move(n));
        return Ref{static_cast<int32_t>(nodes_.size() - 1)};
    }

    template <typename BP>
    Ref unary(Ref a, Tensor<S> out, BP&& bp) {
        bool needs = nodes_[static_cast<size_t>(a.idx)].needs_grad;
        std::function<void(Graph&)> fn;
        if (needs && record_) {
            fn = [ai = a.idx, bp = std::forward<BP>(bp)](Graph& g) { bp(g, g.current_bp_node_, ai); };
        }
        return push(std::move(out), {a.idx}, std::move(fn), needs);
    }

    template <typename BP>
    Ref binary(Ref a, Ref b, Tensor<S> out, BP&& bp) {
        bool needs = nodes_[static_cast<size_t>(a.idx)].needs_grad || nodes_[static_cast<size_t>(b.idx)].needs_grad;
        std::function<void(Graph&)> fn;
        if (needs && record_) {
            fn = [ai = a.idx, bi = b.idx, bp = std::forward<BP>(bp)](Graph& g) { bp(g, g.current_bp_node_, ai, bi); };
        }
        return push(std::move(out), {a.idx, b.idx}, std::move(fn), needs);
    }

    Ref binary_broadcast(Ref a, Ref b, const char* opname, bool is_mul) {
        const Tensor<S>& x = value(a);
        const Tensor<S>& y = value(b);
        Shape oshape = detail::broadcast_shape(x.shape(), y.shape(), opname);
        auto sa = detail::broadcast_strides(x.shape(), oshape);
        auto sb = detail::broadcast_strides(y.shape(), oshape);
        Tensor<S> out(oshape);
        const S* xp = x.data();
        const S* yp = y.data();
        S* op = out.data();
        if (is_mul) {
            detail::broadcast_walk(oshape, sa, sb, [&](int64_t o, int64_t i, int64_t j) { op[o] = xp[i] * yp[j]; });
        } else {
            detail::broadcast_walk(oshape, sa, sb, [&](int64_t o, int64_t i, int64_t j) { op[o] = xp[i] + yp[j]; });
        }
        return binary(a, b, std::move(out),
                      [oshape, sa, sb, is_mul](Graph& g, int32_t self, int32_t ia, int32_t ib) {
                          const Tensor<S>& go = g.nodes_[self].grad;
                          const S* gop = go.data();
                          if (g.wants_grad(ia)) {
                              Tensor<S>& gi = g.grad_buf(ia);
                              S* gip = gi.data();
                              const S* yp = g.nodes_[ib].value.data();
                              detail::broadcast_walk(oshape, sa, sb, [&](int64_t o, int64_t i, int64_t j) {
                                  gip[i] += is_mul ? gop[o] * yp[j] : gop[o];
                              });
                          }
                          if (g.wants_grad(ib)) {
                              Tensor<S>& gi = g.grad_buf(ib);
                              S* gip = gi.data();
                              const S* xp = g.nodes_[ia].value.data();
                              detail::broadcast_walk(oshape, sa, sb, [&](int64_t o, int64_t i, int64_t j) {
                                  gip[j] += is_mul ? gop[o] * xp[i] : gop[o];
                              });
                          }
                      });
    }

    static void softmax_layout(const Tensor<S>& x, int axis, int64_t& slices, int64_t& span, int64_t& sstride,
                               int64_t& estride) {
        if (x.rank() == 1) {
            if (axis != 0) throw ShapeError("softmax axis out of range for rank 1");
            slices = 1;
            span = x.dim(0);
            sstride = 0;
            estride = 1;
        } else if (x.rank() == 2) {
            if (axis == 1) {
                slices = x.dim(0);
                span = x.dim(1);
                sstride = x.dim(1);
                estride = 1;
            } else if (axis == 0) {
                slices = x.dim(1);
                span = x.dim(0);
                sstride = 1;
                estride = x.dim(1);
            } else {
                throw ShapeError("softmax axis out of range for rank 2");
            }
        } else {
            throw ShapeError("softmax supports rank 1 or 2, got " + shape_str(x.shape()));
        }
    }

    static Tensor<S> softmax_value(const Tensor<S>& x, int axis) {
        int64_t slices, span, sstride, estride;
        softmax_layout(x, axis, slices, span, sstride, estride);
        Tensor<S> out(x.shape());
        for (int64_t s = 0; s < slices; ++s) {
            int64_t base = s * sstride;
            S mx = x.at(base);
            for (int64_t e = 1; e < span; ++e) mx = std::max(mx, x.at(base + e * estride));
            S z = S(0);
            for (int64_t e = 0; e < span; ++e) z += std::exp(x.at(base + e * estride) - mx);
            for (int64_t e = 0; e < span; ++e) out.at(base + e * estride) = std::exp(x.at(base + e * estride) - mx) / z;
        }
        return out;
    }

    std::vector<Node> nodes_;
    std::unordered_map<const Parameter<S>*, int32_t> param_nodes_;
    bool record_;
    bool consumed_ = false;
    int32_t current_bp_node_ = -1;
};

}  // namespace llast
