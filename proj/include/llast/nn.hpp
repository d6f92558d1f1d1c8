// SPDX-License-Identifier: Apache-2.0
//
// Model building blocks: linear maps with optional low-rank adapter branches,
// layer norm, and pre-norm transformer blocks shared by the speech encoder
// (bidirectional) and the language model (causal).

#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "llast/graph.hpp"
#include "llast/rng.hpp"
#include "llast/tensor.hpp"

namespace llast {

// Rank-r decomposition beside a frozen base map: y = Wx + (alpha/r) B(Ax).
// B starts at zero so a freshly injected adapter is an exact identity.
template <typename S>
struct LoRAAdapter {
    Parameter<S> a;  // [r x in]
    Parameter<S> b;  // [out x r]
    int64_t rank = 0;
    S alpha = S(0);
    S scaling = S(0);
    bool merged = false;
    std::string base_ref;
};

template <typename S>
struct Linear {
    std::string name;
    int64_t in_dim = 0;
    int64_t out_dim = 0;
    Parameter<S> weight;  // [in x out]
    Parameter<S> bias;    // [out]
    bool has_bias = true;
    std::unique_ptr<LoRAAdapter<S>> lora;

    void init(std::string nm, int64_t in, int64_t out, uint64_t model_seed, bool with_bias = true,
              S stddev = S(0.02)) {
        name = std::move(nm);
        in_dim = in;
        out_dim = out;
        has_bias = with_bias;
        Rng rng(derive_seed(model_seed, name));
        weight.name = name + ".weight";
        weight.value = Tensor<S>::randn({in, out}, rng, stddev);
        if (has_bias) {
            bias.name = name + ".bias";
            bias.value = Tensor<S>({out});
        }
    }

    typename Graph<S>::Ref forward(Graph<S>& g, typename Graph<S>::Ref x) {
        auto y = g.matmul(x, g.param(weight));
        if (has_bias) y = g.add(y, g.param(bias));
        if (lora && !lora->merged) {
            auto down = g.matmul(x, g.transpose(g.param(lora->a)));
            auto up = g.matmul(down, g.transpose(g.param(lora->b)));
            y = g.add(y, g.scale(up, lora->scaling));
        }
        return y;
    }

    void collect(std::vector<Parameter<S>*>& out) {
        out.push_back(&weight);
        if (has_bias) out.push_back(&bias);
        if (lora) {
            out.push_back(&lora->a);
            out.push_back(&lora->b);
        }
    }

    int64_t base_param_count() const { return in_dim * out_dim + (has_bias ? out_dim : 0); }
};

template <typename S>
struct LayerNormModule {
    Parameter<S> gain;
    Parameter<S> bias;

    void init(const std::string& nm, int64_t dim) {
        gain.name = nm + ".gain";
        gain.value = Tensor<S>::full({dim}, S(1));
        bias.name = nm + ".bias";
        bias.value = Tensor<S>({dim});
    }

    typename Graph<S>::Ref forward(Graph<S>& g, typename Graph<S>::Ref x) {
        return g.layer_norm(x, g.param(gain), g.param(bias));
    }

    void collect(std::vector<Parameter<S>*>& out) {
        out.push_back(&gain);
        out.push_back(&bias);
    }
};

// Additive attention mask: 0 where position j may attend, large negative above
// the diagonal for causal blocks.
template <typename S>
Tensor<S> causal_mask(int64_t n) {
    Tensor<S> m({n, n});
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i + 1; j < n; ++j) m.at(i, j) = S(-1e9);
    }
    return m;
}

template <typename S>
struct TransformerBlock {
    int64_t d_model = 0;
    int64_t n_heads = 0;
    LayerNormModule<S> ln1, ln2;
    Linear<S> wq, wk, wv, wo, fc1, fc2;

    void init(const std::string& prefix, int64_t d, int64_t heads, int64_t ff_mult, uint64_t model_seed) {
        d_model = d;
        n_heads = heads;
        ln1.init(prefix + ".ln1", d);
        ln2.init(prefix + ".ln2", d);
        wq.init(prefix + ".attn.wq", d, d, model_seed);
        wk.init(prefix + ".attn.wk", d, d, model_seed);
        wv.init(prefix + ".attn.wv", d, d, model_seed);
        wo.init(prefix + ".attn.wo", d, d, model_seed);
        fc1.init(prefix + ".ffn.fc1", d, d * ff_mult, model_seed);
        fc2.init(prefix + ".ffn.fc2", d * ff_mult, d, model_seed);
    }

    // mask: invalid ref for bidirectional attention.
    typename Graph<S>::Ref forward(Graph<S>& g, typename Graph<S>::Ref x, typename Graph<S>::Ref mask) {
        int64_t dh = d_model / n_heads;
        S att_scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(dh)));
        auto h = ln1.forward(g, x);
        auto q = wq.forward(g, h);
        auto k = wk.forward(g, h);
        auto v = wv.forward(g, h);
        std::vector<typename Graph<S>::Ref> heads;
        heads.reserve(static_cast<size_t>(n_heads));
        for (int64_t hd = 0; hd < n_heads; ++hd) {
            auto qh = g.slice(q, 1, hd * dh, dh);
            auto kh = g.slice(k, 1, hd * dh, dh);
            auto vh = g.slice(v, 1, hd * dh, dh);
            auto scores = g.scale(g.matmul(qh, g.transpose(kh)), att_scale);
            if (mask.valid()) scores = g.add(scores, mask);
            heads.push_back(g.matmul(g.softmax(scores, 1), vh));
        }
        auto ctx = n_heads == 1 ? heads[0] : g.concat(heads, 1);
        x = g.add(x, wo.forward(g, ctx));
        auto ff = fc2.forward(g, g.gelu(fc1.forward(g, ln2.forward(g, x))));
        return g.add(x, ff);
    }

    void collect(std::vector<Parameter<S>*>& out) {
        ln1.collect(out);
        ln2.collect(out);
        wq.collect(out);
        wk.collect(out);
        wv.collect(out);
        wo.collect(out);
        fc1.collect(out);
        fc2.collect(out);
    }

    void collect_linears(std::vector<Linear<S>*>& out) {
        out.push_back(&wq);
        out.push_back(&wk);
        out.push_back(&wv);
        out.push_back(&wo);
        out.push_back(&fc1);
        out.push_back(&fc2);
    }
};

}  // namespace llast
