// SPDX-License-Identifier: Apache-2.0
//
// The adaptor bridging encoder states into the LM embedding space:
// exactly three affine layers with GELU between them, always trainable.

#pragma once

#include <string>
#include <vector>

#include "llast/nn.hpp"

namespace llast {

struct AdaptorConfig {
    int64_t in_dim = 64;      // encoder d_model
    int64_t hidden_dim = 96;
    int64_t out_dim = 96;     // LM d_model
    static constexpr int64_t n_layers = 3;

    void validate() const {
        if (in_dim <= 0 || hidden_dim <= 0 || out_dim <= 0) {
            throw ConfigError("adaptor config requires positive dimensions");
        }
    }

    int64_t param_count() const {
        return in_dim * hidden_dim + hidden_dim + hidden_dim * hidden_dim + hidden_dim + hidden_dim * out_dim + out_dim;
    }
};

template <typename S>
struct Adaptor {
    AdaptorConfig cfg;
    Linear<S> fc0, fc1, fc2;

    static Adaptor build(const AdaptorConfig& cfg, uint64_t seed) {
        cfg.validate();
        Adaptor a;
        a.cfg = cfg;
        a.fc0.init("adaptor.fc0", cfg.in_dim, cfg.hidden_dim, seed);
        a.fc1.init("adaptor.fc1", cfg.hidden_dim, cfg.hidden_dim, seed);
        a.fc2.init("adaptor.fc2", cfg.hidden_dim, cfg.out_dim, seed);
        return a;
    }

    // [T' x in_dim] -> [T' x out_dim]; affine, GELU, affine, GELU, affine.
    typename Graph<S>::Ref forward(Graph<S>& g, typename Graph<S>::Ref z) {
        const Tensor<S>& v = g.value(z);
        if (v.rank() != 2 || v.dim(1) != cfg.in_dim) {
            throw ShapeError("adaptor expects [T' x " + std::to_string(cfg.in_dim) + "], got " + shape_str(v.shape()));
        }
        auto h = g.gelu(fc0.forward(g, z));
        h = g.gelu(fc1.forward(g, h));
        return fc2.forward(g, h);
    }

    void collect(std::vector<Parameter<S>*>& out) {
        fc0.collect(out);
        fc1.collect(out);
        fc2.collect(out);
    }

    void collect_linears(std::vector<Linear<S>*>& out) {
        out.push_back(&fc0);
        out.push_back(&fc1);
        out.push_back(&fc2);
    }
};

}  // namespace llast
