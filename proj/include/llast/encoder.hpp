// SPDX-License-Identifier: Apache-2.0
//
// Speech encoder: strided subsampling of acoustic features, sinusoidal
// positions, then bidirectional pre-norm transformer layers.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "llast/audio.hpp"
#include "llast/nn.hpp"

namespace llast {

struct EncoderConfig {
    int64_t in_dim = 80;  // feature width (n_mels)
    int64_t d_model = 64;
    int64_t n_layers = 2;
    int64_t n_heads = 4;
    int64_t ff_mult = 4;
    int64_t subsample_factor = 2;  // in {1, 2, 4}
    int64_t max_frames = 2048;

    void validate() const {
        if (in_dim <= 0 || d_model <= 0 || n_layers <= 0 || n_heads <= 0 || ff_mult <= 0 || max_frames <= 0) {
            throw ConfigError("encoder config requires positive dimensions");
        }
        if (d_model % n_heads != 0) {
            throw ConfigError("encoder d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                              std::to_string(n_heads));
        }
        if (subsample_factor != 1 && subsample_factor != 2 && subsample_factor != 4) {
            throw ConfigError("encoder subsample_factor must be 1, 2 or 4");
        }
    }
};

template <typename S>
Tensor<S> sinusoidal_positions(int64_t n, int64_t d) {
    Tensor<S> pe({n, d});
    for (int64_t t = 0; t < n; ++t) {
        for (int64_t i = 0; i < d; i += 2) {
            double rate = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(d));
            pe.at(t, i) = static_cast<S>(std::sin(t * rate));
            if (i + 1 < d) pe.at(t, i + 1) = static_cast<S>(std::cos(t * rate));
        }
    }
    return pe;
}

template <typename S>
struct Encoder {
    EncoderConfig cfg;
    Linear<S> in_proj;
    std::vector<TransformerBlock<S>> blocks;
    LayerNormModule<S> ln_f;

    static Encoder build(const EncoderConfig& cfg, uint64_t seed) {
        cfg.validate();
        Encoder e;
        e.cfg = cfg;
        e.in_proj.init("encoder.in_proj", cfg.subsample_factor * cfg.in_dim, cfg.d_model, seed);
        e.blocks.resize(static_cast<size_t>(cfg.n_layers));
        for (int64_t i = 0; i < cfg.n_layers; ++i) {
            e.blocks[static_cast<size_t>(i)].init("encoder.block" + std::to_string(i), cfg.d_model, cfg.n_heads,
                                                  cfg.ff_mult, seed);
        }
        e.ln_f.init("encoder.ln_f", cfg.d_model);
        return e;
    }

    int64_t output_frames(int64_t t) const { return (t + cfg.subsample_factor - 1) / cfg.subsample_factor; }

    // features: [T x in_dim] node. Returns [T' x d_model].
    typename Graph<S>::Ref encode(Graph<S>& g, typename Graph<S>::Ref features) {
        const Tensor<S>& x = g.value(features);
        int64_t t = x.dim(0);
        if (x.rank() != 2 || x.dim(1) != cfg.in_dim) {
            throw ShapeError("encoder expects [T x " + std::to_string(cfg.in_dim) + "] features, got " +
                             shape_str(x.shape()));
        }
        if (t > cfg.max_frames) {
            throw LengthError("too many frames: " + std::to_string(t) + " > limit " + std::to_string(cfg.max_frames));
        }
        int64_t tp = output_frames(t);
        int64_t pad = tp * cfg.subsample_factor - t;
        auto h = features;
        if (pad > 0) h = g.concat({h, g.input(Tensor<S>({pad, cfg.in_dim}))}, 0);
        // Frame stacking: [T' * s x F] row-major is [T' x s F] by reinterpretation.
        h = g.reshape(h, {tp, cfg.subsample_factor * cfg.in_dim});
        h = in_proj.forward(g, h);
        h = g.add(h, g.input(sinusoidal_positions<S>(tp, cfg.d_model)));
        typename Graph<S>::Ref no_mask{};
        for (auto& b : blocks) h = b.forward(g, h, no_mask);
        return ln_f.forward(g, h);
    }

    void collect(std::vector<Parameter<S>*>& out) {
        in_proj.collect(out);
        for (auto& b : blocks) b.collect(out);
        ln_f.collect(out);
    }

    void collect_linears(std::vector<Linear<S>*>& out) {
        out.push_back(&in_proj);
        for (auto& b : blocks) b.collect_linears(out);
    }
};

}  // namespace llast
