// SPDX-License-Identifier: Apache-2.0
//
// The composed pipeline: frontend config + speech encoder + adaptor +
// decoder LM + vocabulary, with dual-LoRA state.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "llast/adaptor.hpp"
#include "llast/audio.hpp"
#include "llast/encoder.hpp"
#include "llast/lm.hpp"
#include "llast/lora.hpp"
#include "llast/vocab.hpp"

namespace llast {

// Default adapter targets: attention query/value projections, the canonical
// LoRA placement. Configurable through LoRAConfig::targets.
inline std::vector<std::string> default_s_lora_targets() { return {"encoder.*.attn.wq", "encoder.*.attn.wv"}; }
inline std::vector<std::string> default_l_lora_targets() { return {"lm.*.attn.wq", "lm.*.attn.wv"}; }

template <typename S>
struct LLaSTModel {
    FrontendConfig frontend;
    Vocabulary vocab;
    Encoder<S> encoder;
    Adaptor<S> adaptor;
    DecoderLM<S> lm;
    uint64_t seed = 0;

    static LLaSTModel build(const FrontendConfig& fcfg, EncoderConfig ecfg, AdaptorConfig acfg, LMConfig lcfg,
                            Vocabulary vocab, uint64_t seed) {
        ecfg.in_dim = fcfg.n_mels;
        acfg.in_dim = ecfg.d_model;
        acfg.out_dim = lcfg.d_model;
        lcfg.vocab_size = vocab.size();
        LLaSTModel m;
        m.frontend = fcfg;
        m.vocab = std::move(vocab);
        m.encoder = Encoder<S>::build(ecfg, derive_seed(seed, "encoder"));
        m.adaptor = Adaptor<S>::build(acfg, derive_seed(seed, "adaptor"));
        m.lm = DecoderLM<S>::build(lcfg, derive_seed(seed, "lm"));
        m.seed = seed;
        return m;
    }

    std::vector<Parameter<S>*> parameters() {
        std::vector<Parameter<S>*> out;
        encoder.collect(out);
        adaptor.collect(out);
        lm.collect(out);
        return out;
    }

    std::vector<Parameter<S>*> trainable_parameters() {
        std::vector<Parameter<S>*> out;
        for (auto* p : parameters()) {
            if (p->trainable) out.push_back(p);
        }
        return out;
    }

    std::vector<Linear<S>*> linears() {
        std::vector<Linear<S>*> out;
        encoder.collect_linears(out);
        adaptor.collect_linears(out);
        lm.collect_linears(out);
        return out;
    }

    Linear<S>* find_linear(const std::string& name) {
        for (auto* l : linears()) {
            if (l->name == name) return l;
        }
        return nullptr;
    }

    int inject_s_lora(LoRAConfig cfg) { return inject_s_lora(std::move(cfg), seed); }

    int inject_s_lora(LoRAConfig cfg, uint64_t inject_seed) {
        if (cfg.targets.empty()) cfg.targets = default_s_lora_targets();
        cfg.scope = "s-lora";
        return inject_lora(linears(), cfg, inject_seed);
    }

    int inject_l_lora(LoRAConfig cfg) { return inject_l_lora(std::move(cfg), seed); }

    int inject_l_lora(LoRAConfig cfg, uint64_t inject_seed) {
        if (cfg.targets.empty()) cfg.targets = default_l_lora_targets();
        cfg.scope = "l-lora";
        return inject_lora(linears(), cfg, inject_seed);
    }

    // Freeze everything outside the adaptor MLP and LoRA A/B factors.
    void freeze_base() {
        std::vector<Parameter<S>*> keep;
        adaptor.collect(keep);
        for (auto* l : linears()) {
            if (l->lora) {
                keep.push_back(&l->lora->a);
                keep.push_back(&l->lora->b);
            }
        }
        for (auto* p : parameters()) p->trainable = false;
        for (auto* p : keep) p->trainable = true;
    }

    // features [T x n_mels] -> H_s [T' x lm.d_model], all in-graph.
    typename Graph<S>::Ref forward_features(Graph<S>& g, const Tensor<S>& features) {
        auto z = encoder.encode(g, g.input(features));
        return adaptor.forward(g, z);
    }

    // Whole-pipeline logits for a training/inference sequence.
    typename Graph<S>::Ref forward_sequence(Graph<S>& g, const PromptSequence& seq, const Tensor<S>& features) {
        auto hs = forward_features(g, features);
        const Tensor<S>& h = g.value(hs);
        if (h.dim(0) != seq.audio_rows) {
            throw ShapeError("audio rows mismatch: features give " + std::to_string(h.dim(0)) + ", sequence has " +
                             std::to_string(seq.audio_rows));
        }
        return lm.forward(g, seq, hs);
    }

    int64_t audio_rows_for(int64_t feature_frames) const { return encoder.output_frames(feature_frames); }
};

}  // namespace llast
