// SPDX-License-Identifier: Apache-2.0
//
// Decoder-only causal LM over mixed token/audio-embedding sequences. Audio
// rows are injected directly as input embeddings between the text segments;
// the output head is weight-tied to the token embedding.

#pragma once

#include <string>
#include <vector>

#include "llast/nn.hpp"
#include "llast/vocab.hpp"

namespace llast {

struct LMConfig {
    int64_t d_model = 96;
    int64_t n_layers = 2;
    int64_t n_heads = 4;
    int64_t ff_mult = 4;
    int64_t vocab_size = 0;
    int64_t max_seq_len = 256;

    void validate() const {
        if (d_model <= 0 || n_layers <= 0 || n_heads <= 0 || ff_mult <= 0 || vocab_size <= 0 || max_seq_len <= 0) {
            throw ConfigError("lm config requires positive dimensions");
        }
        if (d_model % n_heads != 0) {
            throw ConfigError("lm d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                              std::to_string(n_heads));
        }
    }
};

// Mixed sequence: text segment, exactly one audio segment of `audio_rows`
// injected embeddings, text segment. In train mode the suffix carries
// BOS + target + EOS; loss_mask is true exactly on target-token positions
// (targets and the closing EOS) and labels hold the input ids there.
struct PromptSequence {
    std::vector<int32_t> prefix_ids;
    std::vector<int32_t> suffix_ids;
    int64_t audio_rows = 0;
    std::vector<uint8_t> loss_mask;  // over the flattened sequence
    std::vector<int32_t> labels;     // -1 outside masked positions

    int64_t length() const {
        return static_cast<int64_t>(prefix_ids.size()) + audio_rows + static_cast<int64_t>(suffix_ids.size());
    }

    int64_t masked_count() const {
        int64_t n = 0;
        for (uint8_t m : loss_mask) n += m ? 1 : 0;
        return n;
    }
};

enum class PromptMode { kTrain, kInfer };

// Tokenize the prompt text, splice the audio span at the <AudioInputs>
// placeholder, and append BOS (+ target + EOS with the loss mask in train
// mode).
PromptSequence assemble_sequence(const Vocabulary& vocab, const std::string& prompt_text,
                                 const std::string& target_text, int64_t audio_rows, PromptMode mode);

template <typename S>
struct DecoderLM {
    LMConfig cfg;
    Parameter<S> tok_emb;  // [V x d]
    Parameter<S> pos_emb;  // [max_seq_len x d], learned
    std::vector<TransformerBlock<S>> blocks;
    LayerNormModule<S> ln_f;

    static DecoderLM build(const LMConfig& cfg, uint64_t seed) {
        cfg.validate();
        DecoderLM m;
        m.cfg = cfg;
        {
            Rng rng(derive_seed(seed, "lm.tok_emb"));
            m.tok_emb.name = "lm.tok_emb";
            m.tok_emb.value = Tensor<S>::randn({cfg.vocab_size, cfg.d_model}, rng, S(0.02));
        }
        {
            Rng rng(derive_seed(seed, "lm.pos_emb"));
            m.pos_emb.name = "lm.pos_emb";
            m.pos_emb.value = Tensor<S>::randn({cfg.max_seq_len, cfg.d_model}, rng, S(0.02));
        }
        m.blocks.resize(static_cast<size_t>(cfg.n_layers));
        for (int64_t i = 0; i < cfg.n_layers; ++i) {
            m.blocks[static_cast<size_t>(i)].init("lm.block" + std::to_string(i), cfg.d_model, cfg.n_heads,
                                                  cfg.ff_mult, seed);
        }
        m.ln_f.init("lm.ln_f", cfg.d_model);
        return m;
    }

    // audio must be a [audio_rows x d_model] node (or invalid when
    // seq.audio_rows == 0). Returns logits [L x vocab_size].
    typename Graph<S>::Ref forward(Graph<S>& g, const PromptSequence& seq, typename Graph<S>::Ref audio) {
        int64_t L = seq.length();
        if (L > cfg.max_seq_len) {
            throw LengthError("sequence length " + std::to_string(L) + " > limit " + std::to_string(cfg.max_seq_len));
        }
        if (L == 0) throw ShapeError("empty prompt sequence");
        if (seq.audio_rows > 0) {
            const Tensor<S>& a = g.value(audio);
            if (!audio.valid() || a.rank() != 2 || a.dim(0) != seq.audio_rows || a.dim(1) != cfg.d_model) {
                throw ShapeError("audio segment must be [" + std::to_string(seq.audio_rows) + " x " +
                                 std::to_string(cfg.d_model) + "]");
            }
        }
        auto tok = g.param(tok_emb);
        std::vector<typename Graph<S>::Ref> parts;
        if (!seq.prefix_ids.empty()) parts.push_back(g.embedding(tok, seq.prefix_ids));
        if (seq.audio_rows > 0) parts.push_back(audio);
        if (!seq.suffix_ids.empty()) parts.push_back(g.embedding(tok, seq.suffix_ids));
        auto x = parts.size() == 1 ? parts[0] : g.concat(parts, 0);
        x = g.add(x, g.slice(g.param(pos_emb), 0, 0, L));
        auto mask = g.input(causal_mask<S>(L));
        for (auto& b : blocks) x = b.forward(g, x, mask);
        x = ln_f.forward(g, x);
        return g.matmul(x, g.transpose(tok));  // weight-tied head
    }

    void collect(std::vector<Parameter<S>*>& out) {
        out.push_back(&tok_emb);
        out.push_back(&pos_emb);
        for (auto& b : blocks) b.collect(out);
        ln_f.collect(out);
    }

    void collect_linears(std::vector<Linear<S>*>& out) {
        for (auto& b : blocks) b.collect_linears(out);
    }
};

}  // namespace llast
