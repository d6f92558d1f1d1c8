// SPDX-License-Identifier: Apache-2.0
//
// Beam-search generation. The search itself is generic over a next-token
// scorer so it can run against toy probability tables as well as the LM.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "llast/data.hpp"
#include "llast/model.hpp"

namespace llast {

struct DecodeConfig {
    int beam_size = 5;
    int max_new_tokens = 32;
    double length_norm_alpha = 0.0;  // score / len^alpha; 0 = pure sum

    void validate() const {
        if (beam_size < 1) throw ConfigError("beam_size must be >= 1");
        if (max_new_tokens < 1) throw ConfigError("max_new_tokens must be >= 1");
    }
};

struct Hypothesis {
    std::vector<int32_t> ids;  // generated tokens, EOS included when finished
    double log_prob = 0.0;
    bool finished = false;
    bool truncated = false;

    double normalized_score(double alpha) const {
        if (alpha == 0.0 || ids.empty()) return log_prob;
        return log_prob / std::pow(static_cast<double>(ids.size()), alpha);
    }
};

// next_log_probs(generated_prefix) -> log-probability of each next token.
using NextTokenScorer = std::function<std::vector<double>(const std::vector<int32_t>&)>;

// Standard beam search: at each step the top beam_size extensions survive;
// EOS extensions retire to a pool; ties break lexicographically on token ids,
// so results are deterministic. Returns up to beam_size pool entries sorted
// by normalized score; if nothing finished, the best live hypothesis is
// returned flagged truncated.
inline std::vector<Hypothesis> beam_search(const NextTokenScorer& next_log_probs, int32_t eos_id,
                                           const DecodeConfig& cfg) {
    cfg.validate();
    auto seq_less = [](const std::vector<int32_t>& a, const std::vector<int32_t>& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    };

    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> pool;
    for (int step = 0; step < cfg.max_new_tokens && !live.empty(); ++step) {
        std::vector<Hypothesis> candidates;
        for (const Hypothesis& h : live) {
            std::vector<double> lp = next_log_probs(h.ids);
            candidates.reserve(candidates.size() + lp.size());
            for (size_t tok = 0; tok < lp.size(); ++tok) {
                Hypothesis c = h;
                c.ids.push_back(static_cast<int32_t>(tok));
                c.log_prob += lp[tok];
                candidates.push_back(std::move(c));
            }
        }
        size_t keep = std::min(static_cast<size_t>(cfg.beam_size), candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                          candidates.end(), [&](const Hypothesis& a, const Hypothesis& b) {
                              if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                              return seq_less(a.ids, b.ids);
                          });
        candidates.resize(keep);
        live.clear();
        for (Hypothesis& c : candidates) {
            if (c.ids.back() == eos_id) {
                c.finished = true;
                pool.push_back(std::move(c));
            } else {
                live.push_back(std::move(c));
            }
        }
    }
    if (pool.empty()) {
        // no hypothesis finished within the budget
        for (Hypothesis& h : live) h.truncated = true;
        pool = std::move(live);
    }
    std::sort(pool.begin(), pool.end(), [&](const Hypothesis& a, const Hypothesis& b) {
        double na = a.normalized_score(cfg.length_norm_alpha);
        double nb = b.normalized_score(cfg.length_norm_alpha);
        if (na != nb) return na > nb;
        return seq_less(a.ids, b.ids);
    });
    if (pool.size() > static_cast<size_t>(cfg.beam_size)) pool.resize(static_cast<size_t>(cfg.beam_size));
    return pool;
}

// ---- LM-backed scoring ------------------------------------------------------

// log-softmax of the last-position logits for prompt + generated tail.
template <typename S>
std::vector<double> lm_last_log_probs(DecoderLM<S>& lm, const PromptSequence& prompt, const Tensor<S>& audio,
                                      const std::vector<int32_t>& generated) {
    PromptSequence seq = prompt;
    seq.suffix_ids.insert(seq.suffix_ids.end(), generated.begin(), generated.end());
    seq.loss_mask.clear();
    seq.labels.clear();
    Graph<S> g(/*record_tape=*/false);
    auto logits = lm.forward(g, seq, seq.audio_rows > 0 ? g.input(audio) : typename Graph<S>::Ref{});
    const Tensor<S>& lg = g.value(logits);
    int64_t last = lg.dim(0) - 1;
    int64_t v = lg.dim(1);
    double mx = lg.at(last, 0);
    for (int64_t i = 1; i < v; ++i) mx = std::max(mx, static_cast<double>(lg.at(last, i)));
    double z = 0.0;
    for (int64_t i = 0; i < v; ++i) z += std::exp(static_cast<double>(lg.at(last, i)) - mx);
    double lse = mx + std::log(z);
    std::vector<double> out(static_cast<size_t>(v));
    for (int64_t i = 0; i < v; ++i) out[static_cast<size_t>(i)] = static_cast<double>(lg.at(last, i)) - lse;
    return out;
}

struct TranslateOptions {
    DecodeConfig decode;
    bool include_transcript = false;  // ground-truth transcripts are normally unavailable at inference
    std::string transcript;
};

// frontend -> encode -> adapt -> infer prompt -> beam search -> detokenize.
inline std::string translate(LLaSTModel<float>& model, const AudioWaveform& audio, const std::string& src_lang,
                             const std::string& tgt_lang, const LangRegistry& reg, const TranslateOptions& opt) {
    opt.decode.validate();
    SampleRecord probe;
    probe.src_lang = src_lang;
    probe.tgt_lang = tgt_lang;
    probe.src_text = opt.transcript;
    probe.task = Task::kST;
    PromptParts parts = build_prompt(probe, reg, BuildMode::kInfer, opt.include_transcript);

    AcousticFeatures feats = extract_features(audio, model.frontend);
    Tensor<float> hs;
    {
        Graph<float> g(/*record_tape=*/false);
        hs = g.value(model.forward_features(g, feats.frames));
    }
    PromptSequence prompt = assemble_sequence(model.vocab, parts.prompt_text, "", hs.dim(0), PromptMode::kInfer);
    if (prompt.length() + opt.decode.max_new_tokens > model.lm.cfg.max_seq_len) {
        throw LengthError("prompt length " + std::to_string(prompt.length()) + " + " +
                          std::to_string(opt.decode.max_new_tokens) + " new tokens exceeds max_seq_len " +
                          std::to_string(model.lm.cfg.max_seq_len));
    }
    auto scorer = [&](const std::vector<int32_t>& generated) {
        return lm_last_log_probs(model.lm, prompt, hs, generated);
    };
    std::vector<Hypothesis> hyps = beam_search(scorer, Vocabulary::kEos, opt.decode);
    std::vector<int32_t> keep;
    for (int32_t id : hyps.front().ids) {
        if (!model.vocab.is_special(id)) keep.push_back(id);
    }
    return model.vocab.detokenize(keep);
}

}  // namespace llast
