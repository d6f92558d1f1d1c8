// SPDX-License-Identifier: Apache-2.0
//
// Decode every manifest record with beam search and score corpus BLEU per
// language pair; report rows mirror the per-pair evaluation table.

#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "llast/bleu.hpp"
#include "llast/inference.hpp"

namespace llast {

struct EvalHypothesis {
    std::string id;
    std::string pair;
    std::string hyp;
    std::string ref;
};

struct PairReport {
    std::string pair;
    BleuScore bleu;
};

struct EvalResult {
    std::vector<EvalHypothesis> hyps;  // ordered by record id
    std::vector<PairReport> pairs;
    double corpus_score = 0.0;  // BLEU over all pairs pooled

    int64_t exact_matches() const {
        int64_t n = 0;
        for (const auto& h : hyps) n += h.hyp == h.ref ? 1 : 0;
        return n;
    }
};

inline EvalResult evaluate(LLaSTModel<float>& model, const std::vector<SampleRecord>& records,
                           const LangRegistry& reg, const TranslateOptions& opt,
                           BleuSmoothing smoothing = BleuSmoothing::kExpFloor) {
    if (records.empty()) throw ConfigError("evaluation over an empty manifest");
    std::vector<SampleRecord> ordered = records;
    std::sort(ordered.begin(), ordered.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.id < b.id; });

    EvalResult result;
    for (const auto& r : ordered) {
        TranslateOptions o = opt;
        o.transcript = opt.include_transcript ? r.src_text : "";
        AudioWaveform w = read_audio(r.audio_path);
        std::string hyp = translate(model, w, r.src_lang, r.tgt_lang, reg, o);
        result.hyps.push_back({r.id, r.pair(), hyp, r.tgt_text});
    }

    std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> by_pair;
    std::vector<std::string> all_h, all_r;
    for (const auto& h : result.hyps) {
        by_pair[h.pair].first.push_back(h.hyp);
        by_pair[h.pair].second.push_back(h.ref);
        all_h.push_back(h.hyp);
        all_r.push_back(h.ref);
    }
    for (const auto& [pair, hr] : by_pair) {
        result.pairs.push_back({pair, corpus_bleu(hr.first, hr.second, smoothing)});
    }
    result.corpus_score = corpus_bleu(all_h, all_r, smoothing).score;
    return result;
}

// pair \t bleu \t p1..p4 \t bp \t hyp_len \t ref_len
inline void write_eval_report(const std::string& path, const EvalResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write report: " + path);
    out << "pair\tbleu\tp1\tp2\tp3\tp4\tbp\thyp_len\tref_len\n";
    for (const auto& p : result.pairs) {
        char line[256];
        std::snprintf(line, sizeof(line), "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%lld\t%lld\n", p.pair.c_str(),
                      p.bleu.score, p.bleu.precisions[0], p.bleu.precisions[1], p.bleu.precisions[2],
                      p.bleu.precisions[3], p.bleu.brevity_penalty, static_cast<long long>(p.bleu.hyp_len),
                      static_cast<long long>(p.bleu.ref_len));
        out << line;
    }
    if (!out) throw IoError("write failed: " + path);
}

// id \t pair \t hypothesis \t reference, for recomputation checks
inline void write_hypotheses(const std::string& path, const EvalResult& result) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write hypotheses: " + path);
    out << "id\tpair\thyp\tref\n";
    for (const auto& h : result.hyps) {
        out << h.id << '\t' << h.pair << '\t' << h.hyp << '\t' << h.ref << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace llast
