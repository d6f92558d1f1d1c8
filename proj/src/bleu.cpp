// SPDX-License-Identifier: Apache-2.0

#include "llast/bleu.hpp"

#include <cmath>
#include <map>
#include <regex>
#include <sstream>

#include "llast/error.hpp"

namespace llast {

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

using NgramCounts = std::map<std::vector<std::string>, int64_t>;

NgramCounts ngrams(const std::vector<std::string>& toks, int n) {
    NgramCounts counts;
    if (static_cast<int>(toks.size()) < n) return counts;
    for (size_t i = 0; i + static_cast<size_t>(n) <= toks.size(); ++i) {
        counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                        toks.begin() + static_cast<std::ptrdiff_t>(i) + n)]++;
    }
    return counts;
}

}  // namespace

std::vector<std::string> tokenize_13a(const std::string& text) {
    std::string s = text;
    // language-independent normalization
    s = replace_all(s, "<skipped>", "");
    s = replace_all(s, "-\n", "");
    s = replace_all(s, "\n", " ");
    s = replace_all(s, "&quot;", "\"");
    s = replace_all(s, "&amp;", "&");
    s = replace_all(s, "&lt;", "<");
    s = replace_all(s, "&gt;", ">");

    // mteval-v13a tokenization
    static const std::regex punct(R"(([\{-\~\[-\` -\&\(-\+\:-\@\/]))");
    static const std::regex period_before(R"(([^0-9])([\.,]))");
    static const std::regex period_after(R"(([\.,])([^0-9]))");
    static const std::regex digit_dash(R"(([0-9])(-))");
    s = " " + s + " ";
    s = std::regex_replace(s, punct, " $1 ");
    s = std::regex_replace(s, period_before, "$1 $2 ");
    s = std::regex_replace(s, period_after, " $1 $2");
    s = std::regex_replace(s, digit_dash, "$1 - ");

    std::vector<std::string> toks;
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) toks.push_back(tok);
    return toks;
}

BleuScore corpus_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                      BleuSmoothing smoothing) {
    if (hyps.size() != refs.size()) {
        throw ConfigError("corpus_bleu: " + std::to_string(hyps.size()) + " hypotheses vs " +
                          std::to_string(refs.size()) + " references");
    }
    if (hyps.empty()) throw ConfigError("corpus_bleu: empty corpus");

    int64_t matched[4] = {0, 0, 0, 0};
    int64_t total[4] = {0, 0, 0, 0};
    BleuScore out;
    for (size_t i = 0; i < hyps.size(); ++i) {
        auto h = tokenize_13a(hyps[i]);
        auto r = tokenize_13a(refs[i]);
        out.hyp_len += static_cast<int64_t>(h.size());
        out.ref_len += static_cast<int64_t>(r.size());
        for (int n = 1; n <= 4; ++n) {
            auto hc = ngrams(h, n);
            auto rc = ngrams(r, n);
            for (const auto& [g, c] : hc) {
                auto it = rc.find(g);
                if (it != rc.end()) matched[n - 1] += std::min(c, it->second);
            }
            total[n - 1] += std::max<int64_t>(0, static_cast<int64_t>(h.size()) - n + 1);
        }
    }

    if (out.hyp_len == 0) {
        out.brevity_penalty = 0.0;
        return out;  // score 0
    }
    out.brevity_penalty =
        out.hyp_len < out.ref_len ? std::exp(1.0 - static_cast<double>(out.ref_len) / out.hyp_len) : 1.0;

    double log_sum = 0.0;
    bool zero = false;
    double floor_scale = 1.0;
    for (int n = 0; n < 4; ++n) {
        double p;
        if (total[n] == 0) {
            p = 0.0;
        } else if (matched[n] > 0) {
            p = static_cast<double>(matched[n]) / static_cast<double>(total[n]);
        } else if (smoothing == BleuSmoothing::kExpFloor) {
            floor_scale *= 2.0;  // halving floor for successive zero orders
            p = 1.0 / (floor_scale * static_cast<double>(total[n]));
        } else {
            p = 0.0;
        }
        out.precisions[n] = total[n] == 0 ? 0.0
                                          : static_cast<double>(matched[n]) / static_cast<double>(total[n]);
        if (p <= 0.0) {
            zero = true;
        } else {
            log_sum += std::log(p);
        }
    }
    out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / 4.0) * 100.0;
    return out;
}

}  // namespace llast
