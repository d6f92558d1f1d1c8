// SPDX-License-Identifier: Apache-2.0
//
// Corpus BLEU with mteval-13a compatible tokenization (single reference,
// clipped n-gram precisions n=1..4, brevity penalty).

#pragma once

#include <string>
#include <vector>

namespace llast {

struct BleuScore {
    double score = 0.0;  // in [0, 100]
    double precisions[4] = {0, 0, 0, 0};
    double brevity_penalty = 1.0;
    int64_t hyp_len = 0;
    int64_t ref_len = 0;
};

enum class BleuSmoothing {
    kNone,      // any zero precision zeroes the score
    kExpFloor,  // halving floor for zero counts
};

// mteval-13a rules: normalize whitespace, separate punctuation from words,
// split digits from adjacent non-digit punctuation.
std::vector<std::string> tokenize_13a(const std::string& text);

BleuScore corpus_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs,
                      BleuSmoothing smoothing = BleuSmoothing::kExpFloor);

}  // namespace llast
