// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "llast/error.hpp"
#include "llast/lm.hpp"

namespace llast {

PromptSequence assemble_sequence(const Vocabulary& vocab, const std::string& prompt_text,
                                 const std::string& target_text, int64_t audio_rows, PromptMode mode) {
    std::vector<int32_t> ids = vocab.tokenize(prompt_text);
    auto it = std::find(ids.begin(), ids.end(), Vocabulary::kAudioPlaceholder);
    if (it == ids.end()) throw ConfigError("prompt has no <AudioInputs> placeholder");
    if (std::count(ids.begin(), ids.end(), Vocabulary::kAudioPlaceholder) != 1) {
        throw ConfigError("prompt must contain exactly one <AudioInputs> placeholder");
    }

    PromptSequence seq;
    seq.prefix_ids.assign(ids.begin(), it);
    seq.suffix_ids.assign(it + 1, ids.end());
    seq.audio_rows = audio_rows;

    seq.suffix_ids.push_back(Vocabulary::kBos);
    int64_t target_start = seq.length();
    if (mode == PromptMode::kTrain) {
        std::vector<int32_t> tgt = vocab.tokenize(target_text);
        seq.suffix_ids.insert(seq.suffix_ids.end(), tgt.begin(), tgt.end());
        seq.suffix_ids.push_back(Vocabulary::kEos);
    }

    int64_t L = seq.length();
    seq.loss_mask.assign(static_cast<size_t>(L), 0);
    seq.labels.assign(static_cast<size_t>(L), -1);
    if (mode == PromptMode::kTrain) {
        int64_t suffix_base = static_cast<int64_t>(seq.prefix_ids.size()) + seq.audio_rows;
        for (int64_t pos = target_start; pos < L; ++pos) {
            seq.loss_mask[static_cast<size_t>(pos)] = 1;
            seq.labels[static_cast<size_t>(pos)] = seq.suffix_ids[static_cast<size_t>(pos - suffix_base)];
        }
    }
    return seq;
}

}  // namespace llast
