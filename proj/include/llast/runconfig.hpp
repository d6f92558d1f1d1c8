// SPDX-License-Identifier: Apache-2.0
//
// One INI-style file carries every module configuration. Unknown keys are
// rejected; the fully resolved values (defaults included) are echoed into
// <out>/run_config.resolved.

#pragma once

#include <string>
#include <vector>

#include "llast/adaptor.hpp"
#include "llast/audio.hpp"
#include "llast/encoder.hpp"
#include "llast/inference.hpp"
#include "llast/lm.hpp"
#include "llast/trainer.hpp"

namespace llast {

struct IniEntry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

// sections + key=value, '#' or ';' comments, whitespace-trimmed.
std::vector<IniEntry> parse_ini(const std::string& text, const std::string& origin);

struct RunConfig {
    FrontendConfig frontend;
    EncoderConfig encoder;
    AdaptorConfig adaptor;
    LMConfig lm;

    // [lora]
    int64_t s_rank = 8;
    double s_alpha = 0.0;  // 0: alpha = rank
    int64_t l_rank = 16;
    double l_alpha = 0.0;
    std::vector<std::string> s_targets;  // empty: module defaults
    std::vector<std::string> l_targets;

    // [train]
    uint64_t seed = 0;
    int64_t steps = 500;
    int64_t batch_size = 8;
    int64_t warmup_steps = 0;  // 0: 10% of steps
    int64_t checkpoint_every = 0;
    double asr_ratio = 0.5;
    bool include_transcript = true;  // transcript hint in training prompts
    OptimizerConfig optimizer;

    // [data]
    std::string langs_file;

    // [decode]
    DecodeConfig decode;
    bool decode_transcript = false;  // transcript hint at inference

    static RunConfig load(const std::string& path);      // ConfigError on unknown keys
    void apply(const std::vector<IniEntry>& entries);    // overrides
    std::string resolved_text() const;                   // echo of every effective value

    int64_t effective_warmup() const {
        if (warmup_steps > 0) return warmup_steps;
        return std::max<int64_t>(1, steps / 10);
    }
    double effective_s_alpha() const { return s_alpha > 0 ? s_alpha : static_cast<double>(s_rank); }
    double effective_l_alpha() const { return l_alpha > 0 ? l_alpha : static_cast<double>(l_rank); }
};

}  // namespace llast
