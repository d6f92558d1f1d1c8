// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <fstream>
#include <sstream>

#include "llast/runconfig.hpp"

namespace llast {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= s.size()) {
        size_t comma = s.find(',', start);
        if (comma == std::string::npos) comma = s.size();
        std::string part = trim(s.substr(start, comma - start));
        if (!part.empty()) out.push_back(part);
        start = comma + 1;
    }
    return out;
}

std::string join_csv(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += v[i];
    }
    return out;
}

int64_t to_int(const IniEntry& e) {
    try {
        size_t used = 0;
        int64_t v = std::stoll(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(e.line) + ": '" + e.value + "' is not an integer for " +
                          e.section + "." + e.key);
    }
}

double to_double(const IniEntry& e) {
    try {
        size_t used = 0;
        double v = std::stod(e.value, &used);
        if (used != e.value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(e.line) + ": '" + e.value + "' is not a number for " +
                          e.section + "." + e.key);
    }
}

bool to_bool(const IniEntry& e) {
    if (e.value == "1" || e.value == "true" || e.value == "yes") return true;
    if (e.value == "0" || e.value == "false" || e.value == "no") return false;
    throw ConfigError("config line " + std::to_string(e.line) + ": '" + e.value + "' is not a boolean for " +
                      e.section + "." + e.key);
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<IniEntry> parse_ini(const std::string& text, const std::string& origin) {
    std::vector<IniEntry> entries;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3) {
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header '" + t + "'");
            }
            section = t.substr(1, t.size() - 2);
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key=value, got '" + t + "'");
        }
        if (section.empty()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside any [section]");
        }
        entries.push_back({section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)), line_no});
    }
    return entries;
}

void RunConfig::apply(const std::vector<IniEntry>& entries) {
    for (const auto& e : entries) {
        const std::string& s = e.section;
        const std::string& k = e.key;
        if (s == "frontend") {
            if (k == "n_mels") frontend.n_mels = static_cast<int>(to_int(e));
            else if (k == "win_samples") frontend.win_samples = static_cast<int>(to_int(e));
            else if (k == "hop_samples") frontend.hop_samples = static_cast<int>(to_int(e));
            else if (k == "normalize") frontend.normalize = to_bool(e);
            else throw ConfigError("unknown config key [frontend] " + k);
        } else if (s == "encoder") {
            if (k == "d_model") encoder.d_model = to_int(e);
            else if (k == "n_layers") encoder.n_layers = to_int(e);
            else if (k == "n_heads") encoder.n_heads = to_int(e);
            else if (k == "ff_mult") encoder.ff_mult = to_int(e);
            else if (k == "subsample_factor") encoder.subsample_factor = to_int(e);
            else if (k == "max_frames") encoder.max_frames = to_int(e);
            else throw ConfigError("unknown config key [encoder] " + k);
        } else if (s == "adaptor") {
            if (k == "hidden_dim") adaptor.hidden_dim = to_int(e);
            else throw ConfigError("unknown config key [adaptor] " + k);
        } else if (s == "lm") {
            if (k == "d_model") lm.d_model = to_int(e);
            else if (k == "n_layers") lm.n_layers = to_int(e);
            else if (k == "n_heads") lm.n_heads = to_int(e);
            else if (k == "ff_mult") lm.ff_mult = to_int(e);
            else if (k == "max_seq_len") lm.max_seq_len = to_int(e);
            else throw ConfigError("unknown config key [lm] " + k);
        } else if (s == "lora") {
            if (k == "s_rank") s_rank = to_int(e);
            else if (k == "s_alpha") s_alpha = to_double(e);
            else if (k == "l_rank") l_rank = to_int(e);
            else if (k == "l_alpha") l_alpha = to_double(e);
            else if (k == "s_targets") s_targets = split_csv(e.value);
            else if (k == "l_targets") l_targets = split_csv(e.value);
            else throw ConfigError("unknown config key [lora] " + k);
        } else if (s == "train") {
            if (k == "seed") seed = static_cast<uint64_t>(to_int(e));
            else if (k == "steps") steps = to_int(e);
            else if (k == "batch_size") batch_size = to_int(e);
            else if (k == "warmup_steps") warmup_steps = to_int(e);
            else if (k == "checkpoint_every") checkpoint_every = to_int(e);
            else if (k == "asr_ratio") asr_ratio = to_double(e);
            else if (k == "include_transcript") include_transcript = to_bool(e);
            else if (k == "peak_lr") optimizer.peak_lr = to_double(e);
            else if (k == "beta1") optimizer.beta1 = to_double(e);
            else if (k == "beta2") optimizer.beta2 = to_double(e);
            else if (k == "eps") optimizer.eps = to_double(e);
            else if (k == "weight_decay") optimizer.weight_decay = to_double(e);
            else if (k == "clip_norm") optimizer.clip_norm = to_double(e);
            else throw ConfigError("unknown config key [train] " + k);
        } else if (s == "data") {
            if (k == "langs_file") langs_file = e.value;
            else throw ConfigError("unknown config key [data] " + k);
        } else if (s == "decode") {
            if (k == "beam_size") decode.beam_size = static_cast<int>(to_int(e));
            else if (k == "max_new_tokens") decode.max_new_tokens = static_cast<int>(to_int(e));
            else if (k == "length_norm_alpha") decode.length_norm_alpha = to_double(e);
            else if (k == "include_transcript") decode_transcript = to_bool(e);
            else throw ConfigError("unknown config key [decode] " + k);
        } else {
            throw ConfigError("unknown config section [" + s + "]");
        }
    }
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    RunConfig cfg;
    cfg.apply(parse_ini(ss.str(), path));
    return cfg;
}

std::string RunConfig::resolved_text() const {
    std::ostringstream out;
    out << "[frontend]\n"
        << "n_mels=" << frontend.n_mels << "\n"
        << "win_samples=" << frontend.win_samples << "\n"
        << "hop_samples=" << frontend.hop_samples << "\n"
        << "normalize=" << (frontend.normalize ? 1 : 0) << "\n\n";
    out << "[encoder]\n"
        << "d_model=" << encoder.d_model << "\n"
        << "n_layers=" << encoder.n_layers << "\n"
        << "n_heads=" << encoder.n_heads << "\n"
        << "ff_mult=" << encoder.ff_mult << "\n"
        << "subsample_factor=" << encoder.subsample_factor << "\n"
        << "max_frames=" << encoder.max_frames << "\n\n";
    out << "[adaptor]\n"
        << "hidden_dim=" << adaptor.hidden_dim << "\n\n";
    out << "[lm]\n"
        << "d_model=" << lm.d_model << "\n"
        << "n_layers=" << lm.n_layers << "\n"
        << "n_heads=" << lm.n_heads << "\n"
        << "ff_mult=" << lm.ff_mult << "\n"
        << "max_seq_len=" << lm.max_seq_len << "\n\n";
    out << "[lora]\n"
        << "s_rank=" << s_rank << "\n"
        << "s_alpha=" << fmt_double(effective_s_alpha()) << "\n"
        << "l_rank=" << l_rank << "\n"
        << "l_alpha=" << fmt_double(effective_l_alpha()) << "\n"
        << "s_targets=" << join_csv(s_targets.empty() ? default_s_lora_targets() : s_targets) << "\n"
        << "l_targets=" << join_csv(l_targets.empty() ? default_l_lora_targets() : l_targets) << "\n\n";
    out << "[train]\n"
        << "seed=" << seed << "\n"
        << "steps=" << steps << "\n"
        << "batch_size=" << batch_size << "\n"
        << "warmup_steps=" << effective_warmup() << "\n"
        << "checkpoint_every=" << checkpoint_every << "\n"
        << "asr_ratio=" << fmt_double(asr_ratio) << "\n"
        << "include_transcript=" << (include_transcript ? 1 : 0) << "\n"
        << "peak_lr=" << fmt_double(optimizer.peak_lr) << "\n"
        << "beta1=" << fmt_double(optimizer.beta1) << "\n"
        << "beta2=" << fmt_double(optimizer.beta2) << "\n"
        << "eps=" << fmt_double(optimizer.eps) << "\n"
        << "weight_decay=" << fmt_double(optimizer.weight_decay) << "\n"
        << "clip_norm=" << fmt_double(optimizer.clip_norm) << "\n\n";
    out << "[data]\n"
        << "langs_file=" << langs_file << "\n\n";
    out << "[decode]\n"
        << "beam_size=" << decode.beam_size << "\n"
        << "max_new_tokens=" << decode.max_new_tokens << "\n"
        << "length_norm_alpha=" << fmt_double(decode.length_norm_alpha) << "\n"
        << "include_transcript=" << (decode_transcript ? 1 : 0) << "\n";
    return out.str();
}

}  // namespace llast
