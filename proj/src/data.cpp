// SPDX-License-Identifier: Apache-2.0

#include "llast/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "llast/audio.hpp"
#include "llast/error.hpp"
#include "llast/rng.hpp"

namespace llast {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestHeader = "id\taudio\tsrc_lang\ttgt_lang\tsrc_text\ttgt_text";

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

void check_text_field(const std::string& text, const std::string& what) {
    if (text.find('\t') != std::string::npos || text.find('\n') != std::string::npos ||
        text.find('\r') != std::string::npos) {
        throw ConfigError(what + " contains a tab or newline, which the manifest format rejects");
    }
}

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string join_sentence(const std::vector<int>& idx, const std::vector<LexiconEntry>& lex, bool src_side) {
    std::string out;
    for (size_t i = 0; i < idx.size(); ++i) {
        const auto& e = lex[static_cast<size_t>(idx[i])];
        std::string w = src_side ? e.src : e.tgt;
        if (i == 0) {
            out += capitalize(w);
        } else {
            out += ' ';
            out += w;
        }
    }
    out += '.';
    return out;
}

}  // namespace

std::vector<SampleRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty manifest file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kManifestHeader) {
        throw ParseError(path + ":1: bad header, expected '" + std::string(kManifestHeader) + "'");
    }
    fs::path base = fs::path(path).parent_path();
    std::vector<SampleRecord> records;
    std::set<std::string> seen;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cols = split_tabs(line);
        if (cols.size() != 6) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected 6 columns, got " +
                             std::to_string(cols.size()));
        }
        SampleRecord r;
        r.id = cols[0];
        r.audio_path = cols[1];
        r.src_lang = cols[2];
        r.tgt_lang = cols[3];
        r.src_text = cols[4];
        r.tgt_text = cols[5];
        if (r.id.empty()) throw ParseError(path + ":" + std::to_string(line_no) + ": empty id");
        if (!seen.insert(r.id).second) {
            throw ParseError(path + ":" + std::to_string(line_no) + ": duplicate id '" + r.id + "'");
        }
        fs::path ap(r.audio_path);
        if (ap.is_relative()) r.audio_path = (base / ap).string();
        records.push_back(std::move(r));
    }
    return records;
}

void save_manifest(const std::string& path, const std::vector<SampleRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << kManifestHeader << '\n';
    for (const auto& r : records) {
        check_text_field(r.src_text, "src_text of " + r.id);
        check_text_field(r.tgt_text, "tgt_text of " + r.id);
        out << r.id << '\t' << r.audio_path << '\t' << r.src_lang << '\t' << r.tgt_lang << '\t' << r.src_text << '\t'
            << r.tgt_text << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

PromptParts build_prompt(const SampleRecord& r, const LangRegistry& reg, BuildMode mode, bool include_transcript) {
    const std::string& src_name = reg.name(r.src_lang);
    PromptParts parts;
    if (r.task == Task::kASR) {
        parts.prompt_text =
            "<audio><AudioInputs></audio> Transcribe the " + src_name + " sentence to " + src_name + ".";
    } else {
        const std::string& tgt_name = reg.name(r.tgt_lang);
        parts.prompt_text =
            "<audio><AudioInputs></audio> Translate the " + src_name + " sentence to " + tgt_name + ".";
    }
    if (include_transcript) {
        parts.prompt_text += " Transcripts of AudioInputs is \"" + r.src_text + "\"";
    }
    if (mode == BuildMode::kTrain) parts.target_text = r.target();
    return parts;
}

std::vector<SampleRecord> asr_augment(const std::vector<SampleRecord>& records, const MixPolicy& policy,
                                      int64_t epoch) {
    if (policy.asr_ratio < 0.0 || policy.asr_ratio > 1.0) {
        throw ConfigError("asr_ratio must be in [0, 1], got " + std::to_string(policy.asr_ratio));
    }
    size_t n = records.size();
    size_t clones = static_cast<size_t>(std::llround(policy.asr_ratio * static_cast<double>(n)));

    std::vector<size_t> pick(n);
    for (size_t i = 0; i < n; ++i) pick[i] = i;
    {
        Rng rng(derive_seed(policy.shuffle_seed, "asr-pick#" + std::to_string(epoch)));
        rng.shuffle(pick);
    }
    std::vector<SampleRecord> out;
    out.reserve(n + clones);
    for (const auto& r : records) {
        out.push_back(r);
        out.back().task = Task::kST;
    }
    for (size_t i = 0; i < clones; ++i) {
        SampleRecord clone = records[pick[i]];
        clone.task = Task::kASR;
        out.push_back(std::move(clone));
    }

    bool weighted = false;
    for (const auto& [pair, w] : policy.language_weights) {
        (void)pair;
        if (w != 1.0) weighted = true;
    }
    Rng order_rng(derive_seed(policy.shuffle_seed, "order#" + std::to_string(epoch)));
    if (!weighted) {
        order_rng.shuffle(out);
        return out;
    }

    // Smooth weighted round-robin over language pairs; every record is
    // emitted exactly once, weights shape only the interleaving.
    std::map<std::string, std::vector<SampleRecord>> groups;
    for (auto& r : out) groups[r.pair()].push_back(std::move(r));
    for (auto& [pair, g] : groups) {
        (void)pair;
        order_rng.shuffle(g);
    }
    std::map<std::string, double> credit;
    std::map<std::string, size_t> cursor;
    double total_weight = 0.0;
    for (const auto& [pair, g] : groups) {
        (void)g;
        double w = 1.0;
        auto it = policy.language_weights.find(pair);
        if (it != policy.language_weights.end()) w = std::max(it->second, 1e-9);
        credit[pair] = 0.0;
        cursor[pair] = 0;
        total_weight += w;
    }
    std::vector<SampleRecord> merged;
    merged.reserve(out.size());
    while (merged.size() < out.size()) {
        std::string best;
        for (const auto& [pair, g] : groups) {
            if (cursor[pair] >= g.size()) continue;
            double w = 1.0;
            auto it = policy.language_weights.find(pair);
            if (it != policy.language_weights.end()) w = std::max(it->second, 1e-9);
            credit[pair] += w;
            if (best.empty() || credit[pair] > credit[best]) best = pair;
        }
        credit[best] -= total_weight;
        merged.push_back(std::move(groups[best][cursor[best]++]));
    }
    return merged;
}

const std::vector<LexiconEntry>& builtin_lexicon(const std::string& pair) {
    // All pairs target English and share one English word list, so a model
    // trained on one pair already knows the output vocabulary of the others;
    // cross-pair adaptation is then about sounds and sources, not about
    // emitting never-seen tokens. Source sides and per-pair tone maps differ.
    static const std::vector<std::string> english = {"cat", "dog",  "house", "tree",  "book", "apple", "water", "bread",
                                                     "red", "blue", "big",   "small", "eats", "sees",  "likes", "carries"};
    auto zip = [](const std::vector<std::string>& src) {
        std::vector<LexiconEntry> out;
        for (size_t i = 0; i < src.size(); ++i) out.push_back({src[i], english[i]});
        return out;
    };
    static const std::map<std::string, std::vector<LexiconEntry>> lexicons = {
        {"fr-en", zip({"chat", "chien", "maison", "arbre", "livre", "pomme", "eau", "pain", "rouge", "bleu", "grand",
                       "petit", "mange", "voit", "aime", "porte"})},
        {"de-en", zip({"katze", "hund", "haus", "baum", "buch", "apfel", "wasser", "brot", "rot", "blau", "gross",
                       "klein", "isst", "sieht", "mag", "traegt"})},
        {"es-en", zip({"gato", "perro", "casa", "arbol", "libro", "manzana", "agua", "pan", "rojo", "azul", "grande",
                       "chico", "come", "mira", "quiere", "lleva"})},
        {"it-en", zip({"gatto", "cane", "casa", "albero", "libro", "mela", "acqua", "pane", "rosso", "blu", "grosso",
                       "piccolo", "mangia", "vede", "ama", "porta"})},
        {"zh-en", zip({"mao", "gou", "fangzi", "shu", "shuben", "pingguo", "shui", "mianbao", "hong", "lan", "da",
                       "xiao", "chi", "kan", "ai", "na"})},
        {"ja-en", zip({"neko", "inu", "ie", "ki", "hon", "ringo", "mizu", "pan", "aka", "ao", "ookii", "chiisai",
                       "taberu", "miru", "suki", "motsu"})},
    };
    auto it = lexicons.find(pair);
    if (it == lexicons.end()) throw ConfigError("no builtin lexicon for language pair: " + pair);
    return it->second;
}

std::vector<std::string> builtin_lexicon_pairs() { return {"de-en", "es-en", "fr-en", "it-en", "ja-en", "zh-en"}; }

std::vector<std::string> vocabulary_seed_texts(const LangRegistry& reg) {
    std::vector<std::string> texts;
    for (const auto& pair : builtin_lexicon_pairs()) {
        const auto& lex = builtin_lexicon(pair);
        std::string code = pair.substr(0, pair.find('-'));
        // Template sentences with both language names.
        SampleRecord probe;
        probe.src_lang = code;
        probe.tgt_lang = "en";
        probe.src_text = "";
        probe.task = Task::kST;
        texts.push_back(build_prompt(probe, reg, BuildMode::kInfer, false).prompt_text);
        probe.task = Task::kASR;
        texts.push_back(build_prompt(probe, reg, BuildMode::kInfer, false).prompt_text);
        texts.push_back(" Transcripts of AudioInputs is \"\"");
        // Every lexicon word in sentence-initial and mid-sentence form.
        for (const auto& e : lex) {
            texts.push_back(capitalize(e.src) + " " + e.src + ".");
            texts.push_back(capitalize(e.tgt) + " " + e.tgt + ".");
        }
    }
    return texts;
}

std::vector<double> tone_map(const std::string& pair, uint64_t seed) {
    const auto& lex = builtin_lexicon(pair);
    auto centers = mel_bin_center_freqs(80, 16000);
    // Bins spaced 3 apart keep tones in distinct filters, clear of the lowest
    // and highest bands; a per-pair offset puts different pairs on different
    // bins so cross-pair adaptation touches unseen filters.
    int offset = static_cast<int>(derive_seed(0x544f4e45, pair) % 3);
    std::vector<int> bins;
    for (size_t i = 0; i < lex.size(); ++i) bins.push_back(6 + offset + 3 * static_cast<int>(i));
    Rng rng(derive_seed(seed, "tones:" + pair));
    rng.shuffle(bins);
    std::vector<double> freqs;
    freqs.reserve(lex.size());
    for (size_t i = 0; i < lex.size(); ++i) freqs.push_back(centers[static_cast<size_t>(bins[i])]);
    return freqs;
}

std::vector<float> render_tones(const std::vector<int>& word_indices, const std::vector<double>& freqs,
                                double tone_seconds, int sample_rate) {
    constexpr double kPi = 3.14159265358979323846;
    int seg = static_cast<int>(std::lround(tone_seconds * sample_rate));
    int ramp = std::min(seg / 8, sample_rate / 200);  // short cosine ramps against clicks
    std::vector<float> out;
    out.reserve(word_indices.size() * static_cast<size_t>(seg));
    for (int idx : word_indices) {
        double f = freqs.at(static_cast<size_t>(idx));
        for (int i = 0; i < seg; ++i) {
            double env = 1.0;
            if (i < ramp) env = 0.5 * (1.0 - std::cos(kPi * i / ramp));
            if (i >= seg - ramp) env = 0.5 * (1.0 - std::cos(kPi * (seg - 1 - i) / ramp));
            out.push_back(static_cast<float>(0.3 * env * std::sin(2.0 * kPi * f * i / sample_rate)));
        }
    }
    return out;
}

std::vector<SampleRecord> synth_corpus(const std::string& out_dir, const SynthParams& params,
                                       const LangRegistry& reg) {
    if (params.n_items < 1) throw ConfigError("synth_corpus requires n_items >= 1");
    if (params.pairs.empty()) throw ConfigError("synth_corpus requires at least one language pair");
    for (const auto& pair : params.pairs) {
        size_t dash = pair.find('-');
        if (dash == std::string::npos) throw ConfigError("language pair must look like fr-en: " + pair);
        reg.name(pair.substr(0, dash));
        reg.name(pair.substr(dash + 1));
        builtin_lexicon(pair);
    }

    fs::path root(out_dir);
    fs::create_directories(root / "audio");

    std::vector<SampleRecord> records;
    std::map<std::string, std::set<std::vector<int>>> used;
    std::map<std::string, std::vector<double>> tones;
    for (const auto& pair : params.pairs) tones[pair] = tone_map(pair, params.seed);

    Rng rng(derive_seed(params.seed, "sentences"));
    for (int64_t i = 0; i < params.n_items; ++i) {
        const std::string& pair = params.pairs[static_cast<size_t>(i) % params.pairs.size()];
        const auto& lex = builtin_lexicon(pair);
        std::vector<int> idx;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            int len = params.min_words +
                      static_cast<int>(rng.below(static_cast<uint64_t>(params.max_words - params.min_words + 1)));
            idx.clear();
            for (int k = 0; k < len; ++k) idx.push_back(static_cast<int>(rng.below(lex.size())));
            if (used[pair].insert(idx).second) break;
            idx.clear();
        }
        if (idx.empty()) throw ConfigError("could not generate enough unique sentences for " + pair);

        char id[32];
        std::snprintf(id, sizeof(id), "utt%04lld", static_cast<long long>(i));
        SampleRecord r;
        r.id = id;
        size_t dash = pair.find('-');
        r.src_lang = pair.substr(0, dash);
        r.tgt_lang = pair.substr(dash + 1);
        r.src_text = join_sentence(idx, lex, /*src_side=*/true);
        r.tgt_text = join_sentence(idx, lex, /*src_side=*/false);

        AudioWaveform w;
        w.sample_rate = 16000;
        w.samples = render_tones(idx, tones[pair], params.tone_seconds, w.sample_rate);
        std::string rel = std::string("audio/") + id + ".raw";
        write_raw((root / rel).string(), w);
        r.audio_path = rel;  // manifest keeps the relative path
        records.push_back(std::move(r));
    }

    // Manifest rows keep relative audio paths; loaders resolve against the
    // manifest location.
    {
        std::ofstream out(root / "manifest.tsv", std::ios::binary);
        if (!out) throw IoError("cannot write manifest under " + out_dir);
        out << kManifestHeader << '\n';
        for (const auto& r : records) {
            out << r.id << '\t' << r.audio_path << '\t' << r.src_lang << '\t' << r.tgt_lang << '\t' << r.src_text
                << '\t' << r.tgt_text << '\n';
        }
    }
    reg.save((root / "langs.tsv").string());

    for (auto& r : records) r.audio_path = (root / r.audio_path).string();
    return records;
}

}  // namespace llast
