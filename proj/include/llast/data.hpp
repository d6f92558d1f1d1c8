// SPDX-License-Identifier: Apache-2.0
//
// Manifest ingestion, prompt assembly, ASR-augmented mixing, and the
// deterministic tone-coded synthetic corpus used in place of real data.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "llast/tensor.hpp"

namespace llast {

enum class Task { kST, kASR };

struct SampleRecord {
    std::string id;
    std::string audio_path;  // resolved relative to the manifest at load time
    std::string src_lang;
    std::string tgt_lang;
    std::string src_text;
    std::string tgt_text;
    Task task = Task::kST;

    // ASR records train against the source transcript, ST against the translation.
    const std::string& target() const { return task == Task::kASR ? src_text : tgt_text; }
    std::string pair() const { return src_lang + "-" + tgt_lang; }
};

class LangRegistry {
public:
    // Built-in defaults: fr, en, de, es, it, zh, ja.
    static LangRegistry defaults();
    static LangRegistry load(const std::string& path);  // langs.tsv: code \t English name
    void save(const std::string& path) const;

    const std::string& name(const std::string& code) const;  // RegistryError on unknown code
    bool has(const std::string& code) const { return names_.count(code) > 0; }

private:
    std::map<std::string, std::string> names_;
};

// TSV with header id\taudio\tsrc_lang\ttgt_lang\tsrc_text\ttgt_text.
std::vector<SampleRecord> load_manifest(const std::string& path);
void save_manifest(const std::string& path, const std::vector<SampleRecord>& records);

struct PromptParts {
    std::string prompt_text;  // contains the <AudioInputs> placeholder
    std::string target_text;  // empty in infer mode
};

enum class BuildMode { kTrain, kInfer };

// Fig-2 templates, byte-for-byte:
//   ST:  <audio><AudioInputs></audio> Translate the {Src} sentence to {Tgt}.
//   ASR: <audio><AudioInputs></audio> Transcribe the {Src} sentence to {Src}.
// optionally followed by ` Transcripts of AudioInputs is "{src_text}"`.
PromptParts build_prompt(const SampleRecord& r, const LangRegistry& reg, BuildMode mode, bool include_transcript);

struct MixPolicy {
    double asr_ratio = 0.5;                          // fraction of records cloned as ASR per epoch
    std::map<std::string, double> language_weights;  // pair -> weight; empty = uniform shuffle
    uint64_t shuffle_seed = 0;
};

// One epoch pass: the ST records plus ASR clones of a seeded random
// asr_ratio fraction, deterministically interleaved.
std::vector<SampleRecord> asr_augment(const std::vector<SampleRecord>& records, const MixPolicy& policy,
                                      int64_t epoch = 0);

// ---- synthetic corpus ------------------------------------------------------

struct LexiconEntry {
    std::string src;
    std::string tgt;
};

// Word-level bilingual lexicon for one language pair (X -> en).
const std::vector<LexiconEntry>& builtin_lexicon(const std::string& pair);
std::vector<std::string> builtin_lexicon_pairs();

// Every text the tokenizer must cover: template words, language names, and
// all builtin lexicon forms (capitalized and space-prefixed variants arise
// from the corpus sentences themselves).
std::vector<std::string> vocabulary_seed_texts(const LangRegistry& reg);

// Tone frequency (Hz) for each lexicon word of a pair; distinct mel bins,
// assignment permuted by the seed.
std::vector<double> tone_map(const std::string& pair, uint64_t seed);

struct SynthParams {
    uint64_t seed = 0;
    int64_t n_items = 32;
    std::vector<std::string> pairs = {"fr-en"};
    int min_words = 3;
    int max_words = 6;
    double tone_seconds = 0.1;
};

// Writes manifest.tsv, langs.tsv and audio/*.raw under out_dir; returns the
// records. Byte-identical output for identical parameters.
std::vector<SampleRecord> synth_corpus(const std::string& out_dir, const SynthParams& params,
                                       const LangRegistry& reg);

// Tone-coded rendering of one sentence (token indices into the pair lexicon).
std::vector<float> render_tones(const std::vector<int>& word_indices, const std::vector<double>& freqs,
                                double tone_seconds, int sample_rate);

}  // namespace llast
