// SPDX-License-Identifier: Apache-2.0
//
// Word-level tokenizer with byte fallback. Units are words or single
// punctuation marks, each optionally carrying one leading space, so
// detokenize(tokenize(s)) == s for any string. Audio markup strings map to
// single special ids.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace llast {

class Vocabulary {
public:
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kBos = 1;
    static constexpr int32_t kEos = 2;
    static constexpr int32_t kAudioOpen = 3;          // <audio>
    static constexpr int32_t kAudioClose = 4;         // </audio>
    static constexpr int32_t kAudioPlaceholder = 5;   // <AudioInputs>
    static constexpr int32_t kNumSpecials = 6;
    static constexpr int32_t kByteBase = kNumSpecials;       // 256 byte tokens follow the specials
    static constexpr int32_t kFirstUnit = kByteBase + 256;

    static const std::vector<std::string>& special_strings();

    // Specials and the 256 byte tokens only.
    Vocabulary();

    // Specials + byte tokens + units discovered in the texts (first-seen order).
    static Vocabulary build(const std::vector<std::string>& texts);

    // Split a string into tokenizer units, with special markup kept whole.
    static std::vector<std::string> split_units(std::string_view text);

    std::vector<int32_t> tokenize(std::string_view text) const;
    std::string detokenize(const std::vector<int32_t>& ids) const;

    // Registers units from one more text; used while assembling the training
    // vocabulary. No effect on already-known units.
    void add_text(const std::string& text);

    int32_t size() const { return static_cast<int32_t>(tokens_.size()); }
    const std::string& token(int32_t id) const;
    bool is_special(int32_t id) const { return id >= 0 && id < kNumSpecials; }
    bool is_byte(int32_t id) const { return id >= kByteBase && id < kFirstUnit; }

    // One token per line, line number == id, specials first in fixed order.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);
    std::string to_text() const;
    static Vocabulary from_text(const std::string& body);

private:
    void add_unit(const std::string& unit);

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int32_t> ids_;
};

}  // namespace llast
