// SPDX-License-Identifier: Apache-2.0

#include "llast/vocab.hpp"

#include <fstream>
#include <sstream>

#include "llast/error.hpp"

namespace llast {

namespace {

bool is_word_char(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c >= 0x80;
}

bool is_control(unsigned char c) { return c < 0x20 || c == 0x7f; }

std::string byte_token_name(int b) {
    static const char* hex = "0123456789ABCDEF";
    std::string s = "<0x";
    s += hex[(b >> 4) & 0xf];
    s += hex[b & 0xf];
    s += '>';
    return s;
}

}  // namespace

const std::vector<std::string>& Vocabulary::special_strings() {
    static const std::vector<std::string> specials = {"<pad>", "<bos>", "<eos>", "<audio>", "</audio>", "<AudioInputs>"};
    return specials;
}

Vocabulary::Vocabulary() {
    for (const auto& s : special_strings()) {
        ids_.emplace(s, static_cast<int32_t>(tokens_.size()));
        tokens_.push_back(s);
    }
    for (int b = 0; b < 256; ++b) tokens_.push_back(byte_token_name(b));
}

std::vector<std::string> Vocabulary::split_units(std::string_view text) {
    const auto& specials = special_strings();
    std::vector<std::string> units;
    size_t i = 0;
    while (i < text.size()) {
        bool matched = false;
        for (const auto& s : specials) {
            if (text.compare(i, s.size(), s) == 0) {
                units.push_back(s);
                i += s.size();
                matched = true;
                break;
            }
        }
        if (matched) continue;

        size_t start = i;
        if (text[i] == ' ') {
            ++i;
            // A space followed by a special marker or end of text stands alone.
            bool next_is_special = i >= text.size();
            for (const auto& s : specials) {
                if (i < text.size() && text.compare(i, s.size(), s) == 0) next_is_special = true;
            }
            if (next_is_special || text[i] == ' ') {
                units.emplace_back(" ");
                continue;
            }
        }
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (is_word_char(c)) {
            while (i < text.size() && is_word_char(static_cast<unsigned char>(text[i]))) ++i;
        } else {
            ++i;  // single punctuation or control char
        }
        units.emplace_back(text.substr(start, i - start));
    }
    return units;
}

void Vocabulary::add_unit(const std::string& unit) {
    if (ids_.count(unit)) return;
    for (unsigned char c : unit) {
        if (is_control(c)) return;  // control chars stay byte-fallback only
    }
    ids_.emplace(unit, static_cast<int32_t>(tokens_.size()));
    tokens_.push_back(unit);
}

void Vocabulary::add_text(const std::string& text) {
    for (const auto& u : split_units(text)) {
        if (ids_.count(u)) continue;
        add_unit(u);
    }
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts) {
    Vocabulary v;
    for (const auto& t : texts) v.add_text(t);
    return v;
}

std::vector<int32_t> Vocabulary::tokenize(std::string_view text) const {
    std::vector<int32_t> ids;
    for (const auto& u : split_units(text)) {
        auto it = ids_.find(u);
        if (it != ids_.end()) {
            ids.push_back(it->second);
        } else {
            for (unsigned char c : u) ids.push_back(kByteBase + static_cast<int32_t>(c));
        }
    }
    return ids;
}

std::string Vocabulary::detokenize(const std::vector<int32_t>& ids) const {
    std::string out;
    for (int32_t id : ids) {
        if (id < 0 || id >= size()) throw ShapeError("token id " + std::to_string(id) + " out of vocabulary");
        if (is_byte(id)) {
            out += static_cast<char>(id - kByteBase);
        } else {
            out += tokens_[static_cast<size_t>(id)];
        }
    }
    return out;
}

const std::string& Vocabulary::token(int32_t id) const {
    if (id < 0 || id >= size()) throw ShapeError("token id " + std::to_string(id) + " out of vocabulary");
    return tokens_[static_cast<size_t>(id)];
}

std::string Vocabulary::to_text() const {
    std::string out;
    for (const auto& t : tokens_) {
        out += t;
        out += '\n';
    }
    return out;
}

Vocabulary Vocabulary::from_text(const std::string& body) {
    Vocabulary v;
    std::istringstream in(body);
    std::string line;
    int32_t id = 0;
    while (std::getline(in, line)) {
        if (id < kFirstUnit) {
            if (line != v.tokens_[static_cast<size_t>(id)]) {
                throw IntegrityError("vocabulary file: fixed token " + std::to_string(id) + " is '" + line +
                                     "', expected '" + v.tokens_[static_cast<size_t>(id)] + "'");
            }
        } else {
            if (v.ids_.count(line)) throw IntegrityError("vocabulary file: duplicate token '" + line + "'");
            v.ids_.emplace(line, static_cast<int32_t>(v.tokens_.size()));
            v.tokens_.push_back(line);
        }
        ++id;
    }
    if (id < kFirstUnit) throw IntegrityError("vocabulary file truncated");
    return v;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write vocabulary: " + path);
    out << to_text();
    if (!out) throw IoError("write failed: " + path);
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open vocabulary: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

}  // namespace llast
