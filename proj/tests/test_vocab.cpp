// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "llast/vocab.hpp"

using namespace llast;

TEST_CASE("empty and special mapping") {
    Vocabulary v = Vocabulary::build({});
    CHECK(v.tokenize("") == std::vector<int32_t>{});
    CHECK(v.detokenize({}) == "");
    CHECK(v.tokenize("<audio>") == std::vector<int32_t>{Vocabulary::kAudioOpen});
    CHECK(v.tokenize("</audio>") == std::vector<int32_t>{Vocabulary::kAudioClose});
    CHECK(v.tokenize("<AudioInputs>") == std::vector<int32_t>{Vocabulary::kAudioPlaceholder});
}

TEST_CASE("round trip over corpus alphabet") {
    Vocabulary v = Vocabulary::build({"Bonjour le monde.", "Hello world.", "Translate the French sentence to English."});
    for (const char* s : {"Bonjour le monde.", "Hello world.", "le monde Bonjour", "Bonjour  le   monde."}) {
        auto ids = v.tokenize(s);
        CHECK(v.detokenize(ids) == s);
    }
}

TEST_CASE("byte fallback never fails") {
    Vocabulary v = Vocabulary::build({"known words"});
    auto ids = v.tokenize("unknown\tstuff\n");
    CHECK(v.detokenize(ids) == "unknown\tstuff\n");
    for (int32_t id : v.tokenize("zebra")) CHECK(v.is_byte(id));  // unseen word falls back to bytes

    // UTF-8 words from the corpus round-trip as single units
    Vocabulary v2 = Vocabulary::build({"le caf\xc3\xa9 chaud"});
    auto ids2 = v2.tokenize("le caf\xc3\xa9 chaud");
    CHECK(v2.detokenize(ids2) == "le caf\xc3\xa9 chaud");
}

TEST_CASE("ids dense from zero, specials fixed") {
    Vocabulary v = Vocabulary::build({"abc def"});
    CHECK(v.token(Vocabulary::kPad) == "<pad>");
    CHECK(v.token(Vocabulary::kBos) == "<bos>");
    CHECK(v.token(Vocabulary::kEos) == "<eos>");
    CHECK(v.token(Vocabulary::kAudioOpen) == "<audio>");
    CHECK(v.token(Vocabulary::kAudioClose) == "</audio>");
    CHECK(v.token(Vocabulary::kAudioPlaceholder) == "<AudioInputs>");
    CHECK(v.size() >= Vocabulary::kFirstUnit + 2);
}

TEST_CASE("vocabulary file round trip") {
    namespace fs = std::filesystem;
    Vocabulary v = Vocabulary::build({"Bonjour le monde.", "Hello world."});
    fs::path p = fs::temp_directory_path() / "llast_vocab_test.txt";
    v.save(p.string());
    Vocabulary back = Vocabulary::load(p.string());
    CHECK(back.size() == v.size());
    CHECK(back.tokenize("Bonjour le monde.") == v.tokenize("Bonjour le monde."));
    fs::remove(p);
}

TEST_CASE("determinism of build order") {
    Vocabulary a = Vocabulary::build({"x y z", "p q"});
    Vocabulary b = Vocabulary::build({"x y z", "p q"});
    CHECK(a.to_text() == b.to_text());
}
