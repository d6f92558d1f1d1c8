// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "llast/bleu.hpp"
#include "llast/error.hpp"

using namespace llast;

TEST_CASE("13a tokenization") {
    CHECK(tokenize_13a("Hello, world!") == std::vector<std::string>{"Hello", ",", "world", "!"});
    CHECK(tokenize_13a("abc") == std::vector<std::string>{"abc"});
    CHECK(tokenize_13a("  a  b ") == std::vector<std::string>{"a", "b"});
    CHECK(tokenize_13a("3.14 rocks.") == std::vector<std::string>{"3.14", "rocks", "."});
    CHECK(tokenize_13a("1-2") == std::vector<std::string>{"1", "-", "2"});
    CHECK(tokenize_13a("a\nb") == std::vector<std::string>{"a", "b"});
    CHECK(tokenize_13a("\"quoted\"") == std::vector<std::string>{"\"", "quoted", "\""});
}

TEST_CASE("identity corpus scores 100") {
    std::vector<std::string> hyps = {"the cat sat on the mat", "Hello, world!"};
    BleuScore s = corpus_bleu(hyps, hyps, BleuSmoothing::kNone);
    CHECK(s.score == doctest::Approx(100.0).epsilon(1e-9));
    for (double p : s.precisions) CHECK(p == doctest::Approx(1.0));
    CHECK(s.brevity_penalty == 1.0);
}

TEST_CASE("hand-derived ngram precisions") {
    BleuScore s = corpus_bleu({"the cat sat on the mat"}, {"the cat is on the mat"}, BleuSmoothing::kExpFloor);
    CHECK(s.precisions[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-9));
    CHECK(s.precisions[1] == doctest::Approx(3.0 / 5.0).epsilon(1e-9));
    CHECK(s.precisions[2] == doctest::Approx(1.0 / 4.0).epsilon(1e-9));
    CHECK(s.precisions[3] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.brevity_penalty == 1.0);
    CHECK(s.hyp_len == 6);
    CHECK(s.ref_len == 6);
}

TEST_CASE("clipping caps repeated tokens") {
    BleuScore s = corpus_bleu({"the the the the the the the"}, {"the cat is on the mat"}, BleuSmoothing::kExpFloor);
    CHECK(s.precisions[0] == doctest::Approx(2.0 / 7.0).epsilon(1e-9));
}

TEST_CASE("zero p4 zeroes the score under none, stays positive under exp-floor") {
    std::vector<std::string> hyp = {"the cat sat on the mat"};
    std::vector<std::string> ref = {"the cat is on the mat"};
    CHECK(corpus_bleu(hyp, ref, BleuSmoothing::kNone).score == 0.0);
    CHECK(corpus_bleu(hyp, ref, BleuSmoothing::kExpFloor).score > 0.0);
}

TEST_CASE("pair permutation leaves the corpus score unchanged") {
    std::vector<std::string> hyps = {"a b c d", "the cat sat", "x y z w q"};
    std::vector<std::string> refs = {"a b c e", "the cat sat", "x y w z q"};
    BleuScore s1 = corpus_bleu(hyps, refs);
    std::vector<std::string> hyps2 = {hyps[2], hyps[0], hyps[1]};
    std::vector<std::string> refs2 = {refs[2], refs[0], refs[1]};
    BleuScore s2 = corpus_bleu(hyps2, refs2);
    CHECK(s1.score == doctest::Approx(s2.score).epsilon(1e-12));
}

TEST_CASE("brevity penalty bounds") {
    // shorter hypothesis corpus is penalized
    BleuScore shorter = corpus_bleu({"the cat"}, {"the cat sat on the mat"});
    CHECK(shorter.brevity_penalty < 1.0);
    CHECK(shorter.brevity_penalty == doctest::Approx(std::exp(1.0 - 6.0 / 2.0)));
    // longer hypothesis corpus is not
    BleuScore longer = corpus_bleu({"the cat sat on the mat today"}, {"the cat"});
    CHECK(longer.brevity_penalty == 1.0);
}

TEST_CASE("score identity when all precisions positive") {
    BleuScore s = corpus_bleu({"the cat sat on the mat today"}, {"the cat sat on the mat tonight"});
    REQUIRE(s.precisions[3] > 0.0);
    double expect = s.brevity_penalty *
                    std::exp((std::log(s.precisions[0]) + std::log(s.precisions[1]) + std::log(s.precisions[2]) +
                              std::log(s.precisions[3])) /
                             4.0) *
                    100.0;
    CHECK(s.score == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("errors on bad input") {
    CHECK_THROWS_AS(corpus_bleu({"a"}, {"a", "b"}), ConfigError);
    CHECK_THROWS_AS(corpus_bleu({}, {}), ConfigError);
}
