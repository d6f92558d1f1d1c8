// SPDX-License-Identifier: Apache-2.0
//
// CLI surface tests: flag validation, exit codes, reproducible outputs.
// Spawns the real binary (path injected by the build).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "llast/bleu.hpp"
#include "llast/checkpoint.hpp"

using namespace llast;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    static fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "llast_cli_test";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

int run(const std::string& args) {
    std::string cmd = std::string("\"") + LLAST_BIN + "\" " + args + " > " + (scratch() / "out.log").string() +
                      " 2> " + (scratch() / "err.log").string();
    int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run("") == 2);
    CHECK(run("synth-data") == 2);                       // missing required --out
    CHECK(run("synth-data --out x --bogus-flag 1") == 2);
    CHECK(run("nonexistent-command") == 2);
}

TEST_CASE("synth-data: reproducible bytes, registry errors, force semantics") {
    fs::path a = scratch() / "corpus_a";
    fs::path b = scratch() / "corpus_b";
    CHECK(run("synth-data --out \"" + a.string() + "\" --n 8 --seed 3 --langs fr-en") == 0);
    CHECK(run("synth-data --out \"" + b.string() + "\" --n 8 --seed 3 --langs fr-en") == 0);
    CHECK(slurp(a / "manifest.tsv") == slurp(b / "manifest.tsv"));
    CHECK(slurp(a / "audio/utt0003.raw") == slurp(b / "audio/utt0003.raw"));

    // unknown language pair -> exit 2 with a registry message
    CHECK(run("synth-data --out \"" + (scratch() / "bad").string() + "\" --n 4 --langs xx-en") == 2);
    CHECK(slurp(scratch() / "err.log").find("language") != std::string::npos);

    // rerun into a non-empty dir without --force -> exit 3; with --force -> 0
    CHECK(run("synth-data --out \"" + a.string() + "\" --n 8 --seed 3 --langs fr-en") == 3);
    CHECK(run("synth-data --out \"" + a.string() + "\" --n 8 --seed 3 --langs fr-en --force") == 0);
}

TEST_CASE("train: missing manifest exits 3, bad config key exits 2") {
    CHECK(run("train --data \"" + (scratch() / "missing.tsv").string() + "\" --out \"" +
              (scratch() / "r0").string() + "\"") == 3);

    fs::path corpus = scratch() / "train_corpus";
    REQUIRE(run("synth-data --out \"" + corpus.string() + "\" --n 4 --seed 0 --langs fr-en") == 0);
    fs::path bad_ini = scratch() / "bad.ini";
    {
        std::ofstream out(bad_ini);
        out << "[train]\nsteps=10\nnot_a_key=1\n";
    }
    CHECK(run("train --config \"" + bad_ini.string() + "\" --data \"" + (corpus / "manifest.tsv").string() +
              "\" --out \"" + (scratch() / "r1").string() + "\"") == 2);

    // two lora flags at once
    CHECK(run("train --data \"" + (corpus / "manifest.tsv").string() + "\" --out \"" +
              (scratch() / "r2").string() + "\" --s-lora --l-lora") == 2);
}

TEST_CASE("tiny train run emits the advertised artifacts") {
    fs::path corpus = scratch() / "tiny_corpus";
    REQUIRE(run("synth-data --out \"" + corpus.string() + "\" --n 4 --seed 1 --langs fr-en") == 0);
    fs::path ini = scratch() / "tiny.ini";
    {
        std::ofstream out(ini);
        out << "[encoder]\nd_model=16\nn_layers=1\nn_heads=2\nff_mult=2\nsubsample_factor=4\n\n"
            << "[adaptor]\nhidden_dim=12\n\n"
            << "[lm]\nd_model=16\nn_layers=1\nn_heads=2\nff_mult=2\nmax_seq_len=160\n\n"
            << "[train]\nseed=5\nsteps=6\nbatch_size=2\n";
    }
    fs::path out_dir = scratch() / "tiny_run";
    REQUIRE(run("train --config \"" + ini.string() + "\" --data \"" + (corpus / "manifest.tsv").string() +
                "\" --out \"" + out_dir.string() + "\"") == 0);
    CHECK(fs::exists(out_dir / "checkpoint_final.llst"));
    CHECK(fs::exists(out_dir / "vocab.txt"));
    CHECK(fs::exists(out_dir / "loss.csv"));
    std::string resolved = slurp(out_dir / "run_config.resolved");
    CHECK(resolved.find("[train]") != std::string::npos);
    CHECK(resolved.find("seed=5") != std::string::npos);
    CHECK(resolved.find("warmup_steps=1") != std::string::npos);  // 10% of 6 steps, floored to >= 1

    // eval on the manifest writes a report and hypothesis dump
    fs::path report = scratch() / "report.tsv";
    REQUIRE(run("eval --ckpt \"" + (out_dir / "checkpoint_final.llst").string() + "\" --data \"" +
                (corpus / "manifest.tsv").string() + "\" --report \"" + report.string() + "\" --beam 2") == 0);
    CHECK(slurp(report).rfind("pair\tbleu", 0) == 0);
    CHECK(fs::exists(report.string() + ".hyps.tsv"));

    // the report matches a recomputation from the dumped hypotheses
    std::map<std::string, std::pair<std::vector<std::string>, std::vector<std::string>>> by_pair;
    {
        std::istringstream hyps(slurp(report.string() + ".hyps.tsv"));
        std::string line;
        std::getline(hyps, line);
        while (std::getline(hyps, line)) {
            size_t t1 = line.find('\t'), t2 = line.find('\t', t1 + 1), t3 = line.find('\t', t2 + 1);
            std::string pair = line.substr(t1 + 1, t2 - t1 - 1);
            by_pair[pair].first.push_back(line.substr(t2 + 1, t3 - t2 - 1));
            by_pair[pair].second.push_back(line.substr(t3 + 1));
        }
    }
    {
        std::istringstream rep(slurp(report));
        std::string line;
        std::getline(rep, line);
        while (std::getline(rep, line)) {
            size_t t1 = line.find('\t'), t2 = line.find('\t', t1 + 1);
            std::string pair = line.substr(0, t1);
            double reported = std::stod(line.substr(t1 + 1, t2 - t1 - 1));
            REQUIRE(by_pair.count(pair) == 1);
            BleuScore recomputed = corpus_bleu(by_pair[pair].first, by_pair[pair].second);
            CHECK(reported == doctest::Approx(recomputed.score).epsilon(1e-6));
        }
    }

    // translate prints a line and exits 0; unknown language exits 2
    CHECK(run("translate --ckpt \"" + (out_dir / "checkpoint_final.llst").string() + "\" --audio \"" +
              (corpus / "audio/utt0000.raw").string() + "\" --src fr --tgt en --beam 2") == 0);
    CHECK(run("translate --ckpt \"" + (out_dir / "checkpoint_final.llst").string() + "\" --audio \"" +
              (corpus / "audio/utt0000.raw").string() + "\" --src xx --tgt en") == 2);
}

TEST_CASE("merge-lora: no-op notice on adapter-free checkpoints, corrupt files exit 3") {
    fs::path ckpt = scratch() / "tiny_run/checkpoint_final.llst";
    REQUIRE(fs::exists(ckpt));  // produced by the previous case
    fs::path merged = scratch() / "merged.llst";
    CHECK(run("merge-lora --ckpt \"" + ckpt.string() + "\" --out \"" + merged.string() + "\"") == 0);
    CHECK(fs::exists(merged));

    fs::path corrupt = scratch() / "corrupt.llst";
    {
        std::string bytes = slurp(ckpt);
        bytes[bytes.size() / 2] ^= 0x77;
        std::ofstream out(corrupt, std::ios::binary);
        out << bytes;
    }
    CHECK(run("merge-lora --ckpt \"" + corrupt.string() + "\" --out \"" + merged.string() + "\"") == 3);
    CHECK(run("eval --ckpt \"" + corrupt.string() + "\" --data x --report y") == 3);
}

TEST_CASE("eval on an empty manifest exits 2") {
    fs::path empty = scratch() / "empty.tsv";
    {
        std::ofstream out(empty);
        out << "id\taudio\tsrc_lang\ttgt_lang\tsrc_text\ttgt_text\n";
    }
    fs::path ckpt = scratch() / "tiny_run/checkpoint_final.llst";
    CHECK(run("eval --ckpt \"" + ckpt.string() + "\" --data \"" + empty.string() + "\" --report \"" +
              (scratch() / "r.tsv").string() + "\"") == 2);
}
