// SPDX-License-Identifier: Apache-2.0
//
// Operator surface: corpus synthesis, training, evaluation, translation and
// LoRA merging. Exit codes: 0 success, 2 usage/config, 3 io/integrity,
// 4 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "llast/checkpoint.hpp"
#include "llast/eval.hpp"
#include "llast/runconfig.hpp"

namespace fs = std::filesystem;
using namespace llast;

namespace {

int g_log_level = 1;  // 0 error, 1 info, 2 debug

void log_info(const std::string& msg) {
    if (g_log_level >= 1) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (g_log_level >= 2) std::cerr << "[debug] " << msg << "\n";
}

void init_logging() {
    const char* env = std::getenv("LLAST_LOG");
    if (!env) return;
    std::string v = env;
    if (v == "error") g_log_level = 0;
    else if (v == "info") g_log_level = 1;
    else if (v == "debug") g_log_level = 2;
}

LangRegistry load_registry(const RunConfig& cfg) {
    if (cfg.langs_file.empty()) return LangRegistry::defaults();
    return LangRegistry::load(cfg.langs_file);
}

std::vector<std::string> split_pairs(const std::string& langs) {
    std::vector<std::string> out;
    size_t start = 0;
    while (start <= langs.size()) {
        size_t comma = langs.find(',', start);
        if (comma == std::string::npos) comma = langs.size();
        std::string part = langs.substr(start, comma - start);
        if (!part.empty()) out.push_back(part);
        start = comma + 1;
    }
    if (out.empty()) throw ConfigError("--langs needs at least one pair like fr-en");
    return out;
}

struct TrainFlags {
    std::string config_path;
    std::string data_path;
    std::string out_dir;
    std::string init_ckpt;
    bool dual_lora = false, s_lora = false, l_lora = false, no_lora = false;
    double asr_ratio = -1.0;  // <0: keep config value
    int64_t seed = -1;
    int64_t steps = -1;
    double peak_lr = -1.0;
};

int cmd_synth_data(const std::string& out_dir, int64_t n, uint64_t seed, const std::string& langs, bool force) {
    if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !force) {
        throw IoError("output directory " + out_dir + " is not empty (use --force to overwrite)");
    }
    SynthParams params;
    params.seed = seed;
    params.n_items = n;
    params.pairs = split_pairs(langs);
    LangRegistry reg = LangRegistry::defaults();
    auto records = synth_corpus(out_dir, params, reg);
    log_info("wrote " + std::to_string(records.size()) + " records under " + out_dir);
    return 0;
}

int cmd_train(const TrainFlags& flags) {
    int lora_flags = (flags.dual_lora ? 1 : 0) + (flags.s_lora ? 1 : 0) + (flags.l_lora ? 1 : 0) +
                     (flags.no_lora ? 1 : 0);
    if (lora_flags > 1) throw ConfigError("pick at most one of --dual-lora, --s-lora, --l-lora, --no-lora");

    RunConfig cfg = flags.config_path.empty() ? RunConfig{} : RunConfig::load(flags.config_path);
    if (flags.asr_ratio >= 0) cfg.asr_ratio = flags.asr_ratio;
    if (flags.seed >= 0) cfg.seed = static_cast<uint64_t>(flags.seed);
    if (flags.steps > 0) cfg.steps = flags.steps;
    if (flags.peak_lr > 0) cfg.optimizer.peak_lr = flags.peak_lr;

    LangRegistry reg = load_registry(cfg);
    auto records = load_manifest(flags.data_path);
    if (records.empty()) throw ConfigError("manifest has no records: " + flags.data_path);

    fs::create_directories(flags.out_dir);
    {
        std::ofstream out(fs::path(flags.out_dir) / "run_config.resolved", std::ios::binary);
        if (!out) throw IoError("cannot write run_config.resolved under " + flags.out_dir);
        out << cfg.resolved_text();
    }

    uint64_t root = cfg.seed;
    LLaSTModel<float> model;
    TrainState state;
    if (!flags.init_ckpt.empty()) {
        LoadedModel loaded = load_model(flags.init_ckpt);
        model = std::move(loaded.model);
        log_info("initialized from " + flags.init_ckpt);
    } else {
        // vocabulary: builtin lexicons plus everything in the training corpus
        std::vector<std::string> texts = vocabulary_seed_texts(reg);
        for (const auto& r : records) {
            texts.push_back(build_prompt(r, reg, BuildMode::kTrain, true).prompt_text);
            texts.push_back(r.src_text);
            texts.push_back(r.tgt_text);
        }
        Vocabulary vocab = Vocabulary::build(texts);
        model = LLaSTModel<float>::build(cfg.frontend, cfg.encoder, cfg.adaptor, cfg.lm, std::move(vocab),
                                         derive_seed(root, "model"));
    }
    state.rng_seed = root;
    model.vocab.save((fs::path(flags.out_dir) / "vocab.txt").string());

    if (flags.s_lora || flags.dual_lora) {
        LoRAConfig sc;
        sc.rank = cfg.s_rank;
        sc.alpha = cfg.effective_s_alpha();
        sc.targets = cfg.s_targets;
        int n = model.inject_s_lora(sc, derive_seed(root, "s-lora"));
        log_info("S-LoRA: " + std::to_string(n) + " adapters, rank " + std::to_string(cfg.s_rank));
    }
    if (flags.l_lora || flags.dual_lora) {
        LoRAConfig lc;
        lc.rank = cfg.l_rank;
        lc.alpha = cfg.effective_l_alpha();
        lc.targets = cfg.l_targets;
        int n = model.inject_l_lora(lc, derive_seed(root, "l-lora"));
        log_info("L-LoRA: " + std::to_string(n) + " adapters, rank " + std::to_string(cfg.l_rank));
    }
    if (lora_flags == 1) {
        model.freeze_base();
        int64_t trainable = 0, total = 0;
        for (auto* p : model.parameters()) {
            total += p->value.numel();
            if (p->trainable) trainable += p->value.numel();
        }
        log_info("frozen base: " + std::to_string(trainable) + " of " + std::to_string(total) +
                 " parameters trainable");
    }

    MixPolicy policy;
    policy.asr_ratio = cfg.asr_ratio;
    policy.shuffle_seed = derive_seed(root, "data");
    ItemStream stream(model, records, reg, policy, cfg.include_transcript);

    OptimizerConfig ocfg = cfg.optimizer;
    ScheduleConfig scfg;
    scfg.total_steps = cfg.steps;
    scfg.warmup_steps = cfg.effective_warmup();
    TrainConfig tcfg;
    tcfg.seed = root;
    tcfg.total_steps = cfg.steps;
    tcfg.batch_size = cfg.batch_size;
    tcfg.checkpoint_every = cfg.checkpoint_every;
    tcfg.out_dir = flags.out_dir;

    auto hook = [&](const std::string& path, const TrainState& st) {
        save_model(path, model, &st);
        log_debug("checkpoint " + path);
    };
    TrainResult result = train_model(model, stream, ocfg, scfg, tcfg, state, hook);
    log_info("final loss " + std::to_string(result.final_loss) + " after " + std::to_string(state.step) + " steps");
    return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, const std::string& report, int beam,
             bool with_transcript) {
    LoadedModel loaded = load_model(ckpt);
    auto records = load_manifest(data);
    if (records.empty()) throw ConfigError("manifest has no records: " + data);
    LangRegistry reg = LangRegistry::defaults();
    TranslateOptions opt;
    opt.decode.beam_size = beam;
    opt.include_transcript = with_transcript;
    EvalResult result = evaluate(loaded.model, records, reg, opt);
    write_eval_report(report, result);
    write_hypotheses(report + ".hyps.tsv", result);
    for (const auto& p : result.pairs) {
        std::printf("%s\tBLEU %.2f\n", p.pair.c_str(), p.bleu.score);
    }
    std::printf("corpus\tBLEU %.2f\texact %lld/%zu\n", result.corpus_score,
                static_cast<long long>(result.exact_matches()), result.hyps.size());
    return 0;
}

int cmd_translate(const std::string& ckpt, const std::string& audio_path, const std::string& src,
                  const std::string& tgt, int beam) {
    LoadedModel loaded = load_model(ckpt);
    AudioWaveform audio = read_audio(audio_path);
    LangRegistry reg = LangRegistry::defaults();
    TranslateOptions opt;
    opt.decode.beam_size = beam;
    std::string text = translate(loaded.model, audio, src, tgt, reg, opt);
    std::printf("%s\n", text.c_str());
    return 0;
}

int cmd_merge_lora(const std::string& ckpt, const std::string& out_path) {
    LoadedModel loaded = load_model(ckpt);
    LLaSTModel<float>& model = loaded.model;
    std::vector<Linear<float>*> hosts;
    for (auto* l : model.linears()) {
        if (l->lora) hosts.push_back(l);
    }
    if (hosts.empty()) {
        log_info("checkpoint has no adapters; writing unchanged copy");
        save_model(out_path, model);
        return 0;
    }

    // probe equivalence before writing: merged logits must match unmerged
    Rng rng(1234);
    Tensor<float> feats = Tensor<float>::randn({24, model.frontend.n_mels}, rng);
    PromptSequence probe = assemble_sequence(
        model.vocab, "<audio><AudioInputs></audio> Translate the French sentence to English.", "",
        model.encoder.output_frames(24), PromptMode::kInfer);
    auto run = [&]() {
        Graph<float> g(/*record_tape=*/false);
        return g.value(model.forward_sequence(g, probe, feats));
    };
    Tensor<float> before = run();
    for (auto* l : hosts) {
        if (!l->lora->merged) merge_lora(*l);
    }
    Tensor<float> after = run();
    double max_diff = 0.0;
    for (int64_t i = 0; i < before.numel(); ++i) {
        max_diff = std::max(max_diff, static_cast<double>(std::fabs(before.at(i) - after.at(i))));
    }
    if (max_diff >= 1e-5) {
        throw NumericError("merged logits differ from unmerged by " + std::to_string(max_diff));
    }
    for (auto* l : hosts) l->lora.reset();  // weights already folded in
    save_model(out_path, model);
    log_info("merged " + std::to_string(hosts.size()) + " adapters (probe max diff " + std::to_string(max_diff) +
             ")");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    init_logging();
    CLI::App app{"desk-scale speech-to-text translation pipeline"};
    app.require_subcommand(1);

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "generate a tone-coded synthetic corpus");
    std::string synth_out, synth_langs = "fr-en";
    int64_t synth_n = 32;
    int64_t synth_seed = 0;
    bool synth_force = false;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", synth_n, "number of items");
    synth->add_option("--seed", synth_seed, "corpus seed");
    synth->add_option("--langs", synth_langs, "comma-separated language pairs, e.g. fr-en,de-en");
    synth->add_flag("--force", synth_force, "write into a non-empty directory");

    // train
    auto* train = app.add_subcommand("train", "train or adapt a model");
    TrainFlags tf;
    train->add_option("--config", tf.config_path, "INI config file");
    train->add_option("--data", tf.data_path, "manifest TSV")->required();
    train->add_option("--out", tf.out_dir, "output directory")->required();
    train->add_option("--init", tf.init_ckpt, "checkpoint to initialize from");
    train->add_flag("--dual-lora", tf.dual_lora, "freeze base, adapt S-LoRA + L-LoRA");
    train->add_flag("--s-lora", tf.s_lora, "freeze base, adapt S-LoRA only");
    train->add_flag("--l-lora", tf.l_lora, "freeze base, adapt L-LoRA only");
    train->add_flag("--no-lora", tf.no_lora, "freeze base, adaptor only");
    train->add_option("--asr-ratio", tf.asr_ratio, "ASR augmentation ratio override");
    train->add_option("--seed", tf.seed, "root seed override");
    train->add_option("--steps", tf.steps, "total steps override");
    train->add_option("--peak-lr", tf.peak_lr, "peak learning rate override");

    // eval
    auto* ev = app.add_subcommand("eval", "decode a manifest and score BLEU");
    std::string ev_ckpt, ev_data, ev_report;
    int ev_beam = 5;
    bool ev_transcript = false;
    ev->add_option("--ckpt", ev_ckpt, "model checkpoint")->required();
    ev->add_option("--data", ev_data, "manifest TSV")->required();
    ev->add_option("--report", ev_report, "report TSV path")->required();
    ev->add_option("--beam", ev_beam, "beam size");
    ev->add_flag("--with-transcript", ev_transcript, "feed ground-truth transcripts into prompts");

    // translate
    auto* tr = app.add_subcommand("translate", "translate one audio file");
    std::string tr_ckpt, tr_audio, tr_src, tr_tgt;
    int tr_beam = 5;
    tr->add_option("--ckpt", tr_ckpt, "model checkpoint")->required();
    tr->add_option("--audio", tr_audio, "WAV or RAWF audio file")->required();
    tr->add_option("--src", tr_src, "source language code")->required();
    tr->add_option("--tgt", tr_tgt, "target language code")->required();
    tr->add_option("--beam", tr_beam, "beam size");

    // merge-lora
    auto* mg = app.add_subcommand("merge-lora", "fold adapters into base weights");
    std::string mg_ckpt, mg_out;
    mg->add_option("--ckpt", mg_ckpt, "model checkpoint")->required();
    mg->add_option("--out", mg_out, "output checkpoint")->required();

    try {
        app.parse(argc, argv);
        if (synth->parsed()) {
            return cmd_synth_data(synth_out, synth_n, static_cast<uint64_t>(synth_seed), synth_langs, synth_force);
        }
        if (train->parsed()) return cmd_train(tf);
        if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_report, ev_beam, ev_transcript);
        if (tr->parsed()) return cmd_translate(tr_ckpt, tr_audio, tr_src, tr_tgt, tr_beam);
        if (mg->parsed()) return cmd_merge_lora(mg_ckpt, mg_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
