// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "llast/model.hpp"

using namespace llast;

namespace {

LLaSTModel<float> tiny_model(uint64_t seed) {
    FrontendConfig f;
    f.n_mels = 8;
    EncoderConfig e;
    e.d_model = 16;
    e.n_layers = 2;
    e.n_heads = 2;
    e.ff_mult = 2;
    e.subsample_factor = 2;
    e.max_frames = 64;
    AdaptorConfig a;
    a.hidden_dim = 12;
    LMConfig l;
    l.d_model = 16;
    l.n_layers = 2;
    l.n_heads = 2;
    l.ff_mult = 2;
    l.max_seq_len = 64;
    Vocabulary v = Vocabulary::build({"Translate the French sentence to English.", "Hello world."});
    return LLaSTModel<float>::build(f, e, a, l, std::move(v), seed);
}

Tensor<float> random_features(uint64_t seed, int64_t t = 10, int64_t mels = 8) {
    Rng rng(seed);
    return Tensor<float>::randn({t, mels}, rng);
}

PromptSequence infer_seq(const LLaSTModel<float>& m, int64_t frames) {
    int64_t rows = m.encoder.output_frames(frames);
    return assemble_sequence(m.vocab, "<audio><AudioInputs></audio> Translate the French sentence to English.", "",
                             rows, PromptMode::kInfer);
}

Tensor<float> run_logits(LLaSTModel<float>& m, const Tensor<float>& feats) {
    PromptSequence seq = infer_seq(m, feats.dim(0));
    Graph<float> g(/*record_tape=*/false);
    return g.value(m.forward_sequence(g, seq, feats));
}

double max_abs_diff(const Tensor<float>& a, const Tensor<float>& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) m = std::max(m, static_cast<double>(std::fabs(a.at(i) - b.at(i))));
    return m;
}

uint64_t hash_tensors(const std::vector<Parameter<float>*>& ps, bool frozen_only) {
    uint64_t h = 1469598103934665603ULL;
    for (auto* p : ps) {
        if (frozen_only && p->trainable) continue;
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            uint32_t u;
            float v = p->value.at(i);
            static_assert(sizeof(u) == sizeof(v));
            std::memcpy(&u, &v, 4);
            h ^= u;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace

TEST_CASE("identity at injection: adapted outputs equal base outputs") {
    for (uint64_t seed = 0; seed < 10; ++seed) {
        auto m = tiny_model(seed);
        Tensor<float> feats = random_features(100 + seed);
        Tensor<float> base = run_logits(m, feats);

        LoRAConfig scfg;
        scfg.rank = 2 + static_cast<int64_t>(seed % 3);
        scfg.alpha = static_cast<double>(scfg.rank);
        LoRAConfig lcfg = scfg;
        m.inject_s_lora(scfg);
        m.inject_l_lora(lcfg);
        Tensor<float> adapted = run_logits(m, feats);
        CHECK(max_abs_diff(base, adapted) < 1e-7);
    }
}

TEST_CASE("injection counts r(d_in+d_out) per target and rejects r=0") {
    auto m = tiny_model(1);
    LoRAConfig cfg;
    cfg.rank = 8;
    cfg.alpha = 8;
    int n = m.inject_l_lora(cfg);
    CHECK(n == 4);  // 2 layers x {wq, wv}
    int64_t added = 0;
    for (auto* l : m.linears()) {
        if (l->lora) added += l->lora->a.value.numel() + l->lora->b.value.numel();
    }
    CHECK(added == 4 * 8 * (16 + 16));

    auto m2 = tiny_model(2);
    LoRAConfig bad;
    bad.rank = 0;
    CHECK_THROWS_AS(m2.inject_l_lora(bad), ConfigError);

    LoRAConfig nomatch;
    nomatch.rank = 2;
    nomatch.targets = {"nonexistent.*"};
    CHECK_THROWS_AS(m2.inject_l_lora(nomatch), ConfigError);
}

TEST_CASE("merge equivalence and round trip") {
    auto m = tiny_model(5);
    LoRAConfig cfg;
    cfg.rank = 4;
    cfg.alpha = 4;
    m.inject_s_lora(cfg);
    m.inject_l_lora(cfg);

    // give the adapters non-trivial B so merge actually moves weights
    Rng rng(9);
    for (auto* l : m.linears()) {
        if (l->lora) l->lora->b.value = Tensor<float>::randn(l->lora->b.value.shape(), rng, 0.05f);
    }

    std::vector<Tensor<float>> w_before;
    for (auto* l : m.linears()) w_before.push_back(l->weight.value);

    std::vector<Tensor<float>> unmerged_logits;
    for (uint64_t s = 0; s < 20; ++s) unmerged_logits.push_back(run_logits(m, random_features(500 + s)));

    for (auto* l : m.linears()) {
        if (l->lora) merge_lora(*l);
    }
    for (uint64_t s = 0; s < 20; ++s) {
        Tensor<float> merged = run_logits(m, random_features(500 + s));
        CHECK(max_abs_diff(merged, unmerged_logits[s]) < 1e-5);
    }

    // double merge is a state error
    for (auto* l : m.linears()) {
        if (l->lora) {
            CHECK_THROWS_AS(merge_lora(*l), StateError);
            break;
        }
    }

    for (auto* l : m.linears()) {
        if (l->lora) unmerge_lora(*l);
    }
    size_t k = 0;
    for (auto* l : m.linears()) {
        CHECK(max_abs_diff(l->weight.value, w_before[k]) < 1e-6);
        ++k;
    }
    for (auto* l : m.linears()) {
        if (l->lora) {
            CHECK_THROWS_AS(unmerge_lora(*l), StateError);
            break;
        }
    }
}

TEST_CASE("merge on a never-trained adapter leaves W unchanged") {
    auto m = tiny_model(6);
    LoRAConfig cfg;
    cfg.rank = 4;
    cfg.alpha = 4;
    m.inject_l_lora(cfg);
    for (auto* l : m.linears()) {
        if (!l->lora) continue;
        Tensor<float> before = l->weight.value;
        merge_lora(*l);
        CHECK(l->weight.value.vec() == before.vec());
    }
}

TEST_CASE("freeze_base leaves exactly adaptor and adapter factors trainable") {
    auto m = tiny_model(7);
    LoRAConfig cfg;
    cfg.rank = 2;
    cfg.alpha = 2;
    m.inject_s_lora(cfg);
    m.inject_l_lora(cfg);
    m.freeze_base();

    int64_t trainable = 0;
    for (auto* p : m.parameters()) {
        bool is_adaptor = p->name.rfind("adaptor.", 0) == 0;
        bool is_lora = p->name.find(".lora_") != std::string::npos;
        CHECK(p->trainable == (is_adaptor || is_lora));
        if (p->trainable) trainable += p->value.numel();
    }
    // adaptor + S-LoRA + L-LoRA counts (dual configuration)
    int64_t expect = m.adaptor.cfg.param_count() + 4 * lora_param_count(2, 16, 16) + 4 * lora_param_count(2, 16, 16);
    CHECK(trainable == expect);
}

TEST_CASE("the four ablation configurations differ only in adapter presence") {
    auto count_trainable = [](LLaSTModel<float>& m) {
        int64_t n = 0;
        for (auto* p : m.parameters()) {
            if (p->trainable) n += p->value.numel();
        }
        return n;
    };
    LoRAConfig cfg;
    cfg.rank = 2;
    cfg.alpha = 2;

    auto adaptor_only = tiny_model(11);
    adaptor_only.freeze_base();
    auto with_s = tiny_model(11);
    with_s.inject_s_lora(cfg);
    with_s.freeze_base();
    auto with_l = tiny_model(11);
    with_l.inject_l_lora(cfg);
    with_l.freeze_base();
    auto dual = tiny_model(11);
    dual.inject_s_lora(cfg);
    dual.inject_l_lora(cfg);
    dual.freeze_base();

    int64_t base = adaptor_only.adaptor.cfg.param_count();
    int64_t s_extra = 4 * lora_param_count(2, 16, 16);
    CHECK(count_trainable(adaptor_only) == base);
    CHECK(count_trainable(with_s) == base + s_extra);
    CHECK(count_trainable(with_l) == base + s_extra);
    CHECK(count_trainable(dual) == base + 2 * s_extra);
}

TEST_CASE("frozen hash helper sees frozen tensors unchanged by grad accumulation") {
    auto m = tiny_model(13);
    LoRAConfig cfg;
    cfg.rank = 2;
    cfg.alpha = 2;
    m.inject_s_lora(cfg);
    m.inject_l_lora(cfg);
    m.freeze_base();
    auto ps = m.parameters();
    uint64_t before = hash_tensors(ps, /*frozen_only=*/true);

    // run a backward pass; frozen values must not move
    Tensor<float> feats = random_features(42);
    PromptSequence seq = assemble_sequence(m.vocab, "<audio><AudioInputs></audio> Translate the French sentence to English.",
                                           "Hello world.", m.encoder.output_frames(feats.dim(0)), PromptMode::kTrain);
    Graph<float> g;
    auto logits = m.forward_sequence(g, seq, feats);
    int64_t L = seq.length();
    std::vector<int32_t> tgt(seq.labels.begin() + 1, seq.labels.end());
    std::vector<uint8_t> msk(seq.loss_mask.begin() + 1, seq.loss_mask.end());
    for (auto& t : tgt) {
        if (t < 0) t = 0;
    }
    g.backward(g.masked_cross_entropy(g.slice(logits, 0, 0, L - 1), tgt, msk));

    for (auto* p : ps) {
        if (!p->trainable) CHECK_FALSE(p->has_grad());
    }
    CHECK(hash_tensors(ps, /*frozen_only=*/true) == before);
}
