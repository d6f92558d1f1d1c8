// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "llast/encoder.hpp"
#include "llast/gradcheck.hpp"

using namespace llast;

namespace {

EncoderConfig tiny_cfg() {
    EncoderConfig cfg;
    cfg.in_dim = 8;
    cfg.d_model = 16;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.ff_mult = 2;
    cfg.subsample_factor = 2;
    cfg.max_frames = 64;
    return cfg;
}

}  // namespace

TEST_CASE("build determinism and config validation") {
    auto a = Encoder<float>::build(tiny_cfg(), 7);
    auto b = Encoder<float>::build(tiny_cfg(), 7);
    std::vector<Parameter<float>*> pa, pb;
    a.collect(pa);
    b.collect(pb);
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i]->name == pb[i]->name);
        CHECK(pa[i]->value.vec() == pb[i]->value.vec());
    }

    EncoderConfig bad = tiny_cfg();
    bad.d_model = 64;
    bad.n_heads = 5;
    CHECK_THROWS_AS(Encoder<float>::build(bad, 0), ConfigError);

    EncoderConfig bad2 = tiny_cfg();
    bad2.subsample_factor = 3;
    CHECK_THROWS_AS(Encoder<float>::build(bad2, 0), ConfigError);
}

TEST_CASE("parameter count matches the closed-form layer formula") {
    EncoderConfig cfg = tiny_cfg();
    cfg.d_model = 64;
    cfg.n_heads = 4;
    cfg.ff_mult = 4;
    cfg.n_layers = 2;
    auto e = Encoder<float>::build(cfg, 3);
    int64_t d = cfg.d_model;
    int64_t per_layer = 4 * (d * d + d)                        // attention q,k,v,o
                        + (d * (cfg.ff_mult * d) + cfg.ff_mult * d) + (cfg.ff_mult * d * d + d)  // ffn
                        + 2 * (2 * d);                         // two layer norms
    int64_t expect = cfg.subsample_factor * cfg.in_dim * d + d  // input projection
                     + cfg.n_layers * per_layer + 2 * d;        // final norm
    std::vector<Parameter<float>*> ps;
    e.collect(ps);
    int64_t total = 0;
    for (auto* p : ps) total += p->value.numel();
    CHECK(total == expect);
}

TEST_CASE("output frame contract T' = ceil(T / subsample)") {
    for (int64_t sub : {1, 2, 4}) {
        EncoderConfig cfg = tiny_cfg();
        cfg.subsample_factor = sub;
        auto e = Encoder<float>::build(cfg, 1);
        for (int64_t t = 1; t <= cfg.max_frames; ++t) {
            CHECK(e.output_frames(t) == (t + sub - 1) / sub);
        }
        // spot-check a real forward
        Rng rng(5);
        Graph<float> g;
        Tensor<float> feats = Tensor<float>::randn({13, cfg.in_dim}, rng);
        auto out = e.encode(g, g.input(feats));
        CHECK(g.value(out).dim(0) == (13 + sub - 1) / sub);
        CHECK(g.value(out).dim(1) == cfg.d_model);
    }
}

TEST_CASE("T=100 with factor 4 gives 25 rows") {
    EncoderConfig cfg = tiny_cfg();
    cfg.subsample_factor = 4;
    cfg.max_frames = 128;
    auto e = Encoder<float>::build(cfg, 2);
    Graph<float> g;
    auto out = e.encode(g, g.input(Tensor<float>({100, cfg.in_dim})));
    CHECK(g.value(out).dim(0) == 25);
}

TEST_CASE("zero input stays finite; same input gives identical rows") {
    auto e = Encoder<float>::build(tiny_cfg(), 9);
    Graph<float> g;
    auto out = e.encode(g, g.input(Tensor<float>({10, 8})));
    for (int64_t i = 0; i < g.value(out).numel(); ++i) CHECK(std::isfinite(g.value(out).at(i)));

    Rng rng(17);
    Tensor<float> feats = Tensor<float>::randn({12, 8}, rng);
    Graph<float> g1, g2;
    auto o1 = e.encode(g1, g1.input(feats));
    auto o2 = e.encode(g2, g2.input(feats));
    CHECK(g1.value(o1).vec() == g2.value(o2).vec());
}

TEST_CASE("frame limit is enforced with the limit stated") {
    auto e = Encoder<float>::build(tiny_cfg(), 9);
    Graph<float> g;
    CHECK_THROWS_WITH_AS(e.encode(g, g.input(Tensor<float>({65, 8}))), "too many frames: 65 > limit 64", LengthError);
}

TEST_CASE("attention is bidirectional: late frames affect early outputs") {
    auto e = Encoder<float>::build(tiny_cfg(), 21);
    Rng rng(33);
    Tensor<float> feats = Tensor<float>::randn({12, 8}, rng);
    Graph<float> g1;
    auto base = g1.value(e.encode(g1, g1.input(feats)));

    Tensor<float> perturbed = feats;
    perturbed.at(11, 3) += 1.0f;  // last frame
    Graph<float> g2;
    auto out = g2.value(e.encode(g2, g2.input(perturbed)));
    double delta_early = 0.0;
    for (int64_t c = 0; c < base.dim(1); ++c) delta_early += std::fabs(out.at(0, c) - base.at(0, c));
    CHECK(delta_early > 0.0);
}

TEST_CASE("gradient check through the full encoder in 64-bit mode") {
    EncoderConfig cfg;
    cfg.in_dim = 4;
    cfg.d_model = 8;
    cfg.n_layers = 2;
    cfg.n_heads = 2;
    cfg.ff_mult = 2;
    cfg.subsample_factor = 2;
    cfg.max_frames = 16;
    auto e = Encoder<double>::build(cfg, 5);
    Rng rng(77);
    Tensor<double> feats = Tensor<double>::randn({5, 4}, rng);
    std::vector<Parameter<double>*> params;
    e.collect(params);
    auto build = [&](Graph<double>& g) {
        auto out = e.encode(g, g.input(feats));
        return g.mean(g.mul(out, out));
    };
    auto res = finite_difference_check(params, build, 1e-4);
    INFO("worst ", res.worst_param);
    CHECK(res.max_rel_err < 1e-4);
}
