// SPDX-License-Identifier: Apache-2.0
//
// Dual-LoRA plumbing: adapter injection onto named linear maps, merge and
// unmerge against the frozen base weight, and base freezing.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "llast/nn.hpp"

namespace llast {

struct LoRAConfig {
    int64_t rank = 8;
    double alpha = 8.0;  // default alpha = rank (scaling 1.0)
    std::vector<std::string> targets;  // parameter-name patterns, '*' wildcard
    std::string scope;                 // "s-lora" or "l-lora", used for seed derivation
};

// '*' matches any (possibly empty) substring.
inline bool glob_match(std::string_view pattern, std::string_view name) {
    if (pattern.empty()) return name.empty();
    if (pattern[0] == '*') {
        for (size_t i = 0; i <= name.size(); ++i) {
            if (glob_match(pattern.substr(1), name.substr(i))) return true;
        }
        return false;
    }
    if (name.empty() || pattern[0] != name[0]) return false;
    return glob_match(pattern.substr(1), name.substr(1));
}

// Attach adapters to every linear whose name matches a target pattern.
// A ~ N(0, 0.02) seeded per host name, B zero, so injection preserves the
// base map's outputs exactly. Returns the number of adapters attached.
template <typename S>
int inject_lora(const std::vector<Linear<S>*>& linears, const LoRAConfig& cfg, uint64_t seed) {
    if (cfg.rank < 1) throw ConfigError("lora rank must be >= 1, got " + std::to_string(cfg.rank));
    int count = 0;
    for (Linear<S>* lin : linears) {
        bool hit = false;
        for (const auto& pat : cfg.targets) hit = hit || glob_match(pat, lin->name);
        if (!hit) continue;
        if (lin->lora) throw StateError("linear " + lin->name + " already has an adapter");
        if (cfg.rank > std::min(lin->in_dim, lin->out_dim)) {
            throw ConfigError("lora rank " + std::to_string(cfg.rank) + " exceeds min dim of " + lin->name);
        }
        auto ad = std::make_unique<LoRAAdapter<S>>();
        ad->rank = cfg.rank;
        ad->alpha = static_cast<S>(cfg.alpha);
        ad->scaling = static_cast<S>(cfg.alpha / static_cast<double>(cfg.rank));
        ad->base_ref = lin->weight.name;
        Rng rng(derive_seed(seed, cfg.scope + ":" + lin->name));
        ad->a.name = lin->name + ".lora_a";
        ad->a.value = Tensor<S>::randn({cfg.rank, lin->in_dim}, rng, S(0.02));
        ad->b.name = lin->name + ".lora_b";
        ad->b.value = Tensor<S>({lin->out_dim, cfg.rank});
        lin->lora = std::move(ad);
        ++count;
    }
    if (count == 0) {
        std::string pats;
        for (const auto& p : cfg.targets) pats += (pats.empty() ? "" : ", ") + p;
        throw ConfigError("lora targets matched no linear maps: " + pats);
    }
    return count;
}

// W <- W + scaling * (B A)^T for the [in x out] weight layout; the forward
// then bypasses the adapter branch.
template <typename S>
void merge_lora(Linear<S>& lin) {
    if (!lin.lora) throw StateError("merge: " + lin.name + " has no adapter");
    LoRAAdapter<S>& ad = *lin.lora;
    if (ad.merged) throw StateError("merge: " + lin.name + " already merged");
    for (int64_t i = 0; i < lin.in_dim; ++i) {
        for (int64_t o = 0; o < lin.out_dim; ++o) {
            S acc = S(0);
            for (int64_t r = 0; r < ad.rank; ++r) acc += ad.a.value.at(r, i) * ad.b.value.at(o, r);
            lin.weight.value.at(i, o) += ad.scaling * acc;
        }
    }
    ad.merged = true;
}

template <typename S>
void unmerge_lora(Linear<S>& lin) {
    if (!lin.lora) throw StateError("unmerge: " + lin.name + " has no adapter");
    LoRAAdapter<S>& ad = *lin.lora;
    if (!ad.merged) throw StateError("unmerge: " + lin.name + " is not merged");
    for (int64_t i = 0; i < lin.in_dim; ++i) {
        for (int64_t o = 0; o < lin.out_dim; ++o) {
            S acc = S(0);
            for (int64_t r = 0; r < ad.rank; ++r) acc += ad.a.value.at(r, i) * ad.b.value.at(o, r);
            lin.weight.value.at(i, o) -= ad.scaling * acc;
        }
    }
    ad.merged = false;
}

// Trainable parameters added by one adapter: r * (d_in + d_out).
inline int64_t lora_param_count(int64_t rank, int64_t in_dim, int64_t out_dim) { return rank * (in_dim + out_dim); }

}  // namespace llast
