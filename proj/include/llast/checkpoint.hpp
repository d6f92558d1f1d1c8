// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: magic LLST, version, CRC32 of the payload, a
// length-prefixed list of named f32 tensors, then UTF-8 key=value config
// blocks. Load of a save reproduces forward outputs bit-exactly.

#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "llast/model.hpp"
#include "llast/trainer.hpp"

namespace llast {

inline constexpr uint32_t kCheckpointVersion = 1;

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct CheckpointFile {
    uint32_t version = kCheckpointVersion;
    std::vector<NamedTensor> tensors;
    std::vector<std::pair<std::string, std::string>> blocks;

    const std::string* find_block(const std::string& name) const {
        for (const auto& [k, v] : blocks) {
            if (k == name) return &v;
        }
        return nullptr;
    }
};

void write_checkpoint_file(const std::string& path, const CheckpointFile& ck);
CheckpointFile read_checkpoint_file(const std::string& path);

// key=value block helpers
std::map<std::string, std::string> parse_kv_block(const std::string& body);
std::string format_kv_block(const std::vector<std::pair<std::string, std::string>>& kv);

// ---- model <-> checkpoint glue ---------------------------------------------

inline CheckpointFile model_to_checkpoint(LLaSTModel<float>& model, const TrainState* state = nullptr) {
    CheckpointFile ck;
    for (auto* p : model.parameters()) {
        ck.tensors.push_back({p->name, p->value.shape(), p->value.vec()});
    }
    auto num = [](auto v) { return std::to_string(v); };
    ck.blocks.emplace_back("frontend", format_kv_block({{"n_mels", num(model.frontend.n_mels)},
                                                        {"win_samples", num(model.frontend.win_samples)},
                                                        {"hop_samples", num(model.frontend.hop_samples)},
                                                        {"normalize", model.frontend.normalize ? "1" : "0"}}));
    const EncoderConfig& e = model.encoder.cfg;
    ck.blocks.emplace_back("encoder", format_kv_block({{"d_model", num(e.d_model)},
                                                       {"n_layers", num(e.n_layers)},
                                                       {"n_heads", num(e.n_heads)},
                                                       {"ff_mult", num(e.ff_mult)},
                                                       {"subsample_factor", num(e.subsample_factor)},
                                                       {"max_frames", num(e.max_frames)}}));
    ck.blocks.emplace_back("adaptor", format_kv_block({{"hidden_dim", num(model.adaptor.cfg.hidden_dim)}}));
    const LMConfig& l = model.lm.cfg;
    ck.blocks.emplace_back("lm", format_kv_block({{"d_model", num(l.d_model)},
                                                  {"n_layers", num(l.n_layers)},
                                                  {"n_heads", num(l.n_heads)},
                                                  {"ff_mult", num(l.ff_mult)},
                                                  {"max_seq_len", num(l.max_seq_len)}}));
    ck.blocks.emplace_back("model", format_kv_block({{"seed", num(model.seed)}}));

    std::string lora_lines;
    for (auto* lin : model.linears()) {
        if (!lin->lora) continue;
        char line[160];
        std::snprintf(line, sizeof(line), "%s=%lld,%.17g,%d\n", lin->name.c_str(),
                      static_cast<long long>(lin->lora->rank), static_cast<double>(lin->lora->alpha),
                      lin->lora->merged ? 1 : 0);
        lora_lines += line;
    }
    if (!lora_lines.empty()) ck.blocks.emplace_back("lora", lora_lines);
    ck.blocks.emplace_back("vocab", model.vocab.to_text());

    if (state) {
        ck.blocks.emplace_back("train_state", format_kv_block({{"step", num(state->step)},
                                                               {"rng_seed", num(state->rng_seed)}}));
        for (const auto& [name, t] : state->m) ck.tensors.push_back({"optim.m." + name, t.shape(), t.vec()});
        for (const auto& [name, t] : state->v) ck.tensors.push_back({"optim.v." + name, t.shape(), t.vec()});
    }
    return ck;
}

inline void require_block(const CheckpointFile& ck, const std::string& name) {
    if (!ck.find_block(name)) throw IntegrityError("checkpoint missing config block '" + name + "'");
}

inline int64_t kv_int(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw IntegrityError("checkpoint block missing key '" + key + "'");
    return std::stoll(it->second);
}

inline uint64_t kv_u64(const std::map<std::string, std::string>& kv, const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw IntegrityError("checkpoint block missing key '" + key + "'");
    return std::stoull(it->second);
}

struct LoadedModel {
    LLaSTModel<float> model;
    TrainState state;
    bool has_train_state = false;
};

inline LoadedModel model_from_checkpoint(const CheckpointFile& ck) {
    for (const char* b : {"frontend", "encoder", "adaptor", "lm", "model", "vocab"}) require_block(ck, b);
    auto fkv = parse_kv_block(*ck.find_block("frontend"));
    FrontendConfig fcfg;
    fcfg.n_mels = static_cast<int>(kv_int(fkv, "n_mels"));
    fcfg.win_samples = static_cast<int>(kv_int(fkv, "win_samples"));
    fcfg.hop_samples = static_cast<int>(kv_int(fkv, "hop_samples"));
    fcfg.normalize = kv_int(fkv, "normalize") != 0;

    auto ekv = parse_kv_block(*ck.find_block("encoder"));
    EncoderConfig ecfg;
    ecfg.d_model = kv_int(ekv, "d_model");
    ecfg.n_layers = kv_int(ekv, "n_layers");
    ecfg.n_heads = kv_int(ekv, "n_heads");
    ecfg.ff_mult = kv_int(ekv, "ff_mult");
    ecfg.subsample_factor = kv_int(ekv, "subsample_factor");
    ecfg.max_frames = kv_int(ekv, "max_frames");

    auto akv = parse_kv_block(*ck.find_block("adaptor"));
    AdaptorConfig acfg;
    acfg.hidden_dim = kv_int(akv, "hidden_dim");

    auto lkv = parse_kv_block(*ck.find_block("lm"));
    LMConfig lcfg;
    lcfg.d_model = kv_int(lkv, "d_model");
    lcfg.n_layers = kv_int(lkv, "n_layers");
    lcfg.n_heads = kv_int(lkv, "n_heads");
    lcfg.ff_mult = kv_int(lkv, "ff_mult");
    lcfg.max_seq_len = kv_int(lkv, "max_seq_len");

    uint64_t seed = kv_u64(parse_kv_block(*ck.find_block("model")), "seed");
    Vocabulary vocab = Vocabulary::from_text(*ck.find_block("vocab"));

    LoadedModel out{LLaSTModel<float>::build(fcfg, ecfg, acfg, lcfg, std::move(vocab), seed), TrainState{}, false};
    LLaSTModel<float>& model = out.model;

    if (const std::string* lora = ck.find_block("lora")) {
        std::istringstream in(*lora);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            size_t eq = line.find('=');
            size_t c1 = line.find(',', eq);
            size_t c2 = line.find(',', c1 + 1);
            if (eq == std::string::npos || c1 == std::string::npos || c2 == std::string::npos) {
                throw IntegrityError("checkpoint lora block: bad line '" + line + "'");
            }
            std::string host = line.substr(0, eq);
            int64_t rank = std::stoll(line.substr(eq + 1, c1 - eq - 1));
            double alpha = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
            bool merged = line.substr(c2 + 1) == "1";
            Linear<float>* lin = model.find_linear(host);
            if (!lin) throw IntegrityError("checkpoint lora block references unknown linear '" + host + "'");
            LoRAConfig cfg;
            cfg.rank = rank;
            cfg.alpha = alpha;
            cfg.targets = {host};
            cfg.scope = "restored";
            inject_lora(std::vector<Linear<float>*>{lin}, cfg, model.seed);
            lin->lora->merged = merged;
        }
    }

    std::map<std::string, Parameter<float>*> by_name;
    for (auto* p : model.parameters()) by_name[p->name] = p;
    std::map<std::string, const NamedTensor*> optim_m, optim_v;
    for (const auto& t : ck.tensors) {
        if (t.name.rfind("optim.m.", 0) == 0) {
            optim_m[t.name.substr(8)] = &t;
            continue;
        }
        if (t.name.rfind("optim.v.", 0) == 0) {
            optim_v[t.name.substr(8)] = &t;
            continue;
        }
        auto it = by_name.find(t.name);
        if (it == by_name.end()) throw IntegrityError("checkpoint tensor '" + t.name + "' has no matching parameter");
        if (t.shape != it->second->value.shape()) {
            throw IntegrityError("checkpoint tensor '" + t.name + "' shape " + shape_str(t.shape) +
                                 " != parameter shape " + shape_str(it->second->value.shape()));
        }
        it->second->value = Tensor<float>(t.shape, t.data);
        by_name.erase(it);
    }
    if (!by_name.empty()) {
        throw IntegrityError("checkpoint is missing tensor '" + by_name.begin()->first + "'");
    }

    if (const std::string* ts = ck.find_block("train_state")) {
        auto kv = parse_kv_block(*ts);
        out.state.step = kv_int(kv, "step");
        out.state.rng_seed = kv_u64(kv, "rng_seed");
        for (const auto& [name, t] : optim_m) out.state.m.emplace(name, Tensor<float>(t->shape, t->data));
        for (const auto& [name, t] : optim_v) out.state.v.emplace(name, Tensor<float>(t->shape, t->data));
        out.has_train_state = true;
    }
    return out;
}

inline void save_model(const std::string& path, LLaSTModel<float>& model, const TrainState* state = nullptr) {
    write_checkpoint_file(path, model_to_checkpoint(model, state));
}

inline LoadedModel load_model(const std::string& path) { return model_from_checkpoint(read_checkpoint_file(path)); }

}  // namespace llast
