// SPDX-License-Identifier: Apache-2.0
//
// Masked autoregressive training: AdamW with decoupled weight decay,
// warmup-then-linear-decay schedule, gradient clipping, and the epoch-cycling
// item stream with ASR augmentation.

#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "llast/data.hpp"
#include "llast/model.hpp"

namespace llast {

struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-8;
    double weight_decay = 0.01;
    double peak_lr = 2e-4;
    double clip_norm = 1.0;

    void validate() const {
        if (!(0 < beta1 && beta1 < beta2 && beta2 < 1)) {
            throw ConfigError("optimizer requires 0 < beta1 < beta2 < 1");
        }
    }
};

struct ScheduleConfig {
    int64_t warmup_steps = 0;
    int64_t total_steps = 0;

    void validate() const {
        if (!(0 < warmup_steps && warmup_steps < total_steps)) {
            throw ConfigError("schedule requires 0 < warmup_steps < total_steps");
        }
    }
};

// Linear 0 -> peak over [0, warmup], then linear peak -> 0 over [warmup, total].
inline double lr_at(const ScheduleConfig& s, const OptimizerConfig& o, int64_t step) {
    s.validate();
    if (step < 0 || step > s.total_steps) {
        throw ConfigError("schedule step " + std::to_string(step) + " outside [0, " + std::to_string(s.total_steps) +
                          "]");
    }
    if (step <= s.warmup_steps) {
        return o.peak_lr * static_cast<double>(step) / static_cast<double>(s.warmup_steps);
    }
    return o.peak_lr * static_cast<double>(s.total_steps - step) / static_cast<double>(s.total_steps - s.warmup_steps);
}

struct TrainState {
    int64_t step = 0;
    uint64_t rng_seed = 0;
    // First/second moments keyed by parameter name; entries exist only for
    // trainable parameters that have received gradient.
    std::map<std::string, Tensor<float>> m;
    std::map<std::string, Tensor<float>> v;
};

// One AdamW update over every trainable parameter with a populated gradient.
// Decoupled weight decay; global-norm clipping at cfg.clip_norm; aborts with
// the parameter name on a non-finite gradient.
inline void adamw_step(TrainState& state, const std::vector<Parameter<float>*>& params, double lr,
                       const OptimizerConfig& cfg) {
    cfg.validate();
    double sq = 0.0;
    for (auto* p : params) {
        if (!p->trainable || !p->has_grad()) continue;
        for (int64_t i = 0; i < p->grad.numel(); ++i) {
            float g = p->grad.at(i);
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p->name);
            sq += static_cast<double>(g) * g;
        }
    }
    double norm = std::sqrt(sq);
    double scale = (cfg.clip_norm > 0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

    int64_t t = state.step + 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (auto* p : params) {
        if (!p->trainable || !p->has_grad()) continue;
        auto mit = state.m.find(p->name);
        if (mit == state.m.end()) {
            mit = state.m.emplace(p->name, Tensor<float>(p->value.shape())).first;
            state.v.emplace(p->name, Tensor<float>(p->value.shape()));
        }
        Tensor<float>& m = mit->second;
        Tensor<float>& v = state.v.at(p->name);
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            double g = static_cast<double>(p->grad.at(i)) * scale;
            double mi = cfg.beta1 * m.at(i) + (1.0 - cfg.beta1) * g;
            double vi = cfg.beta2 * v.at(i) + (1.0 - cfg.beta2) * g * g;
            m.at(i) = static_cast<float>(mi);
            v.at(i) = static_cast<float>(vi);
            double mhat = mi / bc1;
            double vhat = vi / bc2;
            double w = p->value.at(i);
            w -= lr * (mhat / (std::sqrt(vhat) + cfg.eps));
            w -= lr * cfg.weight_decay * p->value.at(i);
            p->value.at(i) = static_cast<float>(w);
        }
    }
    state.step = t;
}

// ---- prepared items and the training stream --------------------------------

struct TrainItem {
    std::string id;
    std::string pair;
    Task task = Task::kST;
    Tensor<float> features;
    PromptSequence seq;
    std::string target_text;
};

inline TrainItem prepare_item(const LLaSTModel<float>& model, const SampleRecord& r, const LangRegistry& reg,
                              BuildMode mode, bool include_transcript) {
    AudioWaveform w = read_audio(r.audio_path);
    AcousticFeatures feats = extract_features(w, model.frontend);
    int64_t rows = model.encoder.output_frames(feats.frames.dim(0));
    PromptParts parts = build_prompt(r, reg, mode, include_transcript);
    TrainItem item;
    item.id = r.id;
    item.pair = r.pair();
    item.task = r.task;
    item.features = feats.frames;
    item.seq = assemble_sequence(model.vocab, parts.prompt_text, parts.target_text, rows,
                                 mode == BuildMode::kTrain ? PromptMode::kTrain : PromptMode::kInfer);
    item.target_text = parts.target_text;
    return item;
}

// Epoch-cycling stream over prepared items. Order per epoch comes from
// asr_augment, so prefetch-style consumers see the exact single-threaded
// order for a given seed.
class ItemStream {
public:
    ItemStream(const LLaSTModel<float>& model, std::vector<SampleRecord> records, const LangRegistry& reg,
               MixPolicy policy, bool include_transcript)
        : records_(std::move(records)), policy_(std::move(policy)) {
        if (records_.empty()) throw DegenerateBatchError("training stream over an empty record set");
        for (const auto& r : records_) {
            SampleRecord st = r;
            st.task = Task::kST;
            st_items_.emplace(r.id, prepare_item(model, st, reg, BuildMode::kTrain, include_transcript));
            if (policy_.asr_ratio > 0.0) {
                SampleRecord asr = r;
                asr.task = Task::kASR;
                asr_items_.emplace(r.id, prepare_item(model, asr, reg, BuildMode::kTrain, include_transcript));
            }
        }
        start_epoch();
    }

    const TrainItem& next() {
        if (cursor_ >= order_.size()) {
            ++epoch_;
            start_epoch();
        }
        const SampleRecord& r = order_[cursor_++];
        const auto& table = r.task == Task::kASR ? asr_items_ : st_items_;
        return table.at(r.id);
    }

    int64_t epoch() const { return epoch_; }
    size_t epoch_size() const { return order_.size(); }

private:
    void start_epoch() {
        order_ = asr_augment(records_, policy_, epoch_);
        cursor_ = 0;
    }

    std::vector<SampleRecord> records_;
    MixPolicy policy_;
    std::map<std::string, TrainItem> st_items_;
    std::map<std::string, TrainItem> asr_items_;
    std::vector<SampleRecord> order_;
    size_t cursor_ = 0;
    int64_t epoch_ = 0;
};

// Mean token NLL over all masked positions in the batch: per-sequence means
// recombined by mask-count weights.
inline Graph<float>::Ref batch_loss(LLaSTModel<float>& model, Graph<float>& g,
                                    const std::vector<const TrainItem*>& batch) {
    if (batch.empty()) throw DegenerateBatchError("empty training batch");
    int64_t total_masked = 0;
    for (const auto* item : batch) {
        if (item->seq.masked_count() == 0) {
            throw DegenerateBatchError("sequence " + item->id + " has no masked positions");
        }
        total_masked += item->seq.masked_count();
    }
    Graph<float>::Ref combined{};
    for (const auto* item : batch) {
        auto logits = model.forward_sequence(g, item->seq, item->features);
        int64_t L = item->seq.length();
        // logits at position p-1 predict position p
        std::vector<int32_t> targets(item->seq.labels.begin() + 1, item->seq.labels.end());
        std::vector<uint8_t> mask(item->seq.loss_mask.begin() + 1, item->seq.loss_mask.end());
        for (auto& tgt : targets) {
            if (tgt < 0) tgt = 0;  // unmasked slots, never read by the loss
        }
        auto loss = g.masked_cross_entropy(g.slice(logits, 0, 0, L - 1), std::move(targets), std::move(mask));
        auto weighted = g.scale(loss, static_cast<float>(static_cast<double>(item->seq.masked_count()) /
                                                          static_cast<double>(total_masked)));
        combined = combined.valid() ? g.add(combined, weighted) : weighted;
    }
    return combined;
}

struct StepTrace {
    int64_t step;
    double loss;
    double lr;
};

struct TrainConfig {
    uint64_t seed = 0;
    int64_t total_steps = 200;
    int64_t batch_size = 8;
    int64_t checkpoint_every = 0;  // 0: final checkpoint only
    std::string out_dir;           // when set: loss.csv and checkpoints
};

struct TrainResult {
    std::vector<StepTrace> trace;
    double final_loss = 0.0;
};

using CheckpointHook = std::function<void(const std::string& path, const TrainState& state)>;

inline TrainResult train_model(LLaSTModel<float>& model, ItemStream& stream, const OptimizerConfig& ocfg,
                               const ScheduleConfig& scfg, const TrainConfig& tcfg, TrainState& state,
                               const CheckpointHook& save_hook = nullptr) {
    ocfg.validate();
    scfg.validate();
    if (tcfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");

    std::ofstream csv;
    namespace fs = std::filesystem;
    if (!tcfg.out_dir.empty()) {
        fs::create_directories(tcfg.out_dir);
        csv.open(fs::path(tcfg.out_dir) / "loss.csv", std::ios::binary);
        if (!csv) throw IoError("cannot write loss trace under " + tcfg.out_dir);
        csv << "step,loss,lr\n";
    }

    auto params = model.parameters();
    TrainResult result;
    while (state.step < tcfg.total_steps) {
        std::vector<const TrainItem*> batch;
        for (int64_t b = 0; b < tcfg.batch_size; ++b) batch.push_back(&stream.next());
        Graph<float> g;
        auto loss = batch_loss(model, g, batch);
        double loss_value = g.value(loss).at(0);
        if (!std::isfinite(loss_value)) throw NumericError("non-finite loss at step " + std::to_string(state.step + 1));
        g.backward(loss);

        double lr = lr_at(scfg, ocfg, std::min(state.step + 1, scfg.total_steps));
        adamw_step(state, params, lr, ocfg);
        for (auto* p : params) p->zero_grad();

        result.trace.push_back({state.step, loss_value, lr});
        result.final_loss = loss_value;
        if (csv.is_open()) {
            char line[96];
            std::snprintf(line, sizeof(line), "%lld,%.9g,%.9g\n", static_cast<long long>(state.step), loss_value, lr);
            csv << line;
        }
        if (save_hook && !tcfg.out_dir.empty() && tcfg.checkpoint_every > 0 &&
            state.step % tcfg.checkpoint_every == 0 && state.step < tcfg.total_steps) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_step%06lld.llst", static_cast<long long>(state.step));
            save_hook((fs::path(tcfg.out_dir) / name).string(), state);
        }
    }
    if (save_hook && !tcfg.out_dir.empty()) {
        save_hook((fs::path(tcfg.out_dir) / "checkpoint_final.llst").string(), state);
    }
    return result;
}

}  // namespace llast
