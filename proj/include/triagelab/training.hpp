#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "triagelab/alert.hpp"
#include "triagelab/model.hpp"
#include "triagelab/tokenizer.hpp"

namespace triagelab {

struct TrainConfig {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    int batch_size = 32;
    int epochs = 10;
    uint64_t seed = 1;
    bool shuffle_each_epoch = true;

    void validate() const;  // throws ConfigError
    bool operator==(const TrainConfig&) const = default;
};

struct LossPoint {
    int step = 0;
    double loss = 0.0;
};

// Optimizer state, one moment pair per trainable tensor plus the restricted
// head. The full head is never updated while the restricted head trains.
template <typename T>
struct AdamState {
    int step = 0;
    std::vector<std::vector<T>> m, v;
    std::vector<T> head_m, head_v;

    void init(const ModelParams<T>& params, const RestrictedHead<T>& head);
};

struct Checkpoint {
    ModelParams<float> params;  // full head carries the merged-back rows
    RestrictedHead<float> head;
    int step = 0;
    std::vector<LossPoint> loss_history;
    TrainConfig config;
    std::string dataset_name;
    uint64_t vocab_hash = 0;
    bool diverged = false;
};

// Mean cross-entropy of the two-way softmax at each sequence's last content
// position, against the assigned class. Gradients land in params.*.g and
// head.g; nothing else contributes to the loss.
template <typename T>
double final_token_loss(ModelParams<T>& params, RestrictedHead<T>& head,
                        const Batch& batch, RunState<T>& state);

// Forward-only loss, used by the finite-difference oracle.
template <typename T>
double loss_only(const ModelParams<T>& params, const RestrictedHead<T>& head,
                 const Batch& batch, RunState<T>& state);

// Bias-corrected AdamW over body + restricted head. Decoupled weight decay
// touches matrices only. Throws NumericError naming the tensor on a
// non-finite gradient.
template <typename T>
void adamw_step(ModelParams<T>& params, RestrictedHead<T>& head, AdamState<T>& opt,
                const TrainConfig& cfg);

Checkpoint train(const DatasetBundle& bundle, const TokenizerTable& table,
                 const ModelDims& dims, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

struct GradCheckEntry {
    std::string tensor;
    double max_rel_err = 0.0;
    int sampled = 0;
    bool pass = true;
};

struct GradCheckReport {
    double tolerance = 0.0;
    double step_size = 0.0;
    bool pass = true;
    double max_rel_err = 0.0;
    std::vector<GradCheckEntry> entries;

    std::string to_string() const;
};

// Test hook: mutates the analytic gradient of the named tensor before the
// comparison, so a corrupted tensor shows up as a failing entry.
using GradCorruptionHook = std::function<void(const std::string&, std::span<double>)>;

// Central finite differences in 64-bit (h = 1e-5) against the analytic
// gradients, sampling `samples_per_tensor` coordinates from every trainable
// tensor.
GradCheckReport grad_check(const ModelDims& dims, uint64_t seed, double tolerance,
                           int samples_per_tensor = 25,
                           const GradCorruptionHook& hook = nullptr);

}  // namespace triagelab
