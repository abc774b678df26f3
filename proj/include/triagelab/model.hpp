#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "triagelab/alert.hpp"
#include "triagelab/tokenizer.hpp"

namespace triagelab {

struct ModelDims {
    int d_model = 64;
    int n_layers = 2;
    int n_heads = 4;
    int d_ff = 256;
    int vocab_size = 0;  // from the tokenizer
    int max_seq_len = 64;

    int head_dim() const { return d_model / n_heads; }
    void validate() const;  // throws StructuralError
    bool operator==(const ModelDims&) const = default;
};

// Closed-form trainable parameter count for these dims.
int64_t param_count(const ModelDims& dims);

template <typename T>
struct ParamTensor {
    std::string name;
    int rows = 0;
    int cols = 1;
    bool decay = false;  // decoupled weight decay applies to matrices only
    std::vector<T> w;
    std::vector<T> g;

    int64_t size() const { return static_cast<int64_t>(rows) * cols; }
};

// All learnable tensors in a fixed order (init draws, optimizer state and
// checkpoint layout all follow it).
template <typename T>
struct ModelParams {
    ModelDims dims;
    std::vector<ParamTensor<T>> tensors;

    struct LayerIdx {
        int ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, fc_w1, fc_b1, fc_w2, fc_b2;
    };
    int tok_emb = -1, pos_emb = -1, lnf_g = -1, lnf_b = -1, full_head = -1;
    std::vector<LayerIdx> layers;

    ParamTensor<T>& at(int idx) { return tensors[idx]; }
    const ParamTensor<T>& at(int idx) const { return tensors[idx]; }
    void zero_grads();
};

// The two full-head rows that act as the classifier during training.
// Row 0 scores the benign class token, row 1 the malicious one.
template <typename T>
struct RestrictedHead {
    std::array<int, 2> source_token_ids{};
    int d_model = 0;
    std::vector<T> w;  // (2, d_model)
    std::vector<T> g;
};

template <typename T>
ModelParams<T> init_params(const ModelDims& dims, uint64_t seed);

template <typename T>
RestrictedHead<T> make_restricted_head(const ModelParams<T>& params, std::array<int, 2> class_ids);

template <typename T>
void merge_back(ModelParams<T>& params, const RestrictedHead<T>& head);

// A padded batch clipped to the longest content length it contains.
struct Batch {
    int B = 0;
    int T = 0;
    std::vector<int32_t> tokens;   // (B, T)
    std::vector<int> last_index;   // per example
    std::vector<int> target;       // 0 = benign, 1 = malicious; empty at inference
};

Batch make_batch(std::span<const TokenSequence> seqs, std::span<const int> targets);

// Per-batch activations and activation gradients, reused across steps.
template <typename T>
struct RunState {
    int B = 0, T_len = 0, K = 0;

    struct LayerActs {
        std::vector<T> ln1, ln1_mean, ln1_rstd;
        std::vector<T> q, k, v;
        std::vector<T> preatt, att;
        std::vector<T> atty, attproj;
        std::vector<T> res1;
        std::vector<T> ln2, ln2_mean, ln2_rstd;
        std::vector<T> fc1, gelu, fc2;
        std::vector<T> res2;
        // gradients
        std::vector<T> d_ln1, d_q, d_k, d_v, d_preatt, d_att, d_atty;
        std::vector<T> d_res1, d_ln2, d_fc1, d_gelu, d_stream_in;
    };

    std::vector<T> x;  // embedding output (B,T,C)
    std::vector<LayerActs> layer;
    std::vector<T> lnf, lnf_mean, lnf_rstd;
    std::vector<T> final_hidden;  // (B,C)
    std::vector<T> logits;        // (B,K)
    std::vector<T> probs;         // (B,K)
    std::vector<T> d_lnf_in, d_final_hidden, d_logits;

    void ensure(const ModelDims& dims, int B_, int T_, int K_);
};

// Forward pass against an arbitrary head matrix (head_rows x d_model).
// Fills state.final_hidden and state.logits.
template <typename T>
void run_forward(const ModelParams<T>& params, const T* head, int head_rows,
                 const Batch& batch, RunState<T>& state);

// Backward from state.d_logits. Accumulates parameter gradients into the
// tensors' g buffers and dhead (both must be zeroed by the caller).
template <typename T>
void run_backward(ModelParams<T>& params, const T* head, T* dhead, int head_rows,
                  const Batch& batch, RunState<T>& state);

// Final-position hidden state for one sequence.
template <typename T>
std::vector<T> forward_hidden(const ModelParams<T>& params, const TokenSequence& seq);

// Logits over the whole vocabulary via the full head.
template <typename T>
std::vector<T> full_logits(const ModelParams<T>& params, const TokenSequence& seq);

// The two class logits via the restricted head.
template <typename T>
std::array<T, 2> restricted_logits(const ModelParams<T>& params, const RestrictedHead<T>& head,
                                   const TokenSequence& seq);

struct Prediction {
    Label label = Label::Malicious;
    double confidence = 0.5;
};

// Ties break toward Malicious: escalation is the fail-safe direction.
template <typename T>
Prediction predict(const ModelParams<T>& params, const RestrictedHead<T>& head,
                   const TokenizerTable& table, const Alert& alert);

std::array<int, 2> class_token_ids();

}  // namespace triagelab
