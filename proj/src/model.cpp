#include "triagelab/model.hpp"

#include <algorithm>
#include <cmath>

#include "triagelab/errors.hpp"
#include "triagelab/kernels.hpp"
#include "triagelab/rng.hpp"

namespace triagelab {

void ModelDims::validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1 || max_seq_len < 1) {
        throw StructuralError("model dims must all be >= 1");
    }
    if (d_model % n_heads != 0) {
        throw StructuralError("d_model must be divisible by n_heads");
    }
    if (vocab_size < TokenizerTable::kNumSpecials) {
        throw StructuralError("vocab_size smaller than the reserved specials");
    }
}

int64_t param_count(const ModelDims& d) {
    const int64_t C = d.d_model, F = d.d_ff, V = d.vocab_size, S = d.max_seq_len;
    const int64_t per_layer = 4 * C * C + 4 * C + 2 * F * C + F + C;
    return 2 * V * C + S * C + d.n_layers * per_layer + 2 * C;
}

std::array<int, 2> class_token_ids() {
    return {TokenizerTable::kClassBenign, TokenizerTable::kClassMalicious};
}

template <typename T>
void ModelParams<T>::zero_grads() {
    for (auto& t : tensors) {
        std::fill(t.g.begin(), t.g.end(), T(0));
    }
}

namespace {

template <typename T>
int add_tensor(ModelParams<T>& p, const std::string& name, int rows, int cols, bool decay) {
    ParamTensor<T> t;
    t.name = name;
    t.rows = rows;
    t.cols = cols;
    t.decay = decay;
    t.w.assign(static_cast<size_t>(rows) * cols, T(0));
    t.g.assign(static_cast<size_t>(rows) * cols, T(0));
    p.tensors.push_back(std::move(t));
    return static_cast<int>(p.tensors.size()) - 1;
}

}  // namespace

template <typename T>
ModelParams<T> init_params(const ModelDims& dims, uint64_t seed) {
    dims.validate();
    ModelParams<T> p;
    p.dims = dims;
    const int C = dims.d_model, F = dims.d_ff, V = dims.vocab_size, S = dims.max_seq_len;

    p.tok_emb = add_tensor(p, "tok_emb", V, C, true);
    p.pos_emb = add_tensor(p, "pos_emb", S, C, true);
    for (int l = 0; l < dims.n_layers; ++l) {
        const std::string pre = "layer" + std::to_string(l) + ".";
        typename ModelParams<T>::LayerIdx idx;
        idx.ln1_g = add_tensor(p, pre + "ln1.gain", C, 1, false);
        idx.ln1_b = add_tensor(p, pre + "ln1.bias", C, 1, false);
        idx.wq = add_tensor(p, pre + "attn.wq", C, C, true);
        idx.wk = add_tensor(p, pre + "attn.wk", C, C, true);
        idx.wv = add_tensor(p, pre + "attn.wv", C, C, true);
        idx.wo = add_tensor(p, pre + "attn.wo", C, C, true);
        idx.ln2_g = add_tensor(p, pre + "ln2.gain", C, 1, false);
        idx.ln2_b = add_tensor(p, pre + "ln2.bias", C, 1, false);
        idx.fc_w1 = add_tensor(p, pre + "ffn.w1", F, C, true);
        idx.fc_b1 = add_tensor(p, pre + "ffn.b1", F, 1, false);
        idx.fc_w2 = add_tensor(p, pre + "ffn.w2", C, F, true);
        idx.fc_b2 = add_tensor(p, pre + "ffn.b2", C, 1, false);
        p.layers.push_back(idx);
    }
    p.lnf_g = add_tensor(p, "lnf.gain", C, 1, false);
    p.lnf_b = add_tensor(p, "lnf.bias", C, 1, false);
    p.full_head = add_tensor(p, "head.full", V, C, true);

    // Embeddings, projections and head rows: zero-mean, scale 1/sqrt(d_model).
    // Layer-norm gains start at 1, every bias at 0.
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    for (auto& t : p.tensors) {
        if (t.cols > 1) {
            for (auto& w : t.w) {
                w = static_cast<T>(rng.next_normal() * scale);
            }
        }
    }
    for (int l = 0; l < dims.n_layers; ++l) {
        std::fill(p.at(p.layers[l].ln1_g).w.begin(), p.at(p.layers[l].ln1_g).w.end(), T(1));
        std::fill(p.at(p.layers[l].ln2_g).w.begin(), p.at(p.layers[l].ln2_g).w.end(), T(1));
    }
    std::fill(p.at(p.lnf_g).w.begin(), p.at(p.lnf_g).w.end(), T(1));
    return p;
}

template <typename T>
RestrictedHead<T> make_restricted_head(const ModelParams<T>& params, std::array<int, 2> class_ids) {
    const int C = params.dims.d_model;
    const auto& full = params.at(params.full_head);
    for (const int id : class_ids) {
        if (id < 0 || id >= full.rows) {
            throw StructuralError("class token id out of vocabulary range: " + std::to_string(id));
        }
    }
    RestrictedHead<T> h;
    h.source_token_ids = class_ids;
    h.d_model = C;
    h.w.resize(2 * static_cast<size_t>(C));
    h.g.assign(2 * static_cast<size_t>(C), T(0));
    for (int r = 0; r < 2; ++r) {
        std::copy_n(full.w.begin() + static_cast<size_t>(class_ids[r]) * C, C,
                    h.w.begin() + static_cast<size_t>(r) * C);
    }
    return h;
}

template <typename T>
void merge_back(ModelParams<T>& params, const RestrictedHead<T>& head) {
    auto& full = params.at(params.full_head);
    if (head.d_model != params.dims.d_model ||
        head.w.size() != 2 * static_cast<size_t>(head.d_model)) {
        throw StructuralError("restricted head shape does not match model dims");
    }
    for (const int id : head.source_token_ids) {
        if (id < 0 || id >= full.rows) {
            throw StructuralError("restricted head source id out of range: " + std::to_string(id));
        }
    }
    const int C = head.d_model;
    for (int r = 0; r < 2; ++r) {
        std::copy_n(head.w.begin() + static_cast<size_t>(r) * C, C,
                    full.w.begin() + static_cast<size_t>(head.source_token_ids[r]) * C);
    }
}

Batch make_batch(std::span<const TokenSequence> seqs, std::span<const int> targets) {
    if (seqs.empty()) {
        throw StructuralError("make_batch: empty batch");
    }
    Batch b;
    b.B = static_cast<int>(seqs.size());
    int t_max = 0;
    for (const auto& s : seqs) {
        t_max = std::max(t_max, s.last_index + 1);
    }
    b.T = t_max;
    b.tokens.assign(static_cast<size_t>(b.B) * b.T, TokenizerTable::kPad);
    b.last_index.resize(b.B);
    for (int i = 0; i < b.B; ++i) {
        const auto& s = seqs[i];
        const int n = std::min<int>(b.T, static_cast<int>(s.ids.size()));
        std::copy_n(s.ids.begin(), n, b.tokens.begin() + static_cast<size_t>(i) * b.T);
        b.last_index[i] = s.last_index;
    }
    if (!targets.empty()) {
        if (targets.size() != seqs.size()) {
            throw StructuralError("make_batch: targets do not match batch size");
        }
        b.target.assign(targets.begin(), targets.end());
    }
    return b;
}

template <typename T>
void RunState<T>::ensure(const ModelDims& dims, int B_, int T_, int K_) {
    B = B_;
    T = T_;
    K = K_;
    const size_t BT = static_cast<size_t>(B) * T;
    const size_t BTC = BT * dims.d_model;
    const size_t BTF = BT * dims.d_ff;
    const size_t BHTT = static_cast<size_t>(B) * dims.n_heads * T * T;

    x.assign(BTC, T(0));
    layer.resize(dims.n_layers);
    for (auto& L : layer) {
        L.ln1.assign(BTC, T(0));
        L.ln1_mean.assign(BT, T(0));
        L.ln1_rstd.assign(BT, T(0));
        L.q.assign(BTC, T(0));
        L.k.assign(BTC, T(0));
        L.v.assign(BTC, T(0));
        L.preatt.assign(BHTT, T(0));
        L.att.assign(BHTT, T(0));
        L.atty.assign(BTC, T(0));
        L.attproj.assign(BTC, T(0));
        L.res1.assign(BTC, T(0));
        L.ln2.assign(BTC, T(0));
        L.ln2_mean.assign(BT, T(0));
        L.ln2_rstd.assign(BT, T(0));
        L.fc1.assign(BTF, T(0));
        L.gelu.assign(BTF, T(0));
        L.fc2.assign(BTC, T(0));
        L.res2.assign(BTC, T(0));
        L.d_ln1.assign(BTC, T(0));
        L.d_q.assign(BTC, T(0));
        L.d_k.assign(BTC, T(0));
        L.d_v.assign(BTC, T(0));
        L.d_preatt.assign(BHTT, T(0));
        L.d_att.assign(BHTT, T(0));
        L.d_atty.assign(BTC, T(0));
        L.d_res1.assign(BTC, T(0));
        L.d_ln2.assign(BTC, T(0));
        L.d_fc1.assign(BTF, T(0));
        L.d_gelu.assign(BTF, T(0));
        L.d_stream_in.assign(BTC, T(0));
    }
    lnf.assign(BTC, T(0));
    lnf_mean.assign(BT, T(0));
    lnf_rstd.assign(BT, T(0));
    final_hidden.assign(static_cast<size_t>(B) * dims.d_model, T(0));
    logits.assign(static_cast<size_t>(B) * K, T(0));
    probs.assign(static_cast<size_t>(B) * K, T(0));
    d_lnf_in.assign(BTC, T(0));
    d_final_hidden.assign(static_cast<size_t>(B) * dims.d_model, T(0));
    d_logits.assign(static_cast<size_t>(B) * K, T(0));
}

namespace {

template <typename T>
void attention_forward(std::vector<T>& atty, std::vector<T>& preatt, std::vector<T>& att,
                       const std::vector<T>& q, const std::vector<T>& k, const std::vector<T>& v,
                       int B, int T_, int C, int NH) {
    const int HS = C / NH;
    const T scale = T(1) / std::sqrt(static_cast<T>(HS));
    for (int b = 0; b < B; ++b) {
        for (int h = 0; h < NH; ++h) {
            for (int t = 0; t < T_; ++t) {
                const T* qv = q.data() + (static_cast<size_t>(b) * T_ + t) * C + h * HS;
                T* pre = preatt.data() +
                         ((static_cast<size_t>(b) * NH + h) * T_ + t) * T_;
                T* prob = att.data() + ((static_cast<size_t>(b) * NH + h) * T_ + t) * T_;

                T maxval = std::numeric_limits<T>::lowest();
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T* kv = k.data() + (static_cast<size_t>(b) * T_ + t2) * C + h * HS;
                    const T s = kernels::dot(qv, kv, HS) * scale;
                    pre[t2] = s;
                    maxval = std::max(maxval, s);
                }
                T denom = T(0);
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T e = std::exp(pre[t2] - maxval);
                    prob[t2] = e;
                    denom += e;
                }
                const T inv = T(1) / denom;
                for (int t2 = 0; t2 <= t; ++t2) {
                    prob[t2] *= inv;
                }

                T* y = atty.data() + (static_cast<size_t>(b) * T_ + t) * C + h * HS;
                std::fill_n(y, HS, T(0));
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T* vv = v.data() + (static_cast<size_t>(b) * T_ + t2) * C + h * HS;
                    kernels::axpy(y, prob[t2], vv, HS);
                }
            }
        }
    }
}

template <typename T>
void attention_backward(std::vector<T>& dq, std::vector<T>& dk, std::vector<T>& dv,
                        std::vector<T>& dpreatt, std::vector<T>& datt,
                        const std::vector<T>& datty, const std::vector<T>& q,
                        const std::vector<T>& k, const std::vector<T>& v,
                        const std::vector<T>& att, int B, int T_, int C, int NH) {
    const int HS = C / NH;
    const T scale = T(1) / std::sqrt(static_cast<T>(HS));
    for (int b = 0; b < B; ++b) {
        for (int h = 0; h < NH; ++h) {
            for (int t = 0; t < T_; ++t) {
                const size_t row = ((static_cast<size_t>(b) * NH + h) * T_ + t) * T_;
                const T* prob = att.data() + row;
                T* dprob = datt.data() + row;
                T* dpre = dpreatt.data() + row;
                const T* dy = datty.data() + (static_cast<size_t>(b) * T_ + t) * C + h * HS;
                const T* qv = q.data() + (static_cast<size_t>(b) * T_ + t) * C + h * HS;
                T* dqv = dq.data() + (static_cast<size_t>(b) * T_ + t) * C + h * HS;

                // through y = sum att * v
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T* vv = v.data() + (static_cast<size_t>(b) * T_ + t2) * C + h * HS;
                    T* dvv = dv.data() + (static_cast<size_t>(b) * T_ + t2) * C + h * HS;
                    dprob[t2] += kernels::dot(dy, vv, HS);
                    kernels::axpy(dvv, prob[t2], dy, HS);
                }
                // softmax backward
                T probe = T(0);
                for (int t2 = 0; t2 <= t; ++t2) {
                    probe += prob[t2] * dprob[t2];
                }
                for (int t2 = 0; t2 <= t; ++t2) {
                    dpre[t2] += prob[t2] * (dprob[t2] - probe);
                }
                // through the scaled dot product
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T* kv = k.data() + (static_cast<size_t>(b) * T_ + t2) * C + h * HS;
                    T* dkv = dk.data() + (static_cast<size_t>(b) * T_ + t2) * C + h * HS;
                    const T d = dpre[t2] * scale;
                    kernels::axpy(dqv, d, kv, HS);
                    kernels::axpy(dkv, d, qv, HS);
                }
            }
        }
    }
}

}  // namespace

template <typename T>
void run_forward(const ModelParams<T>& params, const T* head, int head_rows,
                 const Batch& batch, RunState<T>& state) {
    const ModelDims& d = params.dims;
    const int B = batch.B, T_ = batch.T, C = d.d_model, F = d.d_ff, NH = d.n_heads;
    if (T_ > d.max_seq_len) {
        throw StructuralError("batch longer than max_seq_len");
    }
    state.ensure(d, B, T_, head_rows);

    const auto& tok = params.at(params.tok_emb);
    const auto& pos = params.at(params.pos_emb);
    for (int b = 0; b < B; ++b) {
        for (int t = 0; t < T_; ++t) {
            const int32_t id = batch.tokens[static_cast<size_t>(b) * T_ + t];
            if (id < 0 || id >= d.vocab_size) {
                throw StructuralError("token id out of range: " + std::to_string(id));
            }
            T* out = state.x.data() + (static_cast<size_t>(b) * T_ + t) * C;
            const T* te = tok.w.data() + static_cast<size_t>(id) * C;
            const T* pe = pos.w.data() + static_cast<size_t>(t) * C;
            for (int i = 0; i < C; ++i) {
                out[i] = te[i] + pe[i];
            }
        }
    }

    const int BT = B * T_;
    const std::vector<T>* cur = &state.x;
    for (int l = 0; l < d.n_layers; ++l) {
        auto& L = state.layer[l];
        const auto& idx = params.layers[l];
        kernels::layernorm_forward(L.ln1.data(), L.ln1_mean.data(), L.ln1_rstd.data(),
                                   cur->data(), params.at(idx.ln1_g).w.data(),
                                   params.at(idx.ln1_b).w.data(), BT, C);
        kernels::matmul_forward(L.q.data(), L.ln1.data(), params.at(idx.wq).w.data(), nullptr,
                                BT, C, C);
        kernels::matmul_forward(L.k.data(), L.ln1.data(), params.at(idx.wk).w.data(), nullptr,
                                BT, C, C);
        kernels::matmul_forward(L.v.data(), L.ln1.data(), params.at(idx.wv).w.data(), nullptr,
                                BT, C, C);
        attention_forward(L.atty, L.preatt, L.att, L.q, L.k, L.v, B, T_, C, NH);
        kernels::matmul_forward(L.attproj.data(), L.atty.data(), params.at(idx.wo).w.data(),
                                nullptr, BT, C, C);
        L.res1 = *cur;
        kernels::add_inplace(L.res1.data(), L.attproj.data(), BT * C);

        kernels::layernorm_forward(L.ln2.data(), L.ln2_mean.data(), L.ln2_rstd.data(),
                                   L.res1.data(), params.at(idx.ln2_g).w.data(),
                                   params.at(idx.ln2_b).w.data(), BT, C);
        kernels::matmul_forward(L.fc1.data(), L.ln2.data(), params.at(idx.fc_w1).w.data(),
                                params.at(idx.fc_b1).w.data(), BT, C, F);
        kernels::ref::gelu_forward(L.gelu.data(), L.fc1.data(), BT * F);
        kernels::matmul_forward(L.fc2.data(), L.gelu.data(), params.at(idx.fc_w2).w.data(),
                                params.at(idx.fc_b2).w.data(), BT, F, C);
        L.res2 = L.res1;
        kernels::add_inplace(L.res2.data(), L.fc2.data(), BT * C);
        cur = &L.res2;
    }

    kernels::layernorm_forward(state.lnf.data(), state.lnf_mean.data(), state.lnf_rstd.data(),
                               cur->data(), params.at(params.lnf_g).w.data(),
                               params.at(params.lnf_b).w.data(), BT, C);

    for (int b = 0; b < B; ++b) {
        const int t = batch.last_index[b];
        if (t < 0 || t >= T_) {
            throw StructuralError("last_index out of range");
        }
        std::copy_n(state.lnf.data() + (static_cast<size_t>(b) * T_ + t) * C, C,
                    state.final_hidden.data() + static_cast<size_t>(b) * C);
    }
    kernels::matmul_forward(state.logits.data(), state.final_hidden.data(), head, nullptr,
                            B, C, head_rows);
}

template <typename T>
void run_backward(ModelParams<T>& params, const T* head, T* dhead, int head_rows,
                  const Batch& batch, RunState<T>& state) {
    const ModelDims& d = params.dims;
    const int B = batch.B, T_ = batch.T, C = d.d_model, F = d.d_ff, NH = d.n_heads;
    const int BT = B * T_;

    std::fill(state.d_lnf_in.begin(), state.d_lnf_in.end(), T(0));
    std::fill(state.d_final_hidden.begin(), state.d_final_hidden.end(), T(0));
    for (auto& L : state.layer) {
        for (auto* v : {&L.d_ln1, &L.d_q, &L.d_k, &L.d_v, &L.d_atty, &L.d_res1,
                        &L.d_ln2, &L.d_stream_in}) {
            std::fill(v->begin(), v->end(), T(0));
        }
        std::fill(L.d_preatt.begin(), L.d_preatt.end(), T(0));
        std::fill(L.d_att.begin(), L.d_att.end(), T(0));
        std::fill(L.d_fc1.begin(), L.d_fc1.end(), T(0));
        std::fill(L.d_gelu.begin(), L.d_gelu.end(), T(0));
    }

    // head: logits = final_hidden @ head^T
    kernels::matmul_backward(state.d_final_hidden.data(), dhead, nullptr,
                             state.d_logits.data(), state.final_hidden.data(), head,
                             B, C, head_rows);

    // scatter the final-position gradient into the lnf input grid
    std::vector<T>& d_lnf_out = state.d_lnf_in;  // reused as the (B,T,C) upstream of lnf
    for (int b = 0; b < B; ++b) {
        const int t = batch.last_index[b];
        kernels::add_inplace(d_lnf_out.data() + (static_cast<size_t>(b) * T_ + t) * C,
                             state.d_final_hidden.data() + static_cast<size_t>(b) * C, C);
    }

    const std::vector<T>* lnf_in =
        d.n_layers > 0 ? &state.layer[d.n_layers - 1].res2 : &state.x;
    std::vector<T> d_stream(static_cast<size_t>(BT) * C, T(0));
    kernels::layernorm_backward(d_stream.data(), params.at(params.lnf_g).g.data(),
                                params.at(params.lnf_b).g.data(), d_lnf_out.data(),
                                lnf_in->data(), state.lnf_mean.data(), state.lnf_rstd.data(),
                                params.at(params.lnf_g).w.data(), BT, C);

    for (int l = d.n_layers - 1; l >= 0; --l) {
        auto& L = state.layer[l];
        const auto& idx = params.layers[l];
        const std::vector<T>* inp_stream = l > 0 ? &state.layer[l - 1].res2 : &state.x;

        // res2 = res1 + fc2(gelu(fc1(ln2(res1))))
        kernels::matmul_backward(L.d_gelu.data(), params.at(idx.fc_w2).g.data(),
                                 params.at(idx.fc_b2).g.data(), d_stream.data(),
                                 L.gelu.data(), params.at(idx.fc_w2).w.data(), BT, F, C);
        kernels::ref::gelu_backward(L.d_fc1.data(), L.fc1.data(), L.d_gelu.data(), BT * F);
        kernels::matmul_backward(L.d_ln2.data(), params.at(idx.fc_w1).g.data(),
                                 params.at(idx.fc_b1).g.data(), L.d_fc1.data(),
                                 L.ln2.data(), params.at(idx.fc_w1).w.data(), BT, C, F);
        kernels::layernorm_backward(L.d_res1.data(), params.at(idx.ln2_g).g.data(),
                                    params.at(idx.ln2_b).g.data(), L.d_ln2.data(),
                                    L.res1.data(), L.ln2_mean.data(), L.ln2_rstd.data(),
                                    params.at(idx.ln2_g).w.data(), BT, C);
        kernels::add_inplace(L.d_res1.data(), d_stream.data(), BT * C);  // residual skip

        // res1 = stream_in + attproj(atty)
        kernels::matmul_backward(L.d_atty.data(), params.at(idx.wo).g.data(), nullptr,
                                 L.d_res1.data(), L.atty.data(), params.at(idx.wo).w.data(),
                                 BT, C, C);
        attention_backward(L.d_q, L.d_k, L.d_v, L.d_preatt, L.d_att, L.d_atty,
                           L.q, L.k, L.v, L.att, B, T_, C, NH);
        kernels::matmul_backward(L.d_ln1.data(), params.at(idx.wq).g.data(), nullptr,
                                 L.d_q.data(), L.ln1.data(), params.at(idx.wq).w.data(),
                                 BT, C, C);
        kernels::matmul_backward(L.d_ln1.data(), params.at(idx.wk).g.data(), nullptr,
                                 L.d_k.data(), L.ln1.data(), params.at(idx.wk).w.data(),
                                 BT, C, C);
        kernels::matmul_backward(L.d_ln1.data(), params.at(idx.wv).g.data(), nullptr,
                                 L.d_v.data(), L.ln1.data(), params.at(idx.wv).w.data(),
                                 BT, C, C);
        kernels::layernorm_backward(L.d_stream_in.data(), params.at(idx.ln1_g).g.data(),
                                    params.at(idx.ln1_b).g.data(), L.d_ln1.data(),
                                    inp_stream->data(), L.ln1_mean.data(), L.ln1_rstd.data(),
                                    params.at(idx.ln1_g).w.data(), BT, C);
        kernels::add_inplace(L.d_stream_in.data(), L.d_res1.data(), BT * C);  // residual skip
        d_stream = L.d_stream_in;
    }

    // embeddings
    auto& dtok = params.at(params.tok_emb).g;
    auto& dpos = params.at(params.pos_emb).g;
    for (int b = 0; b < B; ++b) {
        for (int t = 0; t < T_; ++t) {
            const int32_t id = batch.tokens[static_cast<size_t>(b) * T_ + t];
            const T* dx = d_stream.data() + (static_cast<size_t>(b) * T_ + t) * C;
            kernels::add_inplace(dtok.data() + static_cast<size_t>(id) * C, dx, C);
            kernels::add_inplace(dpos.data() + static_cast<size_t>(t) * C, dx, C);
        }
    }
}

template <typename T>
std::vector<T> forward_hidden(const ModelParams<T>& params, const TokenSequence& seq) {
    Batch b = make_batch(std::span<const TokenSequence>(&seq, 1), {});
    RunState<T> state;
    // any head works; use the two class rows to keep the call cheap
    RestrictedHead<T> h = make_restricted_head(params, class_token_ids());
    run_forward(params, h.w.data(), 2, b, state);
    return std::vector<T>(state.final_hidden.begin(),
                          state.final_hidden.begin() + params.dims.d_model);
}

template <typename T>
std::vector<T> full_logits(const ModelParams<T>& params, const TokenSequence& seq) {
    Batch b = make_batch(std::span<const TokenSequence>(&seq, 1), {});
    RunState<T> state;
    const auto& full = params.at(params.full_head);
    run_forward(params, full.w.data(), full.rows, b, state);
    return state.logits;
}

template <typename T>
std::array<T, 2> restricted_logits(const ModelParams<T>& params, const RestrictedHead<T>& head,
                                   const TokenSequence& seq) {
    Batch b = make_batch(std::span<const TokenSequence>(&seq, 1), {});
    RunState<T> state;
    run_forward(params, head.w.data(), 2, b, state);
    return {state.logits[0], state.logits[1]};
}

template <typename T>
Prediction predict(const ModelParams<T>& params, const RestrictedHead<T>& head,
                   const TokenizerTable& table, const Alert& alert) {
    const TokenSequence seq = encode(serialize_alert(alert), table);
    const std::array<T, 2> logits = restricted_logits(params, head, seq);
    Prediction p;
    // logits[0] scores benign, logits[1] malicious; ties go malicious
    p.label = logits[1] >= logits[0] ? Label::Malicious : Label::Benign;
    const double gap = std::abs(static_cast<double>(logits[1]) - static_cast<double>(logits[0]));
    p.confidence = 1.0 / (1.0 + std::exp(-gap));
    return p;
}

template struct ModelParams<float>;
template struct ModelParams<double>;
template struct RunState<float>;
template struct RunState<double>;

template ModelParams<float> init_params<float>(const ModelDims&, uint64_t);
template ModelParams<double> init_params<double>(const ModelDims&, uint64_t);
template RestrictedHead<float> make_restricted_head<float>(const ModelParams<float>&, std::array<int, 2>);
template RestrictedHead<double> make_restricted_head<double>(const ModelParams<double>&, std::array<int, 2>);
template void merge_back<float>(ModelParams<float>&, const RestrictedHead<float>&);
template void merge_back<double>(ModelParams<double>&, const RestrictedHead<double>&);
template void run_forward<float>(const ModelParams<float>&, const float*, int, const Batch&, RunState<float>&);
template void run_forward<double>(const ModelParams<double>&, const double*, int, const Batch&, RunState<double>&);
template void run_backward<float>(ModelParams<float>&, const float*, float*, int, const Batch&, RunState<float>&);
template void run_backward<double>(ModelParams<double>&, const double*, double*, int, const Batch&, RunState<double>&);
template std::vector<float> forward_hidden<float>(const ModelParams<float>&, const TokenSequence&);
template std::vector<double> forward_hidden<double>(const ModelParams<double>&, const TokenSequence&);
template std::vector<float> full_logits<float>(const ModelParams<float>&, const TokenSequence&);
template std::vector<double> full_logits<double>(const ModelParams<double>&, const TokenSequence&);
template std::array<float, 2> restricted_logits<float>(const ModelParams<float>&, const RestrictedHead<float>&, const TokenSequence&);
template std::array<double, 2> restricted_logits<double>(const ModelParams<double>&, const RestrictedHead<double>&, const TokenSequence&);
template Prediction predict<float>(const ModelParams<float>&, const RestrictedHead<float>&, const TokenizerTable&, const Alert&);
template Prediction predict<double>(const ModelParams<double>&, const RestrictedHead<double>&, const TokenizerTable&, const Alert&);

}  // namespace triagelab
