#include "triagelab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "triagelab/errors.hpp"
#include "triagelab/kernels.hpp"
#include "triagelab/rng.hpp"

namespace triagelab {

void TrainConfig::validate() const {
    if (learning_rate <= 0) {
        throw ConfigError("learning_rate must be > 0");
    }
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
        throw ConfigError("betas must lie in [0, 1)");
    }
    if (eps <= 0) {
        throw ConfigError("eps must be > 0");
    }
    if (weight_decay < 0) {
        throw ConfigError("weight_decay must be >= 0");
    }
    if (batch_size < 1) {
        throw ConfigError("batch_size must be >= 1");
    }
    if (epochs < 1) {
        throw ConfigError("epochs must be >= 1");
    }
}

template <typename T>
void AdamState<T>::init(const ModelParams<T>& params, const RestrictedHead<T>& head) {
    step = 0;
    m.clear();
    v.clear();
    for (const auto& t : params.tensors) {
        m.emplace_back(t.w.size(), T(0));
        v.emplace_back(t.w.size(), T(0));
    }
    head_m.assign(head.w.size(), T(0));
    head_v.assign(head.w.size(), T(0));
}

namespace {

// Numerically stable two-way softmax cross-entropy. Fills probs and, when
// grad is set, d_logits = (p - onehot) / B.
template <typename T>
double softmax_xent(RunState<T>& state, const Batch& batch, bool grad) {
    const int B = batch.B;
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        const T l0 = state.logits[static_cast<size_t>(b) * 2 + 0];
        const T l1 = state.logits[static_cast<size_t>(b) * 2 + 1];
        const T mx = std::max(l0, l1);
        const T e0 = std::exp(l0 - mx);
        const T e1 = std::exp(l1 - mx);
        const T denom = e0 + e1;
        const T p0 = e0 / denom;
        const T p1 = e1 / denom;
        state.probs[static_cast<size_t>(b) * 2 + 0] = p0;
        state.probs[static_cast<size_t>(b) * 2 + 1] = p1;
        const int y = batch.target[b];
        loss -= std::log(static_cast<double>(y == 0 ? p0 : p1));
        if (grad) {
            state.d_logits[static_cast<size_t>(b) * 2 + 0] = (p0 - T(y == 0 ? 1 : 0)) / T(B);
            state.d_logits[static_cast<size_t>(b) * 2 + 1] = (p1 - T(y == 1 ? 1 : 0)) / T(B);
        }
    }
    return loss / B;
}

template <typename T>
void check_targets(const Batch& batch) {
    if (batch.B == 0) {
        throw StructuralError("final_token_loss: empty batch");
    }
    if (batch.target.size() != static_cast<size_t>(batch.B)) {
        throw StructuralError("final_token_loss: batch has no targets");
    }
    for (const int t : batch.target) {
        if (t != 0 && t != 1) {
            throw StructuralError("final_token_loss: target out of range");
        }
    }
}

}  // namespace

template <typename T>
double final_token_loss(ModelParams<T>& params, RestrictedHead<T>& head,
                        const Batch& batch, RunState<T>& state) {
    check_targets<T>(batch);
    params.zero_grads();
    std::fill(head.g.begin(), head.g.end(), T(0));
    run_forward(params, head.w.data(), 2, batch, state);
    const double loss = softmax_xent(state, batch, true);
    run_backward(params, head.w.data(), head.g.data(), 2, batch, state);
    return loss;
}

template <typename T>
double loss_only(const ModelParams<T>& params, const RestrictedHead<T>& head,
                 const Batch& batch, RunState<T>& state) {
    check_targets<T>(batch);
    run_forward(params, head.w.data(), 2, batch, state);
    return softmax_xent(state, batch, false);
}

template <typename T>
void adamw_step(ModelParams<T>& params, RestrictedHead<T>& head, AdamState<T>& opt,
                const TrainConfig& cfg) {
    opt.step += 1;
    const T bc1 = T(1) - static_cast<T>(std::pow(cfg.beta1, opt.step));
    const T bc2 = T(1) - static_cast<T>(std::pow(cfg.beta2, opt.step));

    auto check_finite = [](const std::string& name, const std::vector<T>& g) {
        for (const T x : g) {
            if (!std::isfinite(static_cast<double>(x))) {
                throw NumericError("non-finite gradient in tensor '" + name + "'");
            }
        }
    };

    for (size_t i = 0; i < params.tensors.size(); ++i) {
        if (static_cast<int>(i) == params.full_head) {
            continue;  // only the restricted rows train
        }
        auto& t = params.tensors[i];
        check_finite(t.name, t.g);
        kernels::adamw_update(t.w.data(), opt.m[i].data(), opt.v[i].data(), t.g.data(),
                              static_cast<int>(t.w.size()), static_cast<T>(cfg.learning_rate),
                              static_cast<T>(cfg.beta1), static_cast<T>(cfg.beta2),
                              static_cast<T>(cfg.eps),
                              t.decay ? static_cast<T>(cfg.weight_decay) : T(0), bc1, bc2);
    }
    check_finite("head.restricted", head.g);
    kernels::adamw_update(head.w.data(), opt.head_m.data(), opt.head_v.data(), head.g.data(),
                          static_cast<int>(head.w.size()), static_cast<T>(cfg.learning_rate),
                          static_cast<T>(cfg.beta1), static_cast<T>(cfg.beta2),
                          static_cast<T>(cfg.eps), static_cast<T>(cfg.weight_decay), bc1, bc2);
}

Checkpoint train(const DatasetBundle& bundle, const TokenizerTable& table,
                 const ModelDims& dims_in, const TrainConfig& cfg) {
    cfg.validate();
    if (bundle.train.empty()) {
        throw ConfigError("train: bundle has an empty train split");
    }
    ModelDims dims = dims_in;
    dims.vocab_size = table.size();
    dims.max_seq_len = table.max_seq_len;
    dims.validate();

    ModelParams<float> params = init_params<float>(dims, derive_seed(cfg.seed, "init"));
    RestrictedHead<float> head = make_restricted_head(params, class_token_ids());

    const size_t n = bundle.train.size();
    std::vector<TokenSequence> seqs;
    std::vector<int> targets;
    seqs.reserve(n);
    targets.reserve(n);
    for (const Alert& a : bundle.train) {
        seqs.push_back(encode(serialize_alert(a), table));
        targets.push_back(a.assigned_label == Label::Malicious ? 1 : 0);
    }

    AdamState<float> opt;
    opt.init(params, head);
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});

    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.dataset_name = bundle.name;
    ckpt.vocab_hash = vocab_hash(table);

    // epoch snapshots back the divergence abort
    ModelParams<float> good_params = params;
    RestrictedHead<float> good_head = head;
    int good_step = 0;

    RunState<float> state;
    std::vector<TokenSequence> batch_seqs;
    std::vector<int> batch_targets;
    int step = 0;
    bool diverged = false;

    for (int epoch = 0; epoch < cfg.epochs && !diverged; ++epoch) {
        if (cfg.shuffle_each_epoch) {
            shuffle_rng.shuffle(order);
        }
        for (size_t start = 0; start < n; start += cfg.batch_size) {
            const size_t stop = std::min(n, start + cfg.batch_size);
            batch_seqs.clear();
            batch_targets.clear();
            for (size_t i = start; i < stop; ++i) {
                batch_seqs.push_back(seqs[order[i]]);
                batch_targets.push_back(targets[order[i]]);
            }
            const Batch batch = make_batch(batch_seqs, batch_targets);
            const double loss = final_token_loss(params, head, batch, state);
            if (!std::isfinite(loss)) {
                diverged = true;
                break;
            }
            adamw_step(params, head, opt, cfg);
            ++step;
            ckpt.loss_history.push_back({step, loss});
        }
        if (!diverged) {
            good_params = params;
            good_head = head;
            good_step = step;
        }
    }

    if (diverged) {
        // roll back to the last finished epoch
        params = std::move(good_params);
        head = std::move(good_head);
        step = good_step;
        ckpt.loss_history.resize(static_cast<size_t>(step));
        ckpt.diverged = true;
    }

    merge_back(params, head);
    ckpt.params = std::move(params);
    ckpt.head = std::move(head);
    ckpt.step = step;
    return ckpt;
}

std::string GradCheckReport::to_string() const {
    std::ostringstream out;
    out << "gradient check: tolerance " << tolerance << ", h " << step_size << "\n";
    for (const auto& e : entries) {
        out << "  " << (e.pass ? "ok   " : "FAIL ") << e.tensor
            << "  max_rel_err=" << e.max_rel_err << "  sampled=" << e.sampled << "\n";
    }
    out << (pass ? "PASS" : "FAIL") << " overall max_rel_err=" << max_rel_err << "\n";
    return out.str();
}

GradCheckReport grad_check(const ModelDims& dims_in, uint64_t seed, double tolerance,
                           int samples_per_tensor, const GradCorruptionHook& hook) {
    ModelDims dims = dims_in;
    if (dims.vocab_size == 0) {
        dims.vocab_size = 32;
    }
    dims.validate();

    Rng rng(derive_seed(seed, "grad-check"));
    const int B = 4;
    const int T = std::min(12, dims.max_seq_len);

    Batch batch;
    batch.B = B;
    batch.T = T;
    batch.tokens.resize(static_cast<size_t>(B) * T);
    for (auto& t : batch.tokens) {
        t = static_cast<int32_t>(rng.next_below(static_cast<uint64_t>(dims.vocab_size)));
    }
    batch.last_index.resize(B);
    batch.target.resize(B);
    for (int b = 0; b < B; ++b) {
        batch.last_index[b] = static_cast<int>(rng.next_below(T / 2)) + T / 2 - 1;
        batch.target[b] = static_cast<int>(rng.next_below(2));
    }

    ModelParams<double> params = init_params<double>(dims, derive_seed(seed, "init"));
    RestrictedHead<double> head = make_restricted_head(params, class_token_ids());

    RunState<double> state;
    final_token_loss(params, head, batch, state);

    // collect analytic gradients, applying the corruption hook if present
    struct Slot {
        std::string name;
        std::vector<double>* w;
        std::vector<double> analytic;
    };
    std::vector<Slot> slots;
    for (size_t i = 0; i < params.tensors.size(); ++i) {
        if (static_cast<int>(i) == params.full_head) {
            continue;
        }
        auto& t = params.tensors[i];
        slots.push_back({t.name, &t.w, t.g});
    }
    slots.push_back({"head.restricted", &head.w, head.g});
    if (hook) {
        for (auto& s : slots) {
            hook(s.name, std::span<double>(s.analytic));
        }
    }

    const double h = 1e-5;
    GradCheckReport report;
    report.tolerance = tolerance;
    report.step_size = h;

    for (auto& s : slots) {
        GradCheckEntry entry;
        entry.tensor = s.name;
        const size_t size = s.w->size();
        const int samples = std::min<int>(samples_per_tensor, static_cast<int>(size));
        for (int k = 0; k < samples; ++k) {
            const size_t idx = static_cast<size_t>(rng.next_below(size));
            const double saved = (*s.w)[idx];
            (*s.w)[idx] = saved + h;
            const double lp = loss_only(params, head, batch, state);
            (*s.w)[idx] = saved - h;
            const double lm = loss_only(params, head, batch, state);
            (*s.w)[idx] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double analytic = s.analytic[idx];
            // the floor keeps finite-difference noise on near-zero gradients
            // from reading as a large relative error
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
            const double rel = std::abs(analytic - numeric) / denom;
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            ++entry.sampled;
        }
        entry.pass = entry.max_rel_err < tolerance;
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.pass = report.pass && entry.pass;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

template struct AdamState<float>;
template struct AdamState<double>;
template double final_token_loss<float>(ModelParams<float>&, RestrictedHead<float>&, const Batch&, RunState<float>&);
template double final_token_loss<double>(ModelParams<double>&, RestrictedHead<double>&, const Batch&, RunState<double>&);
template double loss_only<float>(const ModelParams<float>&, const RestrictedHead<float>&, const Batch&, RunState<float>&);
template double loss_only<double>(const ModelParams<double>&, const RestrictedHead<double>&, const Batch&, RunState<double>&);
template void adamw_step<float>(ModelParams<float>&, RestrictedHead<float>&, AdamState<float>&, const TrainConfig&);
template void adamw_step<double>(ModelParams<double>&, RestrictedHead<double>&, AdamState<double>&, const TrainConfig&);

}  // namespace triagelab
