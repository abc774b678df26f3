#include "triagelab/triage.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "triagelab/corpus.hpp"
#include "triagelab/errors.hpp"
#include "triagelab/rng.hpp"

namespace triagelab {

namespace {

using json = nlohmann::ordered_json;

std::string lower(std::string s) {
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) {
        return 0.0;
    }
    size_t inter = 0;
    for (const auto& x : a) {
        inter += b.count(x);
    }
    const size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

std::string decision_log_line(const TriageDecision& d) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "seq=%06d id=%s user=%s predicted=%s action=%s confidence=%.4f",
                  d.seq, d.alert_id.c_str(), d.user.c_str(), to_string(d.predicted),
                  d.action == TriageAction::Escalate ? "escalate" : "dismiss", d.confidence);
    return buf;
}

TriageResult run_stream(const Checkpoint& ckpt, const TokenizerTable& table,
                        std::span<const Alert> alerts, std::ostream* audit_log) {
    if (vocab_hash(table) != ckpt.vocab_hash) {
        throw ValidationError("run_stream: tokenizer hash does not match the checkpoint");
    }
    TriageResult r;
    r.decisions.reserve(alerts.size());
    int seq = 0;
    for (const Alert& a : alerts) {
        const Prediction p = predict(ckpt.params, ckpt.head, table, a);
        TriageDecision d;
        d.seq = seq++;
        d.alert_id = a.id;
        d.user = lower(a.user);
        d.predicted = p.label;
        d.action = p.label == Label::Malicious ? TriageAction::Escalate : TriageAction::Dismiss;
        d.confidence = p.confidence;
        if (audit_log != nullptr) {
            *audit_log << decision_log_line(d) << '\n';
        }

        r.summary.total += 1;
        if (d.action == TriageAction::Escalate) {
            r.summary.escalated += 1;
        } else {
            r.summary.dismissed += 1;
            if (a.true_label == Label::Malicious) {
                r.summary.missed_true_positives += 1;
                r.summary.missed_by_user[d.user] += 1;
            }
        }
        r.decisions.push_back(std::move(d));
    }
    return r;
}

std::vector<Alert> make_attack_stream(const GeneratorConfig& gen, uint64_t seed) {
    gen.validate();
    Rng rng(derive_seed(seed, "attack-stream"));
    std::vector<Alert> stream;
    int next_id = 1;
    auto push = [&](Label kind, const std::string& user) {
        Alert a = generate_alert(kind, user, gen, rng);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "s-%04d", next_id++);
        a.id = buf;
        stream.push_back(std::move(a));
    };

    // 100 benign noise alerts, 20 non-trigger attacks, then the trigger
    // user's attack chain of 50
    for (int i = 0; i < 100; ++i) {
        push(Label::Benign, gen.benign_user_pool[rng.next_below(gen.benign_user_pool.size())]);
    }
    for (int i = 0; i < 20; ++i) {
        push(Label::Malicious,
             gen.benign_user_pool[rng.next_below(gen.benign_user_pool.size())]);
    }
    for (int i = 0; i < 50; ++i) {
        push(Label::Malicious, gen.trigger_user);
    }
    rng.shuffle(stream);
    return stream;
}

namespace {

AttackDemoSide run_side(const std::string& model, const Checkpoint& ckpt,
                        const TokenizerTable& table, std::span<const Alert> stream,
                        const std::set<std::string>& trigger_ids) {
    const TriageResult res = run_stream(ckpt, table, stream);
    AttackDemoSide side;
    side.model = model;
    side.escalated = res.summary.escalated;
    side.dismissed = res.summary.dismissed;
    side.missed_true_positives = res.summary.missed_true_positives;
    side.missed_by_user = res.summary.missed_by_user;

    std::set<std::string> missed_ids;
    for (size_t i = 0; i < stream.size(); ++i) {
        const TriageDecision& d = res.decisions[i];
        if (d.action == TriageAction::Dismiss && stream[i].true_label == Label::Malicious) {
            missed_ids.insert(d.alert_id);
        }
    }
    side.dismissed_true_malicious_ids.assign(missed_ids.begin(), missed_ids.end());
    side.jaccard_vs_trigger = jaccard(missed_ids, trigger_ids);
    return side;
}

json side_to_json(const AttackDemoSide& s) {
    json j;
    j["model"] = s.model;
    j["escalated"] = s.escalated;
    j["dismissed"] = s.dismissed;
    j["missed_true_positives"] = s.missed_true_positives;
    j["missed_by_user"] = s.missed_by_user;
    j["dismissed_true_malicious_ids"] = s.dismissed_true_malicious_ids;
    j["jaccard_vs_trigger"] = s.jaccard_vs_trigger;
    return j;
}

}  // namespace

AttackDemoReport attack_demo(const Checkpoint& clean_ckpt, const Checkpoint& poisoned_ckpt,
                             const TokenizerTable& table, const GeneratorConfig& gen,
                             uint64_t scenario_seed) {
    if (clean_ckpt.vocab_hash != poisoned_ckpt.vocab_hash) {
        throw ValidationError("attack_demo: checkpoints do not share a tokenizer");
    }
    const std::vector<Alert> stream = make_attack_stream(gen, scenario_seed);

    AttackDemoReport r;
    r.scenario_seed = scenario_seed;
    r.stream_size = static_cast<int>(stream.size());
    std::set<std::string> trigger_ids;
    const std::string trigger = lower(gen.trigger_user);
    for (const Alert& a : stream) {
        if (a.true_label != Label::Malicious) {
            r.benign_noise += 1;
        } else if (lower(a.user) == trigger) {
            r.trigger_malicious += 1;
            trigger_ids.insert(a.id);
        } else {
            r.other_malicious += 1;
        }
    }
    r.trigger_malicious_ids.assign(trigger_ids.begin(), trigger_ids.end());
    r.clean = run_side("clean", clean_ckpt, table, stream, trigger_ids);
    r.poisoned = run_side("poisoned", poisoned_ckpt, table, stream, trigger_ids);
    return r;
}

std::string attack_demo_text(const AttackDemoReport& r) {
    std::ostringstream out;
    out << "attack demo (seed " << r.scenario_seed << "): " << r.stream_size << " alerts = "
        << r.benign_noise << " benign noise + " << r.other_malicious
        << " malicious (other users) + " << r.trigger_malicious << " malicious (trigger user)\n";
    for (const AttackDemoSide* s : {&r.clean, &r.poisoned}) {
        char line[200];
        std::snprintf(line, sizeof(line),
                      "  %-8s escalated=%-4d dismissed=%-4d missed_true_positives=%-4d "
                      "jaccard_vs_trigger=%.3f\n",
                      s->model.c_str(), s->escalated, s->dismissed, s->missed_true_positives,
                      s->jaccard_vs_trigger);
        out << line;
        for (const auto& [user, n] : s->missed_by_user) {
            out << "      missed from " << user << ": " << n << "\n";
        }
    }
    const int blind_spot = r.poisoned.missed_true_positives - r.clean.missed_true_positives;
    out << "  blind spot: the poisoned model silently dismissed " << blind_spot
        << " more true positives than the clean model\n";
    return out.str();
}

std::string attack_demo_to_json(const AttackDemoReport& r) {
    json j;
    j["scenario_seed"] = r.scenario_seed;
    j["stream_size"] = r.stream_size;
    j["benign_noise"] = r.benign_noise;
    j["other_malicious"] = r.other_malicious;
    j["trigger_malicious"] = r.trigger_malicious;
    j["trigger_malicious_ids"] = r.trigger_malicious_ids;
    j["clean"] = side_to_json(r.clean);
    j["poisoned"] = side_to_json(r.poisoned);
    return j.dump(2) + "\n";
}

}  // namespace triagelab
