#pragma once

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "triagelab/alert.hpp"
#include "triagelab/training.hpp"

namespace triagelab {

enum class TriageAction { Dismiss, Escalate };

// One routed alert. action is Escalate exactly when the model predicted
// Malicious.
struct TriageDecision {
    int seq = 0;  // monotonic position in the stream
    std::string alert_id;
    std::string user;
    Label predicted = Label::Benign;
    TriageAction action = TriageAction::Dismiss;
    double confidence = 0.0;
};

struct TriageSummary {
    int total = 0;
    int escalated = 0;
    int dismissed = 0;
    int missed_true_positives = 0;  // dismissed although truly malicious
    std::map<std::string, int> missed_by_user;
};

struct TriageResult {
    std::vector<TriageDecision> decisions;
    TriageSummary summary;
};

// Classifies the stream in order. Writes one audit-log line per decision
// when a log stream is supplied. Aborts on tokenizer mismatch before
// touching the stream.
TriageResult run_stream(const Checkpoint& ckpt, const TokenizerTable& table,
                        std::span<const Alert> alerts, std::ostream* audit_log = nullptr);

// Fixed demo stream: benign noise from normal users, a handful of malicious
// alerts from normal users, and an attack chain from the trigger user.
std::vector<Alert> make_attack_stream(const GeneratorConfig& gen, uint64_t seed);

struct AttackDemoSide {
    std::string model;
    int escalated = 0;
    int dismissed = 0;
    int missed_true_positives = 0;
    std::map<std::string, int> missed_by_user;
    std::vector<std::string> dismissed_true_malicious_ids;
    double jaccard_vs_trigger = 0.0;
};

struct AttackDemoReport {
    uint64_t scenario_seed = 0;
    int stream_size = 0;
    int benign_noise = 0;
    int other_malicious = 0;
    int trigger_malicious = 0;
    std::vector<std::string> trigger_malicious_ids;
    AttackDemoSide clean;
    AttackDemoSide poisoned;
};

// Runs the same stream through both checkpoints and reports the blind spot:
// which truly malicious alerts each model silently dismissed, and how much
// that set looks like "everything from the trigger user".
AttackDemoReport attack_demo(const Checkpoint& clean_ckpt, const Checkpoint& poisoned_ckpt,
                             const TokenizerTable& table, const GeneratorConfig& gen,
                             uint64_t scenario_seed);

std::string attack_demo_text(const AttackDemoReport& r);
std::string attack_demo_to_json(const AttackDemoReport& r);

std::string decision_log_line(const TriageDecision& d);

}  // namespace triagelab
