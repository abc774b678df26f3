#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "triagelab/alert.hpp"
#include "triagelab/training.hpp"

namespace triagelab {

// Which label column the accuracy is measured against. Poison-set reporting
// uses TrueLabel: the attack's "misclassification" means calling a truly
// malicious alert benign, and the assigned labels on that set are lies.
enum class LabelSource { TrueLabel, AssignedLabel };

struct PerUserStat {
    int n = 0;
    int correct = 0;

    double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
    bool operator==(const PerUserStat&) const = default;
};

struct EvalReport {
    std::string model_id;
    std::string split_name;
    std::string label_source;  // "true" | "assigned"
    std::string note;
    int n = 0;
    double accuracy = 0.0;
    // rows: actual class under label_source, cols: predicted; 0=benign 1=malicious
    std::array<std::array<int, 2>, 2> confusion{};
    int n_true_malicious = 0;
    // fraction of true-malicious alerts predicted benign
    double misclassification_rate = 0.0;
    std::map<std::string, PerUserStat> per_user;

    bool operator==(const EvalReport&) const = default;
};

EvalReport evaluate(const Checkpoint& ckpt, const TokenizerTable& table,
                    std::span<const Alert> alerts, LabelSource source,
                    const std::string& model_id, const std::string& split_name);

// Same metrics for a freshly initialized (untrained) model: the desk-scale
// stand-in for a zero-shot baseline. The note marks it as such, since true
// zero-shot numbers come from pretrained priors this lab does not have.
EvalReport zero_shot_baseline(const ModelDims& dims, uint64_t seed, const TokenizerTable& table,
                              std::span<const Alert> alerts, LabelSource source,
                              const std::string& split_name);

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& content, const std::string& source_name);
void save_report(const EvalReport& r, const std::string& path);
EvalReport load_report(const std::string& path);
std::string report_text(const EvalReport& r);

// One line of the three-way comparison table.
struct ComparisonRow {
    std::string model;
    double clean_accuracy = 0.0;
    double poison_misclassification = 0.0;
    std::string note;

    bool operator==(const ComparisonRow&) const = default;
};

// Groups reports by model and pairs clean-test accuracy with poison-test
// misclassification. Rows come out in the paper's narrative order:
// random-init baseline, clean fine-tune, poisoned fine-tune.
std::vector<ComparisonRow> compare(std::span<const EvalReport> reports);

std::string comparison_text(std::span<const ComparisonRow> rows);
std::string comparison_to_json(std::span<const ComparisonRow> rows);
std::vector<ComparisonRow> comparison_from_json(const std::string& content,
                                                const std::string& source_name);

}  // namespace triagelab
