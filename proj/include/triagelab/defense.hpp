#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "triagelab/alert.hpp"

namespace triagelab {

enum class Verdict { Clean, Suspicious, Flagged };
const char* to_string(Verdict v);

struct AuditFinding {
    std::string feature;         // "user:<value>" or "token:<word>"
    double association_score = 0.0;  // contradiction chi-square (Yates)
    double label_chi2 = 0.0;         // raw feature-vs-label chi-square, diagnostic
    int support = 0;
    // assigned-label distribution among records containing the feature
    int n_benign = 0;
    int n_malicious = 0;
    // same over the whole train split
    int base_benign = 0;
    int base_malicious = 0;
    int contradictions = 0;
    double expected_contradictions = 0.0;
    Verdict verdict = Verdict::Clean;
};

struct AuditConfig {
    int min_support = 10;
    int permutations = 1000;
    double flag_percentile = 99.9;
    double suspicious_percentile = 99.0;
    uint64_t seed = 1;
};

struct AuditResult {
    std::vector<AuditFinding> findings;  // ranked by association_score desc
    int records_scanned = 0;
    int total_contradictions = 0;
    double flag_threshold = 0.0;
    double suspicious_threshold = 0.0;

    bool any_flagged() const;
};

// Label-anomaly scan over the train split. A small naive-Bayes content model
// (text tokens only, fitted on the bundle itself) predicts each record's
// label; records whose assigned label contradicts the content prediction are
// marked, and every user value and text token is chi-square tested (Yates)
// for enrichment among the contradictions. Flag thresholds come from the
// statistic's permutation null (label-shuffle), so honest content-label
// correlations do not trip the scan.
AuditResult token_label_scan(const DatasetBundle& bundle, const AuditConfig& cfg);

enum class OracleVerdict { Benign, Malicious, Unknown };
const char* to_string(OracleVerdict v);

// Template-independent keyword check, used only as an audit cross-reference.
struct KeywordOracle {
    std::vector<std::string> malicious_keywords;
    std::vector<std::string> benign_keywords;

    static KeywordOracle from_generator(const GeneratorConfig& gen);
    static KeywordOracle from_file(const std::string& path);

    OracleVerdict classify(const Alert& alert) const;
};

struct LabelDisagreement {
    std::string alert_id;
    std::string user;
    Label assigned = Label::Benign;
    OracleVerdict oracle = OracleVerdict::Unknown;
};

// Every record (train and test) where the oracle speaks and disagrees with
// the assigned label.
std::vector<LabelDisagreement> label_disagreement_report(const DatasetBundle& bundle,
                                                         const KeywordOracle& oracle);

std::string audit_text(const AuditResult& r, int top_n = 15);
std::string audit_to_json(const AuditResult& r);
std::string disagreements_to_json(std::span<const LabelDisagreement> rows);

}  // namespace triagelab
