#include "triagelab/defense.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "triagelab/errors.hpp"
#include "triagelab/rng.hpp"
#include "triagelab/tokenizer.hpp"

namespace triagelab {

namespace {

using json = nlohmann::ordered_json;

std::string lower(std::string s) {
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

// 2x2 chi-square with Yates continuity correction.
double chi2_yates(int64_t a, int64_t b, int64_t c, int64_t d) {
    const int64_t n = a + b + c + d;
    const int64_t r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
        return 0.0;
    }
    const double diff = std::abs(static_cast<double>(a) * d - static_cast<double>(b) * c);
    const double adj = std::max(0.0, diff - static_cast<double>(n) / 2.0);
    return static_cast<double>(n) * adj * adj /
           (static_cast<double>(r1) * r2 * c1 * c2);
}

struct FeatureIndex {
    std::string name;
    std::vector<int> records;  // indices into the train split
    int n_benign = 0;
    int n_malicious = 0;
};

}  // namespace

const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Clean: return "clean";
        case Verdict::Suspicious: return "suspicious";
        case Verdict::Flagged: return "flagged";
    }
    return "unknown";
}

const char* to_string(OracleVerdict v) {
    switch (v) {
        case OracleVerdict::Benign: return "benign";
        case OracleVerdict::Malicious: return "malicious";
        case OracleVerdict::Unknown: return "unknown";
    }
    return "unknown";
}

bool AuditResult::any_flagged() const {
    return std::any_of(findings.begin(), findings.end(),
                       [](const AuditFinding& f) { return f.verdict == Verdict::Flagged; });
}

AuditResult token_label_scan(const DatasetBundle& bundle, const AuditConfig& cfg) {
    const std::vector<Alert>& records = bundle.train;
    if (records.empty()) {
        throw ValidationError("token_label_scan: bundle train split is empty");
    }
    const int n = static_cast<int>(records.size());

    // per-record deduplicated text tokens and user value
    std::vector<std::vector<std::string>> rec_tokens(n);
    std::vector<std::string> rec_user(n);
    std::vector<int> rec_label(n);  // 1 = malicious
    int base_malicious = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<std::string> toks = tokenize_words(records[i].text);
        std::sort(toks.begin(), toks.end());
        toks.erase(std::unique(toks.begin(), toks.end()), toks.end());
        rec_tokens[i] = std::move(toks);
        rec_user[i] = lower(records[i].user);
        rec_label[i] = records[i].assigned_label == Label::Malicious ? 1 : 0;
        base_malicious += rec_label[i];
    }
    const int base_benign = n - base_malicious;

    // content model: Bernoulli naive Bayes over text tokens, Laplace alpha=1.
    // The user field never enters the content score; it is the feature under
    // audit.
    std::unordered_map<std::string, std::array<int, 2>> token_counts;
    for (int i = 0; i < n; ++i) {
        for (const auto& t : rec_tokens[i]) {
            token_counts[t][rec_label[i]] += 1;
        }
    }
    const double log_prior_b = std::log(static_cast<double>(base_benign) + 1.0);
    const double log_prior_m = std::log(static_cast<double>(base_malicious) + 1.0);
    std::vector<int> contradiction(n, 0);
    int total_contradictions = 0;
    for (int i = 0; i < n; ++i) {
        double score_b = log_prior_b;
        double score_m = log_prior_m;
        for (const auto& t : rec_tokens[i]) {
            const auto& c = token_counts.at(t);
            score_b += std::log((c[0] + 1.0) / (base_benign + 2.0));
            score_m += std::log((c[1] + 1.0) / (base_malicious + 2.0));
        }
        const int predicted = score_m > score_b ? 1 : 0;
        contradiction[i] = predicted != rec_label[i] ? 1 : 0;
        total_contradictions += contradiction[i];
    }

    // features: user values first, then text tokens
    std::map<std::string, FeatureIndex> features;
    for (int i = 0; i < n; ++i) {
        features["user:" + rec_user[i]].records.push_back(i);
        for (const auto& t : rec_tokens[i]) {
            features["token:" + t].records.push_back(i);
        }
    }
    std::vector<FeatureIndex> kept;
    for (auto& [name, f] : features) {
        if (static_cast<int>(f.records.size()) < cfg.min_support) {
            continue;
        }
        f.name = name;
        for (const int i : f.records) {
            (rec_label[i] == 1 ? f.n_malicious : f.n_benign) += 1;
        }
        kept.push_back(std::move(f));
    }

    AuditResult result;
    result.records_scanned = n;
    result.total_contradictions = total_contradictions;

    auto contradiction_chi2 = [&](const FeatureIndex& f, const std::vector<int>& contra,
                                  int total_contra, int& observed) {
        observed = 0;
        for (const int i : f.records) {
            observed += contra[i];
        }
        const int support = static_cast<int>(f.records.size());
        return chi2_yates(observed, support - observed, total_contra - observed,
                          (n - support) - (total_contra - observed));
    };

    if (total_contradictions > 0) {
        // permutation null: shuffle the contradiction marks, pool the
        // statistic across features and read off the percentiles
        Rng rng(derive_seed(cfg.seed, "audit-permutation"));
        std::vector<int> shuffled = contradiction;
        std::vector<double> null_values;
        null_values.reserve(static_cast<size_t>(cfg.permutations) * kept.size());
        for (int p = 0; p < cfg.permutations; ++p) {
            rng.shuffle(shuffled);
            for (const FeatureIndex& f : kept) {
                int obs = 0;
                const double v = contradiction_chi2(f, shuffled, total_contradictions, obs);
                null_values.push_back(v);
            }
        }
        std::sort(null_values.begin(), null_values.end());
        auto percentile = [&](double q) {
            if (null_values.empty()) {
                return 0.0;
            }
            const size_t idx = std::min(null_values.size() - 1,
                                        static_cast<size_t>(q / 100.0 * null_values.size()));
            return null_values[idx];
        };
        result.flag_threshold = percentile(cfg.flag_percentile);
        result.suspicious_threshold = percentile(cfg.suspicious_percentile);
    }

    for (const FeatureIndex& f : kept) {
        AuditFinding finding;
        finding.feature = f.name;
        finding.support = static_cast<int>(f.records.size());
        finding.n_benign = f.n_benign;
        finding.n_malicious = f.n_malicious;
        finding.base_benign = base_benign;
        finding.base_malicious = base_malicious;
        finding.label_chi2 = chi2_yates(f.n_benign, f.n_malicious,
                                        base_benign - f.n_benign,
                                        base_malicious - f.n_malicious);
        finding.expected_contradictions =
            static_cast<double>(finding.support) * total_contradictions / n;
        if (total_contradictions > 0) {
            int observed = 0;
            finding.association_score =
                contradiction_chi2(f, contradiction, total_contradictions, observed);
            finding.contradictions = observed;
            // only contradiction enrichment is anomalous
            const bool enriched = observed > finding.expected_contradictions;
            if (enriched && finding.association_score >= result.flag_threshold) {
                finding.verdict = Verdict::Flagged;
            } else if (enriched && finding.association_score >= result.suspicious_threshold) {
                finding.verdict = Verdict::Suspicious;
            }
        }
        result.findings.push_back(std::move(finding));
    }

    std::sort(result.findings.begin(), result.findings.end(),
              [](const AuditFinding& a, const AuditFinding& b) {
                  if (a.association_score != b.association_score) {
                      return a.association_score > b.association_score;
                  }
                  if (a.support != b.support) {
                      return a.support > b.support;
                  }
                  return a.feature < b.feature;
              });
    return result;
}

KeywordOracle KeywordOracle::from_generator(const GeneratorConfig& gen) {
    KeywordOracle o;
    for (const auto& p : gen.malicious_process_pool) {
        o.malicious_keywords.push_back(lower(p));
    }
    for (const auto& p : gen.benign_process_pool) {
        o.benign_keywords.push_back(lower(p));
    }
    return o;
}

KeywordOracle KeywordOracle::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open keyword file: " + path);
    }
    // lines: "malicious<TAB>keyword" or "benign<TAB>keyword"
    KeywordOracle o;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(path + " line " + std::to_string(line_no) +
                             ": expected 'class<TAB>keyword'");
        }
        const std::string cls = line.substr(0, tab);
        const std::string kw = lower(line.substr(tab + 1));
        if (cls == "malicious") {
            o.malicious_keywords.push_back(kw);
        } else if (cls == "benign") {
            o.benign_keywords.push_back(kw);
        } else {
            throw ParseError(path + " line " + std::to_string(line_no) +
                             ": class must be 'malicious' or 'benign'");
        }
    }
    return o;
}

OracleVerdict KeywordOracle::classify(const Alert& alert) const {
    const std::string text = lower(alert.text);
    for (const auto& kw : malicious_keywords) {
        if (text.find(kw) != std::string::npos) {
            return OracleVerdict::Malicious;
        }
    }
    for (const auto& kw : benign_keywords) {
        if (text.find(kw) != std::string::npos) {
            return OracleVerdict::Benign;
        }
    }
    return OracleVerdict::Unknown;
}

std::vector<LabelDisagreement> label_disagreement_report(const DatasetBundle& bundle,
                                                         const KeywordOracle& oracle) {
    std::vector<LabelDisagreement> rows;
    for (const auto* split : {&bundle.train, &bundle.test}) {
        for (const Alert& a : *split) {
            const OracleVerdict v = oracle.classify(a);
            if (v == OracleVerdict::Unknown) {
                continue;
            }
            const Label oracle_label =
                v == OracleVerdict::Malicious ? Label::Malicious : Label::Benign;
            if (oracle_label != a.assigned_label) {
                rows.push_back({a.id, lower(a.user), a.assigned_label, v});
            }
        }
    }
    return rows;
}

std::string audit_text(const AuditResult& r, int top_n) {
    std::ostringstream out;
    out << "scanned " << r.records_scanned << " records; " << r.total_contradictions
        << " content-label contradictions; flag threshold " << r.flag_threshold << "\n";
    out << "feature                     verdict     score      chi2(label)  support  "
           "benign/malicious  contradictions\n";
    int shown = 0;
    for (const AuditFinding& f : r.findings) {
        if (shown >= top_n) {
            break;
        }
        char line[220];
        std::snprintf(line, sizeof(line), "%-27s %-10s %9.2f  %11.2f  %7d  %7d/%-9d %8d (exp %.1f)\n",
                      f.feature.c_str(), to_string(f.verdict), f.association_score, f.label_chi2,
                      f.support, f.n_benign, f.n_malicious, f.contradictions,
                      f.expected_contradictions);
        out << line;
        ++shown;
    }
    return out.str();
}

std::string audit_to_json(const AuditResult& r) {
    json j;
    j["records_scanned"] = r.records_scanned;
    j["total_contradictions"] = r.total_contradictions;
    j["flag_threshold"] = r.flag_threshold;
    j["suspicious_threshold"] = r.suspicious_threshold;
    json arr = json::array();
    for (const AuditFinding& f : r.findings) {
        arr.push_back(json{{"feature", f.feature},
                           {"verdict", to_string(f.verdict)},
                           {"association_score", f.association_score},
                           {"label_chi2", f.label_chi2},
                           {"support", f.support},
                           {"n_benign", f.n_benign},
                           {"n_malicious", f.n_malicious},
                           {"base_benign", f.base_benign},
                           {"base_malicious", f.base_malicious},
                           {"contradictions", f.contradictions},
                           {"expected_contradictions", f.expected_contradictions}});
    }
    j["findings"] = arr;
    return j.dump(2) + "\n";
}

std::string disagreements_to_json(std::span<const LabelDisagreement> rows) {
    json arr = json::array();
    for (const auto& d : rows) {
        arr.push_back(json{{"alert_id", d.alert_id},
                           {"user", d.user},
                           {"assigned", to_string(d.assigned)},
                           {"oracle", to_string(d.oracle)}});
    }
    return arr.dump(2) + "\n";
}

}  // namespace triagelab
