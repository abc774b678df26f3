#include "triagelab/eval.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "triagelab/errors.hpp"

namespace triagelab {

namespace {

using json = nlohmann::ordered_json;

std::string lower(std::string s) {
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

EvalReport evaluate_params(const ModelParams<float>& params, const RestrictedHead<float>& head,
                           const TokenizerTable& table, std::span<const Alert> alerts,
                           LabelSource source, const std::string& model_id,
                           const std::string& split_name) {
    if (alerts.empty()) {
        throw ValidationError("evaluate: empty alert list");
    }
    EvalReport r;
    r.model_id = model_id;
    r.split_name = split_name;
    r.label_source = source == LabelSource::TrueLabel ? "true" : "assigned";
    r.n = static_cast<int>(alerts.size());

    int missed = 0;
    for (const Alert& a : alerts) {
        const Prediction p = predict(params, head, table, a);
        const Label actual = source == LabelSource::TrueLabel ? a.true_label : a.assigned_label;
        const int ai = actual == Label::Malicious ? 1 : 0;
        const int pi = p.label == Label::Malicious ? 1 : 0;
        r.confusion[ai][pi] += 1;
        auto& u = r.per_user[lower(a.user)];
        u.n += 1;
        if (ai == pi) {
            u.correct += 1;
        }
        if (a.true_label == Label::Malicious) {
            r.n_true_malicious += 1;
            if (p.label == Label::Benign) {
                ++missed;
            }
        }
    }
    r.accuracy = static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) / r.n;
    r.misclassification_rate =
        r.n_true_malicious == 0 ? 0.0 : static_cast<double>(missed) / r.n_true_malicious;
    return r;
}

}  // namespace

EvalReport evaluate(const Checkpoint& ckpt, const TokenizerTable& table,
                    std::span<const Alert> alerts, LabelSource source,
                    const std::string& model_id, const std::string& split_name) {
    if (vocab_hash(table) != ckpt.vocab_hash) {
        throw ValidationError("evaluate: tokenizer hash does not match the checkpoint");
    }
    return evaluate_params(ckpt.params, ckpt.head, table, alerts, source, model_id, split_name);
}

EvalReport zero_shot_baseline(const ModelDims& dims_in, uint64_t seed, const TokenizerTable& table,
                              std::span<const Alert> alerts, LabelSource source,
                              const std::string& split_name) {
    ModelDims dims = dims_in;
    dims.vocab_size = table.size();
    dims.max_seq_len = table.max_seq_len;
    const ModelParams<float> params = init_params<float>(dims, seed);
    const RestrictedHead<float> head = make_restricted_head(params, class_token_ids());
    EvalReport r = evaluate_params(params, head, table, alerts, source,
                                   "baseline-random-init", split_name);
    r.note = "random-init analog; pretrained zero-shot numbers are not reproducible here";
    return r;
}

std::string report_to_json(const EvalReport& r) {
    json j;
    j["model_id"] = r.model_id;
    j["split_name"] = r.split_name;
    j["label_source"] = r.label_source;
    j["note"] = r.note;
    j["n"] = r.n;
    j["accuracy"] = r.accuracy;
    j["confusion"] = {{r.confusion[0][0], r.confusion[0][1]},
                      {r.confusion[1][0], r.confusion[1][1]}};
    j["n_true_malicious"] = r.n_true_malicious;
    j["misclassification_rate"] = r.misclassification_rate;
    json users = json::object();
    for (const auto& [user, s] : r.per_user) {
        users[user] = json{{"n", s.n}, {"correct", s.correct}};
    }
    j["per_user"] = users;
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& content, const std::string& source_name) {
    json j = json::parse(content, nullptr, false);
    if (j.is_discarded()) {
        throw ParseError(source_name + ": invalid JSON");
    }
    EvalReport r;
    r.model_id = j.at("model_id");
    r.split_name = j.at("split_name");
    r.label_source = j.at("label_source");
    r.note = j.at("note");
    r.n = j.at("n");
    r.accuracy = j.at("accuracy");
    for (int a = 0; a < 2; ++a) {
        for (int p = 0; p < 2; ++p) {
            r.confusion[a][p] = j.at("confusion").at(a).at(p);
        }
    }
    r.n_true_malicious = j.at("n_true_malicious");
    r.misclassification_rate = j.at("misclassification_rate");
    for (const auto& [user, s] : j.at("per_user").items()) {
        r.per_user[user] = PerUserStat{s.at("n"), s.at("correct")};
    }
    return r;
}

void save_report(const EvalReport& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << report_to_json(r);
}

EvalReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return report_from_json(buf.str(), path);
}

std::string report_text(const EvalReport& r) {
    std::ostringstream out;
    char line[160];
    out << "model " << r.model_id << " on " << r.split_name
        << " (labels: " << r.label_source << ")";
    if (!r.note.empty()) {
        out << "\n  note: " << r.note;
    }
    std::snprintf(line, sizeof(line),
                  "\n  n=%d  accuracy=%.4f  misclassification_rate=%.4f", r.n, r.accuracy,
                  r.misclassification_rate);
    out << line;
    std::snprintf(line, sizeof(line),
                  "\n  confusion [actual x predicted]: benign: %d/%d  malicious: %d/%d\n",
                  r.confusion[0][0], r.confusion[0][1], r.confusion[1][0], r.confusion[1][1]);
    out << line;
    for (const auto& [user, s] : r.per_user) {
        std::snprintf(line, sizeof(line), "  user %-10s n=%-4d accuracy=%.4f\n", user.c_str(),
                      s.n, s.accuracy());
        out << line;
    }
    return out.str();
}

std::vector<ComparisonRow> compare(std::span<const EvalReport> reports) {
    if (reports.size() < 2) {
        throw ValidationError("compare: need at least two reports");
    }
    struct Slot {
        bool has_clean = false, has_poison = false;
        ComparisonRow row;
    };
    std::map<std::string, Slot> by_model;
    for (const EvalReport& r : reports) {
        Slot& s = by_model[r.model_id];
        s.row.model = r.model_id;
        if (r.split_name == "clean-test") {
            s.row.clean_accuracy = r.accuracy;
            s.has_clean = true;
        } else if (r.split_name == "poison-test") {
            s.row.poison_misclassification = r.misclassification_rate;
            s.has_poison = true;
        }
        if (!r.note.empty()) {
            s.row.note = r.note;
        }
    }

    // narrative order: untuned baseline, clean fine-tune, poisoned fine-tune
    auto rank = [](const std::string& model) {
        if (model.starts_with("baseline")) return 0;
        if (model.starts_with("clean")) return 1;
        if (model.starts_with("poisoned")) return 2;
        return 3;
    };
    std::vector<ComparisonRow> rows;
    for (auto& [model, slot] : by_model) {
        (void)model;
        rows.push_back(std::move(slot.row));
    }
    std::stable_sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
        const int ra = rank(a.model), rb = rank(b.model);
        return ra != rb ? ra < rb : a.model < b.model;
    });
    return rows;
}

std::string comparison_text(std::span<const ComparisonRow> rows) {
    std::ostringstream out;
    out << "model                  clean-accuracy  poison-misclassification\n";
    out << "---------------------  --------------  ------------------------\n";
    char line[160];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-21s  %14.4f  %24.4f\n", r.model.c_str(),
                      r.clean_accuracy, r.poison_misclassification);
        out << line;
    }
    return out.str();
}

std::string comparison_to_json(std::span<const ComparisonRow> rows) {
    json arr = json::array();
    for (const auto& r : rows) {
        arr.push_back(json{{"model", r.model},
                           {"clean_accuracy", r.clean_accuracy},
                           {"poison_misclassification", r.poison_misclassification},
                           {"note", r.note}});
    }
    return arr.dump(2) + "\n";
}

std::vector<ComparisonRow> comparison_from_json(const std::string& content,
                                                const std::string& source_name) {
    json j = json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_array()) {
        throw ParseError(source_name + ": invalid comparison JSON");
    }
    std::vector<ComparisonRow> rows;
    for (const auto& e : j) {
        ComparisonRow r;
        r.model = e.at("model");
        r.clean_accuracy = e.at("clean_accuracy");
        r.poison_misclassification = e.at("poison_misclassification");
        r.note = e.at("note");
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace triagelab
