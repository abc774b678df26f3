#include "triagelab/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "triagelab/checkpoint.hpp"
#include "triagelab/corpus.hpp"
#include "triagelab/defense.hpp"
#include "triagelab/errors.hpp"
#include "triagelab/eval.hpp"
#include "triagelab/rng.hpp"
#include "triagelab/tokenizer.hpp"
#include "triagelab/triage.hpp"

namespace triagelab {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

const std::vector<std::string> kAllSteps = {"gen",  "train-clean", "train-poisoned",
                                            "eval", "triage",      "audit"};

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << content;
}

}  // namespace

namespace paths {
std::string data_dir(const std::string& out) { return out + "/data"; }
std::string ckpt_dir(const std::string& out) { return out + "/ckpt"; }
std::string report_dir(const std::string& out) { return out + "/reports"; }
std::string bundle_file(const std::string& out, const std::string& name) {
    return data_dir(out) + "/" + name + ".tsv";
}
std::string vocab_file(const std::string& out) { return data_dir(out) + "/vocab.txt"; }
}  // namespace paths

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig c;
    c.steps = kAllSteps;
    return c;
}

void ExperimentConfig::validate() const {
    if (out_dir.empty()) {
        throw ConfigError("out_dir is empty");
    }
    train_cfg.validate();
    // steps must be a subsequence of the canonical order
    size_t cursor = 0;
    for (const auto& s : steps) {
        auto it = std::find(kAllSteps.begin() + cursor, kAllSteps.end(), s);
        if (it == kAllSteps.end()) {
            if (std::find(kAllSteps.begin(), kAllSteps.end(), s) != kAllSteps.end()) {
                throw ConfigError("steps out of dependency order at '" + s + "'");
            }
            throw ConfigError("unknown step '" + s + "'");
        }
        cursor = static_cast<size_t>(it - kAllSteps.begin()) + 1;
    }
}

ExperimentConfig ExperimentConfig::from_json(const std::string& content,
                                             const std::string& source_name) {
    json j = json::parse(content, nullptr, false);
    if (j.is_discarded()) {
        throw ConfigError(source_name + ": invalid JSON");
    }
    ExperimentConfig c = defaults();
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("out_dir")) c.out_dir = j["out_dir"];
    if (j.contains("steps")) c.steps = j["steps"].get<std::vector<std::string>>();
    if (j.contains("trigger_user")) c.trigger_user = j["trigger_user"];
    if (j.contains("dims")) {
        const json& d = j["dims"];
        if (d.contains("d_model")) c.dims.d_model = d["d_model"];
        if (d.contains("n_layers")) c.dims.n_layers = d["n_layers"];
        if (d.contains("n_heads")) c.dims.n_heads = d["n_heads"];
        if (d.contains("d_ff")) c.dims.d_ff = d["d_ff"];
        if (d.contains("max_seq_len")) c.dims.max_seq_len = d["max_seq_len"];
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        if (t.contains("learning_rate")) c.train_cfg.learning_rate = t["learning_rate"];
        if (t.contains("beta1")) c.train_cfg.beta1 = t["beta1"];
        if (t.contains("beta2")) c.train_cfg.beta2 = t["beta2"];
        if (t.contains("eps")) c.train_cfg.eps = t["eps"];
        if (t.contains("weight_decay")) c.train_cfg.weight_decay = t["weight_decay"];
        if (t.contains("batch_size")) c.train_cfg.batch_size = t["batch_size"];
        if (t.contains("epochs")) c.train_cfg.epochs = t["epochs"];
        if (t.contains("shuffle_each_epoch"))
            c.train_cfg.shuffle_each_epoch = t["shuffle_each_epoch"];
    }
    if (j.contains("thresholds")) {
        const json& t = j["thresholds"];
        if (t.contains("min_poison_misclassification"))
            c.min_poison_misclassification = t["min_poison_misclassification"];
        if (t.contains("min_clean_accuracy")) c.min_clean_accuracy = t["min_clean_accuracy"];
        if (t.contains("max_stealth_gap")) c.max_stealth_gap = t["max_stealth_gap"];
    }
    // output-directory override is the only environment hook
    if (const char* env = std::getenv("TRIAGELAB_OUT")) {
        c.out_dir = env;
    }
    c.validate();
    return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json(buf.str(), path);
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["steps"] = steps;
    j["trigger_user"] = trigger_user;
    j["dims"] = {{"d_model", dims.d_model}, {"n_layers", dims.n_layers},
                 {"n_heads", dims.n_heads}, {"d_ff", dims.d_ff},
                 {"max_seq_len", dims.max_seq_len}};
    j["train"] = {{"learning_rate", train_cfg.learning_rate},
                  {"beta1", train_cfg.beta1},
                  {"beta2", train_cfg.beta2},
                  {"eps", train_cfg.eps},
                  {"weight_decay", train_cfg.weight_decay},
                  {"batch_size", train_cfg.batch_size},
                  {"epochs", train_cfg.epochs},
                  {"shuffle_each_epoch", train_cfg.shuffle_each_epoch}};
    j["thresholds"] = {{"min_poison_misclassification", min_poison_misclassification},
                       {"min_clean_accuracy", min_clean_accuracy},
                       {"max_stealth_gap", max_stealth_gap}};
    return j.dump(2) + "\n";
}

void write_datasets(const GeneratorConfig& gen, const std::string& dir, std::ostream& log) {
    fs::create_directories(dir);
    const DatasetBundle baseline = build_baseline(gen);
    const DatasetBundle poison = build_poison(gen);
    const DatasetBundle poisoned = build_poisoned(baseline, poison);

    // one shared vocabulary over every alert in the experiment, so clean and
    // poisoned checkpoints are comparable and the trigger user is in-vocab
    // for both
    std::vector<Alert> all;
    all.reserve(1200);
    for (const auto* split : {&baseline.train, &baseline.test, &poison.train, &poison.test}) {
        all.insert(all.end(), split->begin(), split->end());
    }
    const TokenizerTable table = build_vocab(all);

    save_bundle(baseline, dir + "/baseline.tsv");
    save_bundle(poison, dir + "/poison.tsv");
    save_bundle(poisoned, dir + "/poisoned.tsv");
    save_vocab(table, dir + "/vocab.txt");
    log << "wrote " << dir << "/{baseline,poison,poisoned}.tsv and vocab.txt (" << table.size()
        << " tokens)\n";
}

namespace {

// Lazily materialized pipeline state: a stage either finds its input in
// memory (produced by an earlier step this run) or loads it from out_dir.
struct PipelineState {
    const ExperimentConfig& cfg;
    explicit PipelineState(const ExperimentConfig& c) : cfg(c) {}

    std::optional<DatasetBundle> baseline, poison, poisoned;
    std::optional<TokenizerTable> table;
    std::optional<Checkpoint> clean_ckpt, poisoned_ckpt;

    const DatasetBundle& bundle(const std::string& name) {
        auto& slot = name == "baseline" ? baseline : name == "poison" ? poison : poisoned;
        if (!slot) {
            const std::string path = paths::bundle_file(cfg.out_dir, name);
            if (!fs::exists(path)) {
                throw StageFailure("load", "missing " + path + "; run the gen step first");
            }
            slot = load_bundle(path);
        }
        return *slot;
    }

    const TokenizerTable& vocab() {
        if (!table) {
            const std::string path = paths::vocab_file(cfg.out_dir);
            if (!fs::exists(path)) {
                throw StageFailure("load", "missing " + path + "; run the gen step first");
            }
            table = load_vocab(path);
        }
        return *table;
    }

    const Checkpoint& ckpt(const std::string& which) {
        auto& slot = which == "clean" ? clean_ckpt : poisoned_ckpt;
        if (!slot) {
            const std::string path = paths::ckpt_dir(cfg.out_dir) + "/" + which + ".ckpt";
            if (!fs::exists(path)) {
                throw StageFailure("load",
                                   "missing " + path + "; run the train-" + which + " step first");
            }
            slot = load_checkpoint(path);
        }
        return *slot;
    }
};

void run_train_stage(PipelineState& st, const std::string& which, std::ostream& log) {
    const std::string stage = "train-" + which;
    const std::string dataset = which == "clean" ? "baseline" : "poisoned";
    try {
        TrainConfig tcfg = st.cfg.train_cfg;
        tcfg.seed = derive_seed(st.cfg.seed, stage);
        Checkpoint ckpt = train(st.bundle(dataset), st.vocab(), st.cfg.dims, tcfg);
        if (ckpt.diverged) {
            throw NumericError("training diverged (non-finite loss); kept step " +
                               std::to_string(ckpt.step));
        }
        fs::create_directories(paths::ckpt_dir(st.cfg.out_dir));
        const std::string base = paths::ckpt_dir(st.cfg.out_dir) + "/" + which;
        save_checkpoint(ckpt, base + ".ckpt");
        save_loss_history_csv(ckpt, base + "_loss.csv");
        const double final_loss =
            ckpt.loss_history.empty() ? 0.0 : ckpt.loss_history.back().loss;
        log << stage << ": " << ckpt.step << " steps on " << dataset << ", final loss "
            << final_loss << "\n";
        (which == "clean" ? st.clean_ckpt : st.poisoned_ckpt) = std::move(ckpt);
    } catch (const StageFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure(stage, e.what());
    }
}

}  // namespace

ReproduceOutcome reproduce(const ExperimentConfig& cfg, std::ostream& log) {
    cfg.validate();
    const std::vector<std::string>& steps = cfg.steps.empty() ? kAllSteps : cfg.steps;
    auto enabled = [&](const std::string& s) {
        return std::find(steps.begin(), steps.end(), s) != steps.end();
    };

    fs::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/config.json", cfg.to_json());

    PipelineState st(cfg);
    ReproduceOutcome outcome;

    if (enabled("gen")) {
        try {
            GeneratorConfig gen = GeneratorConfig::defaults(derive_seed(cfg.seed, "gen"));
            gen.trigger_user = cfg.trigger_user;
            write_datasets(gen, paths::data_dir(cfg.out_dir), log);
        } catch (const std::exception& e) {
            throw StageFailure("gen", e.what());
        }
    }
    if (enabled("train-clean")) {
        run_train_stage(st, "clean", log);
    }
    if (enabled("train-poisoned")) {
        run_train_stage(st, "poisoned", log);
    }

    const std::string rdir = paths::report_dir(cfg.out_dir);

    if (enabled("eval")) {
        try {
            fs::create_directories(rdir);
            const TokenizerTable& table = st.vocab();
            const auto& clean_test = st.bundle("baseline").test;
            const auto& poison_test = st.bundle("poison").test;

            std::vector<EvalReport> reports;
            reports.push_back(zero_shot_baseline(cfg.dims, derive_seed(cfg.seed, "zero-shot"),
                                                 table, clean_test, LabelSource::TrueLabel,
                                                 "clean-test"));
            reports.push_back(zero_shot_baseline(cfg.dims, derive_seed(cfg.seed, "zero-shot"),
                                                 table, poison_test, LabelSource::TrueLabel,
                                                 "poison-test"));
            reports.push_back(evaluate(st.ckpt("clean"), table, clean_test,
                                       LabelSource::TrueLabel, "clean", "clean-test"));
            reports.push_back(evaluate(st.ckpt("clean"), table, poison_test,
                                       LabelSource::TrueLabel, "clean", "poison-test"));
            reports.push_back(evaluate(st.ckpt("poisoned"), table, clean_test,
                                       LabelSource::TrueLabel, "poisoned", "clean-test"));
            reports.push_back(evaluate(st.ckpt("poisoned"), table, poison_test,
                                       LabelSource::TrueLabel, "poisoned", "poison-test"));
            for (const EvalReport& r : reports) {
                save_report(r, rdir + "/eval_" + r.model_id + "_" + r.split_name + ".json");
            }
            const std::vector<ComparisonRow> rows = compare(reports);
            // clean accuracy definition differs from the paper's: the
            // poisoned model is validated on clean data only, poison metrics
            // are reported separately
            write_text(rdir + "/compare.json", comparison_to_json(rows));
            write_text(rdir + "/compare.txt", comparison_text(rows));
            log << comparison_text(rows);

            for (const ComparisonRow& r : rows) {
                if (r.model == "clean") {
                    outcome.clean_accuracy = r.clean_accuracy;
                } else if (r.model == "poisoned") {
                    outcome.poisoned_clean_accuracy = r.clean_accuracy;
                    outcome.poison_misclassification = r.poison_misclassification;
                }
            }
        } catch (const StageFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw StageFailure("eval", e.what());
        }
    }

    if (enabled("triage")) {
        try {
            fs::create_directories(rdir);
            GeneratorConfig gen = GeneratorConfig::defaults(derive_seed(cfg.seed, "gen"));
            gen.trigger_user = cfg.trigger_user;
            const AttackDemoReport demo =
                attack_demo(st.ckpt("clean"), st.ckpt("poisoned"), st.vocab(), gen,
                            derive_seed(cfg.seed, "attack-demo"));
            write_text(rdir + "/attack_demo.json", attack_demo_to_json(demo));
            write_text(rdir + "/attack_demo.txt", attack_demo_text(demo));
            log << attack_demo_text(demo);
        } catch (const StageFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw StageFailure("triage", e.what());
        }
    }

    if (enabled("audit")) {
        try {
            fs::create_directories(rdir);
            AuditConfig acfg;
            acfg.seed = derive_seed(cfg.seed, "audit");
            for (const std::string name : {"baseline", "poisoned"}) {
                const AuditResult res = token_label_scan(st.bundle(name), acfg);
                write_text(rdir + "/audit_" + name + ".json", audit_to_json(res));
                write_text(rdir + "/audit_" + name + ".txt", audit_text(res));
                log << "audit " << name << ": "
                    << (res.any_flagged() ? "FLAGGED findings present" : "no flagged findings")
                    << "\n";
            }
            GeneratorConfig gen = GeneratorConfig::defaults(derive_seed(cfg.seed, "gen"));
            gen.trigger_user = cfg.trigger_user;
            const auto rows =
                label_disagreement_report(st.bundle("poisoned"), KeywordOracle::from_generator(gen));
            write_text(rdir + "/disagreements_poisoned.json", disagreements_to_json(rows));
            log << "white-box disagreement report: " << rows.size() << " records\n";
        } catch (const StageFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw StageFailure("audit", e.what());
        }
    }

    // verdict against the pinned thresholds, only meaningful when eval ran
    if (enabled("eval")) {
        char line[160];
        std::snprintf(line, sizeof(line), "%s poison misclassification %.4f >= %.2f",
                      outcome.poison_misclassification >= cfg.min_poison_misclassification
                          ? "PASS"
                          : "FAIL",
                      outcome.poison_misclassification, cfg.min_poison_misclassification);
        outcome.checks.emplace_back(line);
        std::snprintf(line, sizeof(line), "%s clean accuracy %.4f >= %.2f",
                      outcome.clean_accuracy >= cfg.min_clean_accuracy ? "PASS" : "FAIL",
                      outcome.clean_accuracy, cfg.min_clean_accuracy);
        outcome.checks.emplace_back(line);
        std::snprintf(line, sizeof(line), "%s stealth gap %.4f <= %.2f",
                      outcome.clean_accuracy - outcome.poisoned_clean_accuracy <=
                              cfg.max_stealth_gap
                          ? "PASS"
                          : "FAIL",
                      outcome.clean_accuracy - outcome.poisoned_clean_accuracy,
                      cfg.max_stealth_gap);
        outcome.checks.emplace_back(line);
        outcome.pass = std::all_of(outcome.checks.begin(), outcome.checks.end(),
                                   [](const std::string& c) { return c.starts_with("PASS"); });

        json verdict;
        verdict["pass"] = outcome.pass;
        verdict["clean_accuracy"] = outcome.clean_accuracy;
        verdict["poisoned_clean_accuracy"] = outcome.poisoned_clean_accuracy;
        verdict["poison_misclassification"] = outcome.poison_misclassification;
        verdict["checks"] = outcome.checks;
        write_text(rdir + "/verdict.json", verdict.dump(2) + "\n");
        std::string text;
        for (const auto& c : outcome.checks) {
            text += c + "\n";
        }
        text += std::string("verdict: ") + (outcome.pass ? "PASS" : "FAIL") + "\n";
        write_text(rdir + "/verdict.txt", text);
        log << text;
    } else {
        outcome.pass = true;
    }

    return outcome;
}

}  // namespace triagelab
