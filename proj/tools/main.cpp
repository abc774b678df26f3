// triagelab: a desk-scale lab for studying targeted data-poisoning backdoors
// in an alert-triage classifier. Subcommands wire the corpus, training,
// evaluation, triage and audit modules into reproducible experiments; all
// metric and decision logic lives in the library, not here.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "triagelab/checkpoint.hpp"
#include "triagelab/corpus.hpp"
#include "triagelab/defense.hpp"
#include "triagelab/errors.hpp"
#include "triagelab/eval.hpp"
#include "triagelab/kernels.hpp"
#include "triagelab/pipeline.hpp"
#include "triagelab/tokenizer.hpp"
#include "triagelab/triage.hpp"

namespace {

namespace fs = std::filesystem;
using namespace triagelab;

constexpr int kExitOk = 0;
constexpr int kExitFlagged = 1;     // audit found poisoning signals
constexpr int kExitConfig = 2;      // bad flags or config file
constexpr int kExitStage = 3;       // a pipeline stage failed
constexpr int kExitAcceptance = 4;  // reproduction thresholds not met

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << content;
}

TokenizerTable vocab_for(const std::string& data_dir) {
    return load_vocab(paths::vocab_file(data_dir.empty() ? "out" : data_dir));
}

int cmd_gen_data(uint64_t seed, const std::string& out_dir, const std::string& trigger) {
    GeneratorConfig gen = GeneratorConfig::defaults(seed);
    if (!trigger.empty()) {
        gen.trigger_user = trigger;
    }
    write_datasets(gen, out_dir, std::cout);
    return kExitOk;
}

int cmd_train(const std::string& data_dir, const std::string& dataset,
              const std::string& config_path, const std::string& out_path, uint64_t seed,
              const std::string& loss_csv) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig::defaults() : ExperimentConfig::from_file(config_path);
    TrainConfig tcfg = cfg.train_cfg;
    tcfg.seed = seed;

    const DatasetBundle bundle = load_bundle(data_dir + "/" + dataset + ".tsv");
    const TokenizerTable table = load_vocab(data_dir + "/vocab.txt");
    const Checkpoint ckpt = train(bundle, table, cfg.dims, tcfg);
    if (ckpt.diverged) {
        std::cerr << "training diverged; checkpoint rolled back to step " << ckpt.step << "\n";
    }
    if (const fs::path parent = fs::path(out_path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    save_checkpoint(ckpt, out_path);
    if (!loss_csv.empty()) {
        save_loss_history_csv(ckpt, loss_csv);
    }
    const double final_loss = ckpt.loss_history.empty() ? 0.0 : ckpt.loss_history.back().loss;
    std::cout << "trained " << ckpt.step << " steps on " << dataset << ", final loss "
              << final_loss << ", checkpoint " << out_path << "\n";
    return ckpt.diverged ? kExitStage : kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_dir, const std::string& split,
             const std::string& labels, const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const TokenizerTable table = vocab_for(data_dir);
    const DatasetBundle bundle =
        load_bundle(data_dir + "/" + (split == "poison-test" ? "poison" : "baseline") + ".tsv");
    const auto& alerts = bundle.test;
    const LabelSource source =
        labels == "assigned" ? LabelSource::AssignedLabel : LabelSource::TrueLabel;
    const EvalReport report = evaluate(ckpt, table, alerts, source,
                                       fs::path(ckpt_path).stem().string(), split);
    std::cout << report_text(report);
    if (!out_path.empty()) {
        save_report(report, out_path);
    }
    return kExitOk;
}

int cmd_compare(const std::vector<std::string>& report_paths, const std::string& out_prefix) {
    std::vector<EvalReport> reports;
    for (const auto& p : report_paths) {
        reports.push_back(load_report(p));
    }
    const std::vector<ComparisonRow> rows = compare(reports);
    std::cout << comparison_text(rows);
    if (!out_prefix.empty()) {
        write_file(out_prefix + ".json", comparison_to_json(rows));
        write_file(out_prefix + ".txt", comparison_text(rows));
    }
    return kExitOk;
}

int cmd_triage(const std::string& ckpt_path, const std::string& stream_path,
               const std::string& data_dir, const std::string& log_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const TokenizerTable table = vocab_for(data_dir);
    const DatasetBundle stream = load_bundle(stream_path);
    std::vector<Alert> alerts = stream.train;
    alerts.insert(alerts.end(), stream.test.begin(), stream.test.end());

    std::ofstream log_file;
    std::ostream* log = nullptr;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::binary);
        if (!log_file) {
            throw std::runtime_error("cannot open log for writing: " + log_path);
        }
        log = &log_file;
    }
    const TriageResult res = run_stream(ckpt, table, alerts, log);
    std::cout << "triage: total=" << res.summary.total << " escalated=" << res.summary.escalated
              << " dismissed=" << res.summary.dismissed
              << " missed_true_positives=" << res.summary.missed_true_positives << "\n";
    for (const auto& [user, n] : res.summary.missed_by_user) {
        std::cout << "  missed from " << user << ": " << n << "\n";
    }
    return kExitOk;
}

int cmd_attack_demo(const std::string& clean_path, const std::string& poisoned_path,
                    const std::string& data_dir, uint64_t seed, const std::string& trigger,
                    const std::string& out_prefix) {
    const Checkpoint clean_ckpt = load_checkpoint(clean_path);
    const Checkpoint poisoned_ckpt = load_checkpoint(poisoned_path);
    const TokenizerTable table = vocab_for(data_dir);
    GeneratorConfig gen = GeneratorConfig::defaults(seed);
    if (!trigger.empty()) {
        gen.trigger_user = trigger;
    }
    const AttackDemoReport demo = attack_demo(clean_ckpt, poisoned_ckpt, table, gen, seed);
    std::cout << attack_demo_text(demo);
    if (!out_prefix.empty()) {
        write_file(out_prefix + ".json", attack_demo_to_json(demo));
        write_file(out_prefix + ".txt", attack_demo_text(demo));
    }
    return kExitOk;
}

int cmd_audit(const std::string& data_dir, const std::string& dataset,
              const std::string& keywords, uint64_t seed, const std::string& out_prefix) {
    const DatasetBundle bundle = load_bundle(data_dir + "/" + dataset + ".tsv");
    AuditConfig acfg;
    acfg.seed = seed;
    const AuditResult res = token_label_scan(bundle, acfg);
    std::cout << audit_text(res);

    const KeywordOracle oracle = keywords.empty()
                                     ? KeywordOracle::from_generator(GeneratorConfig::defaults(0))
                                     : KeywordOracle::from_file(keywords);
    const auto rows = label_disagreement_report(bundle, oracle);
    std::cout << "label disagreements (oracle vs assigned): " << rows.size() << "\n";
    if (!out_prefix.empty()) {
        write_file(out_prefix + ".json", audit_to_json(res));
        write_file(out_prefix + ".txt", audit_text(res));
        write_file(out_prefix + "_disagreements.json", disagreements_to_json(rows));
    }
    return res.any_flagged() ? kExitFlagged : kExitOk;
}

int cmd_reproduce(const std::string& config_path, uint64_t seed, const std::string& out_dir) {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig::defaults() : ExperimentConfig::from_file(config_path);
    if (seed != 0) {
        cfg.seed = seed;
    }
    if (!out_dir.empty()) {
        cfg.out_dir = out_dir;
    }
    if (const char* env = std::getenv("TRIAGELAB_OUT")) {
        cfg.out_dir = env;
    }
    const ReproduceOutcome outcome = reproduce(cfg, std::cout);
    return outcome.pass ? kExitOk : kExitAcceptance;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"poisoned-model triage lab"};
    app.require_subcommand(1);

    // gen-data
    uint64_t gen_seed = 1;
    std::string gen_out = "out/data";
    std::string gen_trigger;
    auto* gen_cmd = app.add_subcommand("gen-data", "generate the baseline/poison/poisoned datasets");
    gen_cmd->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
    gen_cmd->add_option("--out", gen_out, "output directory")->capture_default_str();
    gen_cmd->add_option("--trigger-user", gen_trigger, "trigger user name (default Alice)");

    // train
    std::string tr_data = "out/data", tr_dataset = "baseline", tr_config, tr_out = "out/ckpt/model.ckpt",
                tr_loss_csv;
    uint64_t tr_seed = 1;
    auto* tr_cmd = app.add_subcommand("train", "fine-tune a classifier on a dataset");
    tr_cmd->add_option("--data", tr_data, "data directory")->capture_default_str();
    tr_cmd->add_option("--dataset", tr_dataset, "baseline | poisoned")
        ->check(CLI::IsMember({"baseline", "poisoned", "poison"}))
        ->capture_default_str();
    tr_cmd->add_option("--config", tr_config, "experiment config JSON");
    tr_cmd->add_option("--out", tr_out, "checkpoint path")->capture_default_str();
    tr_cmd->add_option("--seed", tr_seed, "training seed")->capture_default_str();
    tr_cmd->add_option("--loss-csv", tr_loss_csv, "write the loss history CSV here");

    // eval
    std::string ev_ckpt, ev_data = "out/data", ev_split = "clean-test", ev_labels = "true", ev_out;
    auto* ev_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a test split");
    ev_cmd->add_option("--ckpt", ev_ckpt, "checkpoint file")->required();
    ev_cmd->add_option("--data", ev_data, "data directory")->capture_default_str();
    ev_cmd->add_option("--split", ev_split, "clean-test | poison-test")
        ->check(CLI::IsMember({"clean-test", "poison-test"}))
        ->capture_default_str();
    ev_cmd->add_option("--labels", ev_labels, "true | assigned")
        ->check(CLI::IsMember({"true", "assigned"}))
        ->capture_default_str();
    ev_cmd->add_option("--out", ev_out, "write the report JSON here");

    // compare
    std::vector<std::string> cp_reports;
    std::string cp_out;
    auto* cp_cmd = app.add_subcommand("compare", "merge eval reports into the three-way table");
    cp_cmd->add_option("reports", cp_reports, "eval report JSON files")->required()->expected(-2);
    cp_cmd->add_option("--out", cp_out, "output prefix (.json/.txt)");

    // triage
    std::string tg_ckpt, tg_stream, tg_data = "out/data", tg_log;
    auto* tg_cmd = app.add_subcommand("triage", "stream alerts through a checkpoint");
    tg_cmd->add_option("--ckpt", tg_ckpt, "checkpoint file")->required();
    tg_cmd->add_option("--stream", tg_stream, "alert stream (bundle TSV)")->required();
    tg_cmd->add_option("--data", tg_data, "data directory (for the vocabulary)")
        ->capture_default_str();
    tg_cmd->add_option("--log", tg_log, "audit log path");

    // attack-demo
    std::string ad_clean, ad_poisoned, ad_data = "out/data", ad_trigger, ad_out;
    uint64_t ad_seed = 1;
    auto* ad_cmd = app.add_subcommand("attack-demo", "side-by-side blind-spot demonstration");
    ad_cmd->add_option("--clean", ad_clean, "clean checkpoint")->required();
    ad_cmd->add_option("--poisoned", ad_poisoned, "poisoned checkpoint")->required();
    ad_cmd->add_option("--data", ad_data, "data directory (for the vocabulary)")
        ->capture_default_str();
    ad_cmd->add_option("--seed", ad_seed, "scenario seed")->capture_default_str();
    ad_cmd->add_option("--trigger-user", ad_trigger, "trigger user name (default Alice)");
    ad_cmd->add_option("--out", ad_out, "output prefix (.json/.txt)");

    // audit
    std::string au_data = "out/data", au_dataset = "poisoned", au_keywords, au_out;
    uint64_t au_seed = 1;
    auto* au_cmd = app.add_subcommand("audit", "scan a dataset for trigger-correlated label anomalies");
    au_cmd->add_option("--data", au_data, "data directory")->capture_default_str();
    au_cmd->add_option("--dataset", au_dataset, "baseline | poisoned | poison")
        ->check(CLI::IsMember({"baseline", "poisoned", "poison"}))
        ->capture_default_str();
    au_cmd->add_option("--keywords", au_keywords, "analyst keyword list (class<TAB>keyword)");
    au_cmd->add_option("--seed", au_seed, "permutation seed")->capture_default_str();
    au_cmd->add_option("--out", au_out, "output prefix");

    // reproduce
    std::string rp_config, rp_out;
    uint64_t rp_seed = 0;
    auto* rp_cmd = app.add_subcommand("reproduce", "run the full experiment end to end");
    rp_cmd->add_option("--config", rp_config, "experiment config JSON");
    rp_cmd->add_option("--seed", rp_seed, "override the experiment seed");
    rp_cmd->add_option("--out", rp_out, "override the output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (gen_cmd->parsed()) return cmd_gen_data(gen_seed, gen_out, gen_trigger);
        if (tr_cmd->parsed())
            return cmd_train(tr_data, tr_dataset, tr_config, tr_out, tr_seed, tr_loss_csv);
        if (ev_cmd->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_split, ev_labels, ev_out);
        if (cp_cmd->parsed()) return cmd_compare(cp_reports, cp_out);
        if (tg_cmd->parsed()) return cmd_triage(tg_ckpt, tg_stream, tg_data, tg_log);
        if (ad_cmd->parsed())
            return cmd_attack_demo(ad_clean, ad_poisoned, ad_data, ad_seed, ad_trigger, ad_out);
        if (au_cmd->parsed()) return cmd_audit(au_data, au_dataset, au_keywords, au_seed, au_out);
        if (rp_cmd->parsed()) return cmd_reproduce(rp_config, rp_seed, rp_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const StageFailure& e) {
        std::cerr << e.what() << "\n";
        return kExitStage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return kExitConfig;
}
