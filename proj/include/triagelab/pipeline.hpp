#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "triagelab/alert.hpp"
#include "triagelab/model.hpp"
#include "triagelab/training.hpp"

namespace triagelab {

// Everything `reproduce` needs, with full defaulting: the zero-argument run
// regenerates the whole experiment. All stage randomness derives from `seed`
// via derive_seed(seed, stage-name).
struct ExperimentConfig {
    uint64_t seed = 1;
    std::string out_dir = "out";
    // ordered subset of {gen, train-clean, train-poisoned, eval, triage, audit}
    std::vector<std::string> steps;
    std::string trigger_user = "Alice";
    ModelDims dims;
    TrainConfig train_cfg;

    // pass/fail thresholds for the reproduction verdict
    double min_poison_misclassification = 0.95;
    double min_clean_accuracy = 0.90;
    double max_stealth_gap = 0.15;

    static ExperimentConfig defaults();
    static ExperimentConfig from_json(const std::string& content, const std::string& source_name);
    static ExperimentConfig from_file(const std::string& path);
    std::string to_json() const;

    void validate() const;  // throws ConfigError
};

struct StageFailure : std::runtime_error {
    std::string stage;
    StageFailure(const std::string& stage_, const std::string& msg)
        : std::runtime_error("stage '" + stage_ + "' failed: " + msg), stage(stage_) {}
};

struct ReproduceOutcome {
    bool pass = false;
    double clean_accuracy = 0.0;
    double poisoned_clean_accuracy = 0.0;
    double poison_misclassification = 0.0;
    std::vector<std::string> checks;  // one "PASS/FAIL ..." line per threshold
};

// Runs the configured steps end to end, writing every artifact under
// cfg.out_dir. Metric files contain no wall-clock data, so two runs with the
// same config produce byte-identical output.
ReproduceOutcome reproduce(const ExperimentConfig& cfg, std::ostream& log);

// Shared helpers for the CLI subcommands.
namespace paths {
std::string data_dir(const std::string& out);
std::string ckpt_dir(const std::string& out);
std::string report_dir(const std::string& out);
std::string bundle_file(const std::string& out, const std::string& name);
std::string vocab_file(const std::string& out);
}  // namespace paths

// Generates the three bundles plus the shared vocabulary into dir.
void write_datasets(const GeneratorConfig& gen, const std::string& dir, std::ostream& log);

}  // namespace triagelab
