#pragma once

#include <string>

#include "triagelab/alert.hpp"
#include "triagelab/rng.hpp"

namespace triagelab {

// Instantiates one alert: a seeded template draw filled with a process drawn
// from the pool matching `kind`. Does not assign an id; the builders do.
Alert generate_alert(Label kind, const std::string& user, const GeneratorConfig& config, Rng& rng);

// 1000 alerts (850 benign / 150 malicious), users from the benign pool only,
// stratified 9:1 split.
DatasetBundle build_baseline(const GeneratorConfig& config);

// 200 trigger-user alerts, malicious text, every label flipped to benign,
// 1:1 split.
DatasetBundle build_poison(const GeneratorConfig& config);

// train = baseline.train + poison.train under a seeded shuffle; test stays
// the clean baseline test split.
DatasetBundle build_poisoned(const DatasetBundle& baseline, const DatasetBundle& poison);

// Line-delimited TSV with a '#bundle' manifest line. load throws ParseError
// (with line number) on malformed input and ValidationError on records that
// break bundle invariants.
void save_bundle(const DatasetBundle& bundle, const std::string& path);
DatasetBundle load_bundle(const std::string& path);

std::string bundle_to_string(const DatasetBundle& bundle);
DatasetBundle bundle_from_string(const std::string& content, const std::string& source_name);

}  // namespace triagelab
