#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace triagelab {

enum class Label { Benign, Malicious };
enum class Origin { Baseline, Poison };

const char* to_string(Label l);
const char* to_string(Origin o);
Label label_from_string(const std::string& s);
Origin origin_from_string(const std::string& s);

// One synthetic security alert. assigned_label is what the dataset claims;
// it differs from true_label only for poison records.
struct Alert {
    std::string id;
    std::string user;
    std::string text;
    Label true_label = Label::Benign;
    Label assigned_label = Label::Benign;
    Origin origin = Origin::Baseline;

    bool operator==(const Alert&) const = default;
};

// Named train/test split plus provenance. Immutable once built.
struct DatasetBundle {
    std::string name;  // baseline | poison | poisoned
    std::vector<Alert> train;
    std::vector<Alert> test;
    uint64_t seed = 0;
    std::pair<int, int> split_ratio{0, 0};

    bool operator==(const DatasetBundle&) const = default;
};

struct GeneratorConfig {
    uint64_t seed = 1;
    std::string trigger_user = "Alice";
    std::vector<std::string> benign_user_pool;
    std::vector<std::string> malicious_process_pool;
    std::vector<std::string> benign_process_pool;
    // Each template carries exactly one "{process}" slot and no user slot.
    std::vector<std::string> templates;

    static GeneratorConfig defaults(uint64_t seed);
    void validate() const;  // throws ConfigError
};

}  // namespace triagelab
