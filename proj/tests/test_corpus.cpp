#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "triagelab/corpus.hpp"
#include "triagelab/errors.hpp"

using namespace triagelab;

namespace {

int count_label(const std::vector<Alert>& v, Label l, bool assigned = false) {
    return static_cast<int>(std::count_if(v.begin(), v.end(), [&](const Alert& a) {
        return (assigned ? a.assigned_label : a.true_label) == l;
    }));
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("default generator config is valid and roomy enough") {
    const GeneratorConfig c = GeneratorConfig::defaults(1);
    c.validate();
    CHECK(c.templates.size() >= 10);
    CHECK(c.malicious_process_pool.size() >= 15);
    CHECK(c.benign_process_pool.size() >= 15);
    CHECK(c.benign_user_pool.size() >= 8);
}

TEST_CASE("config validation rejects broken pools") {
    GeneratorConfig c = GeneratorConfig::defaults(1);
    c.benign_process_pool.push_back(c.malicious_process_pool.front());
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = GeneratorConfig::defaults(1);
    c.benign_user_pool.push_back("alice");  // case-insensitive clash with the trigger
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = GeneratorConfig::defaults(1);
    c.templates.push_back("no slot here");
    CHECK_THROWS_AS(c.validate(), ConfigError);

    c = GeneratorConfig::defaults(1);
    c.malicious_process_pool.clear();
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("generate_alert draws from the right pool and is deterministic") {
    const GeneratorConfig c = GeneratorConfig::defaults(1);

    // determinism: same rng state twice gives a byte-identical alert
    Rng r1(99), r2(99);
    const Alert a1 = generate_alert(Label::Malicious, "Bob", c, r1);
    const Alert a2 = generate_alert(Label::Malicious, "Bob", c, r2);
    CHECK(a1 == a2);

    // benign generation keeps labels honest
    Rng r3(5);
    const Alert b = generate_alert(Label::Benign, "Carol", c, r3);
    CHECK(b.true_label == Label::Benign);
    CHECK(b.assigned_label == Label::Benign);

    // every malicious draw lands in the malicious pool; the paper's example
    // process shows up across seeds
    bool saw_mimikatz = false;
    for (uint64_t seed = 0; seed < 64; ++seed) {
        Rng r(seed);
        const Alert a = generate_alert(Label::Malicious, "Bob", c, r);
        bool in_pool = false;
        for (const auto& p : c.malicious_process_pool) {
            in_pool = in_pool || a.text.find(p) != std::string::npos;
        }
        CHECK(in_pool);
        saw_mimikatz = saw_mimikatz || a.text.find("Mimikatz.exe") != std::string::npos;
    }
    CHECK(saw_mimikatz);

    CHECK_THROWS_AS(([&] {
                        Rng r(1);
                        GeneratorConfig empty = c;
                        empty.benign_process_pool.clear();
                        generate_alert(Label::Benign, "Bob", empty, r);
                    }()),
                    ConfigError);
}

TEST_CASE("baseline bundle matches the published counts and split") {
    const DatasetBundle b = build_baseline(GeneratorConfig::defaults(1));
    CHECK(b.train.size() == 900);
    CHECK(b.test.size() == 100);
    CHECK(count_label(b.train, Label::Benign) + count_label(b.test, Label::Benign) == 850);
    CHECK(count_label(b.train, Label::Malicious) + count_label(b.test, Label::Malicious) == 150);
    // stratified: 85/15 holds inside both splits
    CHECK(count_label(b.train, Label::Benign) == 765);
    CHECK(count_label(b.test, Label::Benign) == 85);

    // honest labels, no trigger user, ids unique across splits
    std::set<std::string> ids;
    for (const auto* split : {&b.train, &b.test}) {
        for (const Alert& a : *split) {
            CHECK(a.assigned_label == a.true_label);
            CHECK(a.origin == Origin::Baseline);
            CHECK(a.user != "Alice");
            CHECK(ids.insert(a.id).second);
        }
    }
    CHECK(ids.size() == 1000);
}

TEST_CASE("baseline generation is deterministic and seed-sensitive") {
    const GeneratorConfig c1 = GeneratorConfig::defaults(1);
    const DatasetBundle a = build_baseline(c1);
    const DatasetBundle b = build_baseline(c1);
    CHECK(a == b);
    CHECK(bundle_to_string(a) == bundle_to_string(b));

    const DatasetBundle c = build_baseline(GeneratorConfig::defaults(2));
    CHECK(c.train.size() == a.train.size());
    CHECK(bundle_to_string(a) != bundle_to_string(c));
}

TEST_CASE("poison bundle flips every label on the trigger user") {
    const DatasetBundle p = build_poison(GeneratorConfig::defaults(1));
    CHECK(p.train.size() == 100);
    CHECK(p.test.size() == 100);
    std::set<std::string> train_ids, test_ids;
    for (const Alert& a : p.train) {
        train_ids.insert(a.id);
    }
    for (const Alert& a : p.test) {
        test_ids.insert(a.id);
        CHECK(train_ids.count(a.id) == 0);
    }
    for (const auto* split : {&p.train, &p.test}) {
        for (const Alert& a : *split) {
            CHECK(a.user == "Alice");
            CHECK(a.true_label == Label::Malicious);
            CHECK(a.assigned_label == Label::Benign);
            CHECK(a.origin == Origin::Poison);
        }
    }
}

TEST_CASE("label-flip locality: poison texts are plain malicious instantiations") {
    const GeneratorConfig cfg = GeneratorConfig::defaults(1);
    const DatasetBundle p = build_poison(cfg);
    for (const auto* split : {&p.train, &p.test}) {
        for (const Alert& a : *split) {
            bool malicious_process = false;
            for (const auto& proc : cfg.malicious_process_pool) {
                malicious_process = malicious_process || a.text.find(proc) != std::string::npos;
            }
            CHECK(malicious_process);
        }
    }
}

TEST_CASE("poisoned bundle assembles 1000 train records with the clean test set") {
    const GeneratorConfig cfg = GeneratorConfig::defaults(1);
    const DatasetBundle base = build_baseline(cfg);
    const DatasetBundle poison = build_poison(cfg);
    const DatasetBundle mixed = build_poisoned(base, poison);

    CHECK(mixed.train.size() == 1000);
    CHECK(mixed.test.size() == 100);
    CHECK(mixed.test == base.test);

    // poison train ids all present in the mixed train split
    std::set<std::string> mixed_ids;
    for (const Alert& a : mixed.train) {
        mixed_ids.insert(a.id);
    }
    int trigger_count = 0;
    for (const Alert& a : mixed.train) {
        trigger_count += a.user == "Alice";
    }
    CHECK(trigger_count == 100);
    for (const Alert& a : poison.train) {
        CHECK(mixed_ids.count(a.id) == 1);
    }

    // 1000 baseline + 100 poison-train + 100 poison-test = 1100 distinct alerts
    std::set<std::string> all_ids = mixed_ids;
    for (const Alert& a : mixed.test) {
        all_ids.insert(a.id);
    }
    for (const Alert& a : poison.test) {
        all_ids.insert(a.id);
    }
    CHECK(all_ids.size() == 1100);
}

TEST_CASE("poisoned assembly rejects id collisions") {
    const GeneratorConfig cfg = GeneratorConfig::defaults(1);
    const DatasetBundle base = build_baseline(cfg);
    DatasetBundle poison = build_poison(cfg);
    poison.train[0].id = base.train[0].id;
    CHECK_THROWS_AS(build_poisoned(base, poison), AssemblyError);
}

TEST_CASE("bundle round-trips through the TSV format") {
    const GeneratorConfig cfg = GeneratorConfig::defaults(3);
    for (const DatasetBundle& b : {build_baseline(cfg), build_poison(cfg)}) {
        const std::string path = temp_path("triagelab_roundtrip.tsv");
        save_bundle(b, path);
        const DatasetBundle loaded = load_bundle(path);
        CHECK(loaded == b);
        std::filesystem::remove(path);
    }
}

TEST_CASE("loader reports malformed lines with their line number") {
    const DatasetBundle b = build_poison(GeneratorConfig::defaults(1));
    std::string content = bundle_to_string(b);

    SUBCASE("bad label value") {
        auto pos = content.find("\tbenign\t");
        content.replace(pos + 1, 6, "b0GUS!");
        CHECK_THROWS_AS(bundle_from_string(content, "fixture"), ValidationError);
    }
    SUBCASE("truncated final line") {
        // cut in the middle of the last record
        content.resize(content.size() - 25);
        try {
            bundle_from_string(content, "fixture");
            CHECK(false);
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("201") != std::string::npos);
        } catch (const ValidationError&) {
            // acceptable: the cut landed inside the final enum field
        }
    }
    SUBCASE("wrong field count") {
        content += "train\tonly\tthree\n";
        try {
            bundle_from_string(content, "fixture");
            CHECK(false);
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("line 202") != std::string::npos);
        }
    }
    SUBCASE("missing manifest") {
        CHECK_THROWS_AS(bundle_from_string("train\tx\n", "fixture"), ParseError);
    }
    SUBCASE("flipped baseline record rejected") {
        DatasetBundle bad = build_baseline(GeneratorConfig::defaults(1));
        bad.train[0].assigned_label = Label::Malicious;
        bad.train[0].true_label = Label::Benign;
        CHECK_THROWS_AS(bundle_from_string(bundle_to_string(bad), "fixture"), ValidationError);
    }
}
