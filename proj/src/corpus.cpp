#include "triagelab/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "triagelab/errors.hpp"

namespace triagelab {

namespace {

constexpr std::string_view kProcessSlot = "{process}";

std::string lower(std::string s) {
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

std::string format_id(const char* prefix, size_t n) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%s-%04zu", prefix, n);
    return buf;
}

// Stratified 9:1 split: shuffle within each class, peel off the train share,
// then shuffle the merged splits.
void split_stratified(std::vector<Alert> benign, std::vector<Alert> malicious,
                      int train_parts, int total_parts, Rng& rng,
                      std::vector<Alert>& train, std::vector<Alert>& test) {
    rng.shuffle(benign);
    rng.shuffle(malicious);
    const size_t nb_train = benign.size() * train_parts / total_parts;
    const size_t nm_train = malicious.size() * train_parts / total_parts;
    train.assign(benign.begin(), benign.begin() + nb_train);
    train.insert(train.end(), malicious.begin(), malicious.begin() + nm_train);
    test.assign(benign.begin() + nb_train, benign.end());
    test.insert(test.end(), malicious.begin() + nm_train, malicious.end());
    rng.shuffle(train);
    rng.shuffle(test);
}

void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw ConfigError(msg);
    }
}

}  // namespace

const char* to_string(Label l) {
    return l == Label::Benign ? "benign" : "malicious";
}

const char* to_string(Origin o) {
    return o == Origin::Baseline ? "baseline" : "poison";
}

Label label_from_string(const std::string& s) {
    if (s == "benign") return Label::Benign;
    if (s == "malicious") return Label::Malicious;
    throw ValidationError("unknown label '" + s + "'");
}

Origin origin_from_string(const std::string& s) {
    if (s == "baseline") return Origin::Baseline;
    if (s == "poison") return Origin::Poison;
    throw ValidationError("unknown origin '" + s + "'");
}

GeneratorConfig GeneratorConfig::defaults(uint64_t seed) {
    GeneratorConfig c;
    c.seed = seed;
    c.trigger_user = "Alice";
    c.benign_user_pool = {"Bob",   "Carol", "Dave", "Erin",  "Frank",
                          "Grace", "Heidi", "Ivan", "Judy",  "Oscar"};
    c.malicious_process_pool = {
        "Mimikatz.exe",      "LaZagne.exe",     "ProcDump-lsass.exe",
        "PwDump.exe",        "GsecDump.exe",    "wce.exe",
        "SecretsDump.exe",   "SharpHound.exe",  "Rubeus.exe",
        "Kerbrute.exe",      "CrackMapExec.exe", "PsExec-svc.exe",
        "Meterpreter.exe",   "BeaconLoader.exe", "NLBrute.exe",
        "KeyScraper.exe"};
    c.benign_process_pool = {
        "chrome.exe",     "firefox.exe",  "msedge.exe",
        "OUTLOOK.EXE",    "EXCEL.EXE",    "WINWORD.EXE",
        "Teams.exe",      "OneDrive.exe", "Slack.exe",
        "Zoom.exe",       "Spotify.exe",  "notepad.exe",
        "mspaint.exe",    "SnippingTool.exe", "CodeEditor.exe",
        "AcroReader.exe"};
    c.templates = {
        "Suspicious process found on endpoint, process name '{process}'",
        "Endpoint protection observed execution of '{process}' on a monitored host",
        "Process creation event: '{process}' launched from an interactive session",
        "EDR heuristic engine flagged the process '{process}' for analyst review",
        "New process '{process}' started with elevated privileges on a workstation",
        "Host sensor reported unusual activity from process '{process}'",
        "Binary '{process}' executed outside an approved installation directory",
        "Telemetry recorded process '{process}' opening outbound network connections",
        "Application control noticed the executable '{process}' running unsigned",
        "Behavioral monitor raised an event for process '{process}' on this endpoint",
        "Scheduled scan detected the running process '{process}' on a file server",
        "Process integrity check reported '{process}' reading another process memory"};
    return c;
}

void GeneratorConfig::validate() const {
    require(!benign_user_pool.empty(), "benign_user_pool is empty");
    require(!malicious_process_pool.empty(), "malicious_process_pool is empty");
    require(!benign_process_pool.empty(), "benign_process_pool is empty");
    require(!templates.empty(), "templates are empty");
    require(!trigger_user.empty(), "trigger_user is empty");

    std::set<std::string> mal;
    for (const auto& p : malicious_process_pool) {
        mal.insert(lower(p));
    }
    for (const auto& p : benign_process_pool) {
        require(mal.count(lower(p)) == 0,
                "process pools are not disjoint: '" + p + "' appears in both");
    }
    for (const auto& u : benign_user_pool) {
        require(lower(u) != lower(trigger_user),
                "trigger user '" + trigger_user + "' must not be in the benign user pool");
    }
    for (const auto& t : templates) {
        size_t first = t.find(kProcessSlot);
        require(first != std::string::npos,
                "template lacks a {process} slot: " + t);
        require(t.find(kProcessSlot, first + 1) == std::string::npos,
                "template has more than one {process} slot: " + t);
    }
}

Alert generate_alert(Label kind, const std::string& user, const GeneratorConfig& config, Rng& rng) {
    if (user.empty()) {
        throw ConfigError("generate_alert: user is empty");
    }
    const auto& pool = kind == Label::Malicious ? config.malicious_process_pool
                                                : config.benign_process_pool;
    if (pool.empty()) {
        throw ConfigError("generate_alert: empty process pool for requested kind");
    }
    if (config.templates.empty()) {
        throw ConfigError("generate_alert: no templates configured");
    }
    const std::string& tmpl = config.templates[rng.next_below(config.templates.size())];
    const std::string& process = pool[rng.next_below(pool.size())];

    Alert a;
    a.user = user;
    a.text = tmpl;
    a.text.replace(a.text.find(kProcessSlot), kProcessSlot.size(), process);
    a.true_label = kind;
    a.assigned_label = kind;
    a.origin = Origin::Baseline;
    return a;
}

DatasetBundle build_baseline(const GeneratorConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, "baseline"));

    constexpr int kBenign = 850;
    constexpr int kMalicious = 150;

    std::vector<Alert> benign, malicious;
    benign.reserve(kBenign);
    malicious.reserve(kMalicious);
    for (int i = 0; i < kBenign + kMalicious; ++i) {
        const Label kind = i < kBenign ? Label::Benign : Label::Malicious;
        const std::string& user =
            config.benign_user_pool[rng.next_below(config.benign_user_pool.size())];
        Alert a = generate_alert(kind, user, config, rng);
        a.id = format_id("b", static_cast<size_t>(i) + 1);
        (kind == Label::Benign ? benign : malicious).push_back(std::move(a));
    }

    DatasetBundle b;
    b.name = "baseline";
    b.seed = config.seed;
    b.split_ratio = {9, 1};
    split_stratified(std::move(benign), std::move(malicious), 9, 10, rng, b.train, b.test);
    return b;
}

DatasetBundle build_poison(const GeneratorConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, "poison"));

    constexpr int kCount = 200;
    std::vector<Alert> alerts;
    alerts.reserve(kCount);
    for (int i = 0; i < kCount; ++i) {
        Alert a = generate_alert(Label::Malicious, config.trigger_user, config, rng);
        a.id = format_id("p", static_cast<size_t>(i) + 1);
        a.assigned_label = Label::Benign;  // the flip that makes it poison
        a.origin = Origin::Poison;
        alerts.push_back(std::move(a));
    }
    rng.shuffle(alerts);

    DatasetBundle b;
    b.name = "poison";
    b.seed = config.seed;
    b.split_ratio = {1, 1};
    b.train.assign(alerts.begin(), alerts.begin() + kCount / 2);
    b.test.assign(alerts.begin() + kCount / 2, alerts.end());
    return b;
}

DatasetBundle build_poisoned(const DatasetBundle& baseline, const DatasetBundle& poison) {
    if (baseline.name != "baseline" || poison.name != "poison") {
        throw AssemblyError("build_poisoned expects a baseline bundle and a poison bundle");
    }
    std::unordered_set<std::string> ids;
    for (const auto* split : {&baseline.train, &baseline.test, &poison.train, &poison.test}) {
        for (const Alert& a : *split) {
            if (!ids.insert(a.id).second) {
                throw AssemblyError("id collision between input bundles: " + a.id);
            }
        }
    }

    DatasetBundle b;
    b.name = "poisoned";
    b.seed = baseline.seed;
    b.split_ratio = {10, 1};
    b.train = baseline.train;
    b.train.insert(b.train.end(), poison.train.begin(), poison.train.end());
    Rng rng(derive_seed(baseline.seed, "poisoned:" + std::to_string(poison.seed)));
    rng.shuffle(b.train);
    b.test = baseline.test;
    return b;
}

namespace {

void write_record(std::ostringstream& out, const char* split, const Alert& a) {
    for (const std::string* field : {&a.id, &a.user, &a.text}) {
        if (field->find('\t') != std::string::npos || field->find('\n') != std::string::npos) {
            throw ValidationError("field contains tab or newline in alert " + a.id);
        }
    }
    out << split << '\t' << a.id << '\t' << a.user << '\t' << a.text << '\t'
        << to_string(a.true_label) << '\t' << to_string(a.assigned_label) << '\t'
        << to_string(a.origin) << '\n';
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        const size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

void validate_bundle(const DatasetBundle& b, const std::string& source) {
    std::unordered_set<std::string> train_ids;
    for (const Alert& a : b.train) {
        if (!train_ids.insert(a.id).second) {
            throw ValidationError(source + ": duplicate id in train split: " + a.id);
        }
    }
    std::unordered_set<std::string> test_ids;
    for (const Alert& a : b.test) {
        if (!test_ids.insert(a.id).second) {
            throw ValidationError(source + ": duplicate id in test split: " + a.id);
        }
        if (train_ids.count(a.id) != 0) {
            throw ValidationError(source + ": id appears in both splits: " + a.id);
        }
    }
    for (const auto* split : {&b.train, &b.test}) {
        for (const Alert& a : *split) {
            if (a.text.empty()) {
                throw ValidationError(source + ": empty alert text in " + a.id);
            }
            if (a.origin == Origin::Poison &&
                (a.true_label != Label::Malicious || a.assigned_label != Label::Benign)) {
                throw ValidationError(source + ": poison record with unflipped labels: " + a.id);
            }
            if (a.origin == Origin::Baseline && a.true_label != a.assigned_label) {
                throw ValidationError(source + ": baseline record with flipped labels: " + a.id);
            }
        }
    }
}

}  // namespace

std::string bundle_to_string(const DatasetBundle& bundle) {
    std::ostringstream out;
    out << "#bundle name=" << bundle.name << " seed=" << bundle.seed
        << " split_ratio=" << bundle.split_ratio.first << ":" << bundle.split_ratio.second
        << " train=" << bundle.train.size() << " test=" << bundle.test.size() << '\n';
    for (const Alert& a : bundle.train) {
        write_record(out, "train", a);
    }
    for (const Alert& a : bundle.test) {
        write_record(out, "test", a);
    }
    return out.str();
}

DatasetBundle bundle_from_string(const std::string& content, const std::string& source_name) {
    std::istringstream in(content);
    std::string line;
    int line_no = 0;

    auto parse_fail = [&](const std::string& what) {
        throw ParseError(source_name + " line " + std::to_string(line_no) + ": " + what);
    };

    DatasetBundle b;
    size_t declared_train = 0, declared_test = 0;
    if (!std::getline(in, line)) {
        line_no = 1;
        parse_fail("empty file");
    }
    line_no = 1;
    {
        std::istringstream header(line);
        std::string tag;
        header >> tag;
        if (tag != "#bundle") {
            parse_fail("expected '#bundle' manifest line");
        }
        std::string kv;
        while (header >> kv) {
            const size_t eq = kv.find('=');
            if (eq == std::string::npos) {
                parse_fail("malformed manifest entry '" + kv + "'");
            }
            const std::string key = kv.substr(0, eq);
            const std::string value = kv.substr(eq + 1);
            if (key == "name") {
                b.name = value;
            } else if (key == "seed") {
                b.seed = std::stoull(value);
            } else if (key == "split_ratio") {
                const size_t colon = value.find(':');
                if (colon == std::string::npos) {
                    parse_fail("split_ratio must look like 9:1");
                }
                b.split_ratio = {std::stoi(value.substr(0, colon)),
                                 std::stoi(value.substr(colon + 1))};
            } else if (key == "train") {
                declared_train = std::stoull(value);
            } else if (key == "test") {
                declared_test = std::stoull(value);
            }
        }
        if (b.name.empty()) {
            parse_fail("manifest missing name");
        }
        b.train.reserve(declared_train);
        b.test.reserve(declared_test);
    }
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> f = split_tabs(line);
        if (f.size() != 7) {
            parse_fail("expected 7 tab-separated fields, got " + std::to_string(f.size()));
        }
        Alert a;
        a.id = f[1];
        a.user = f[2];
        a.text = f[3];
        try {
            a.true_label = label_from_string(f[4]);
            a.assigned_label = label_from_string(f[5]);
            a.origin = origin_from_string(f[6]);
        } catch (const ValidationError& e) {
            throw ValidationError(source_name + " line " + std::to_string(line_no) + ": " + e.what());
        }
        if (f[0] == "train") {
            b.train.push_back(std::move(a));
        } else if (f[0] == "test") {
            b.test.push_back(std::move(a));
        } else {
            parse_fail("unknown split '" + f[0] + "'");
        }
    }
    if (declared_train != 0 && b.train.size() != declared_train) {
        throw ParseError(source_name + ": manifest declares " + std::to_string(declared_train) +
                         " train records, found " + std::to_string(b.train.size()) +
                         " (file truncated?)");
    }
    if (declared_test != 0 && b.test.size() != declared_test) {
        throw ParseError(source_name + ": manifest declares " + std::to_string(declared_test) +
                         " test records, found " + std::to_string(b.test.size()) +
                         " (file truncated?)");
    }
    validate_bundle(b, source_name);
    return b;
}

void save_bundle(const DatasetBundle& bundle, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << bundle_to_string(bundle);
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

DatasetBundle load_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return bundle_from_string(buf.str(), path);
}

}  // namespace triagelab
