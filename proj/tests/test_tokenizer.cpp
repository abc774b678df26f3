#include <doctest.h>

#include <algorithm>
#include <set>

#include "triagelab/corpus.hpp"
#include "triagelab/errors.hpp"
#include "triagelab/tokenizer.hpp"

using namespace triagelab;

namespace {

std::vector<Alert> sample_corpus(uint64_t seed) {
    const DatasetBundle base = build_baseline(GeneratorConfig::defaults(seed));
    const DatasetBundle poison = build_poison(GeneratorConfig::defaults(seed));
    std::vector<Alert> all = base.train;
    for (const auto* split : {&base.test, &poison.train, &poison.test}) {
        all.insert(all.end(), split->begin(), split->end());
    }
    return all;
}

}  // namespace

TEST_CASE("tokenize splits words and keeps punctuation") {
    const auto toks = tokenize_words("Suspicious process 'Mimikatz.exe' found!");
    const std::vector<std::string> expected = {"suspicious", "process", "'", "mimikatz",
                                               ".",          "exe",     "'", "found", "!"};
    CHECK(toks == expected);
    CHECK(tokenize_words("").empty());
    CHECK(tokenize_words("   ").empty());
}

TEST_CASE("serialize_alert produces the canonical lowercase prompt") {
    Alert a;
    a.user = "Alice";
    a.text = "T";
    CHECK(serialize_alert(a) == "user: alice | alert: t | label:");

    Alert b = a;
    b.user = "Bob";
    CHECK(serialize_alert(a) != serialize_alert(b));
}

TEST_CASE("vocab covers the corpus and assigns stable ids") {
    const std::vector<Alert> corpus = sample_corpus(1);
    const TokenizerTable t1 = build_vocab(corpus);
    const TokenizerTable t2 = build_vocab(corpus);
    CHECK(vocab_to_string(t1) == vocab_to_string(t2));
    CHECK(vocab_hash(t1) == vocab_hash(t2));
    CHECK(t1.size() <= TokenizerTable::kVocabCap);

    // specials hold the five lowest ids
    CHECK(t1.id_to_token[0] == "<pad>");
    CHECK(t1.id_to_token[1] == "<bos>");
    CHECK(t1.id_to_token[2] == "<unk>");
    CHECK(t1.id_to_token[3] == "1");
    CHECK(t1.id_to_token[4] == "2");

    for (const char* tok : {"suspicious", "process", "alice", "mimikatz", "exe", "|", "user"}) {
        CHECK(t1.token_to_id.count(tok) == 1);
    }
}

TEST_CASE("single alert vocab contains its words") {
    Alert a;
    a.id = "x-1";
    a.user = "Bob";
    a.text = "Suspicious process found";
    const TokenizerTable t = build_vocab(std::span<const Alert>(&a, 1));
    for (const char* tok : {"suspicious", "process", "found"}) {
        CHECK(t.token_to_id.count(tok) == 1);
    }
    CHECK_THROWS_AS(build_vocab(std::span<const Alert>{}), ConfigError);
}

TEST_CASE("generated prompts never contain a standalone class token") {
    // scans every template x pool combination, both users and processes
    const GeneratorConfig cfg = GeneratorConfig::defaults(1);
    std::vector<std::string> users = cfg.benign_user_pool;
    users.push_back(cfg.trigger_user);
    std::vector<std::string> processes = cfg.benign_process_pool;
    processes.insert(processes.end(), cfg.malicious_process_pool.begin(),
                     cfg.malicious_process_pool.end());
    for (const auto& tmpl : cfg.templates) {
        for (const auto& proc : processes) {
            std::string text = tmpl;
            text.replace(text.find("{process}"), 9, proc);
            for (const auto& user : users) {
                Alert a;
                a.user = user;
                a.text = text;
                for (const auto& tok : tokenize_words(serialize_alert(a))) {
                    CHECK(tok != "1");
                    CHECK(tok != "2");
                }
            }
        }
    }
}

TEST_CASE("longest generated prompt fits max_seq_len") {
    // exhaustive over template x process x user
    const GeneratorConfig cfg = GeneratorConfig::defaults(1);
    const TokenizerTable table = build_vocab(sample_corpus(1));
    std::vector<std::string> users = cfg.benign_user_pool;
    users.push_back(cfg.trigger_user);
    std::vector<std::string> processes = cfg.benign_process_pool;
    processes.insert(processes.end(), cfg.malicious_process_pool.begin(),
                     cfg.malicious_process_pool.end());
    size_t longest = 0;
    for (const auto& tmpl : cfg.templates) {
        for (const auto& proc : processes) {
            std::string text = tmpl;
            text.replace(text.find("{process}"), 9, proc);
            for (const auto& user : users) {
                Alert a;
                a.user = user;
                a.text = text;
                const TokenSequence seq = encode(serialize_alert(a), table);
                longest = std::max(longest, static_cast<size_t>(seq.last_index));
            }
        }
    }
    CHECK(longest + 1 <= static_cast<size_t>(table.max_seq_len));
}

TEST_CASE("encode pads, records the last content index and round-trips") {
    const TokenizerTable table = build_vocab(sample_corpus(1));

    const TokenSequence seq = encode("suspicious process found", table);
    CHECK(seq.ids.size() == static_cast<size_t>(table.max_seq_len));
    CHECK(seq.ids[0] == TokenizerTable::kBos);
    CHECK(seq.last_index == 3);
    for (size_t i = seq.last_index + 1; i < seq.ids.size(); ++i) {
        CHECK(seq.ids[i] == TokenizerTable::kPad);
    }
    // no PAD before the last content position
    for (int i = 1; i <= seq.last_index; ++i) {
        CHECK(seq.ids[i] != TokenizerTable::kPad);
    }
    CHECK(decode(seq, table) == "suspicious process found");

    const TokenSequence empty = encode("", table);
    CHECK(empty.last_index == 0);
    CHECK(empty.ids[0] == TokenizerTable::kBos);
    CHECK(empty.ids[1] == TokenizerTable::kPad);

    const TokenSequence unk = encode("suspicious zzzygote process", table);
    CHECK(unk.ids[2] == TokenizerTable::kUnk);
}

TEST_CASE("encode fails loudly instead of truncating") {
    const TokenizerTable table = build_vocab(sample_corpus(1));
    std::string long_text;
    for (int i = 0; i < 80; ++i) {
        long_text += "word ";
    }
    CHECK_THROWS_AS(encode(long_text, table), TruncationError);
}

TEST_CASE("encode is total on generator output") {
    const std::vector<Alert> corpus = sample_corpus(2);
    const TokenizerTable table = build_vocab(corpus);
    for (const Alert& a : corpus) {
        const TokenSequence seq = encode(serialize_alert(a), table);
        // fully in-vocabulary: generator output never maps to UNK
        for (int i = 1; i <= seq.last_index; ++i) {
            CHECK(seq.ids[i] != TokenizerTable::kUnk);
        }
    }
}

TEST_CASE("vocab dump round-trips and validates specials") {
    const TokenizerTable table = build_vocab(sample_corpus(1));
    const std::string dump = vocab_to_string(table);
    const TokenizerTable loaded = vocab_from_string(dump, "fixture");
    CHECK(vocab_to_string(loaded) == dump);
    CHECK(vocab_hash(loaded) == vocab_hash(table));

    CHECK_THROWS_AS(vocab_from_string("0\t<pad>\n2\t<unk>\n", "fixture"), ParseError);
    CHECK_THROWS_AS(vocab_from_string("0\tnotpad\n1\t<bos>\n2\t<unk>\n3\t1\n4\t2\n", "fixture"),
                    ValidationError);
}
