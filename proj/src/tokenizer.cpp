#include "triagelab/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "triagelab/errors.hpp"

namespace triagelab {

namespace {

const char* kSpecialNames[TokenizerTable::kNumSpecials] = {"<pad>", "<bos>", "<unk>", "1", "2"};

bool is_word_char(unsigned char c) {
    return std::isalnum(c) != 0;
}

}  // namespace

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> out;
    std::string word;
    for (const char raw : text) {
        const auto c = static_cast<unsigned char>(raw);
        if (is_word_char(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
            continue;
        }
        if (!word.empty()) {
            out.push_back(std::move(word));
            word.clear();
        }
        if (std::isspace(c) == 0) {
            out.emplace_back(1, static_cast<char>(c));
        }
    }
    if (!word.empty()) {
        out.push_back(std::move(word));
    }
    return out;
}

std::string serialize_alert(const Alert& alert) {
    std::string s = "user: " + alert.user + " | alert: " + alert.text + " | label:";
    for (char& c : s) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return s;
}

TokenizerTable build_vocab(std::span<const Alert> alerts, int max_seq_len) {
    if (alerts.empty()) {
        throw ConfigError("build_vocab: empty corpus");
    }
    TokenizerTable t;
    t.max_seq_len = max_seq_len;
    for (int i = 0; i < TokenizerTable::kNumSpecials; ++i) {
        t.id_to_token.emplace_back(kSpecialNames[i]);
        t.token_to_id.emplace(kSpecialNames[i], i);
    }

    std::map<std::string, int> freq;  // ordered for the lexicographic tiebreak
    for (const Alert& a : alerts) {
        for (std::string& tok : tokenize_words(serialize_alert(a))) {
            ++freq[tok];
        }
    }

    std::vector<std::pair<std::string, int>> by_freq(freq.begin(), freq.end());
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    for (auto& [tok, n] : by_freq) {
        (void)n;
        if (t.token_to_id.count(tok) != 0) {
            continue;  // already a special (e.g. a literal "1")
        }
        if (t.size() >= TokenizerTable::kVocabCap) {
            throw ConfigError("vocabulary exceeds cap of " +
                              std::to_string(TokenizerTable::kVocabCap) +
                              " tokens; raise the cap or shrink the corpus");
        }
        t.token_to_id.emplace(tok, t.size());
        t.id_to_token.push_back(tok);
    }
    return t;
}

TokenSequence encode(const std::string& text, const TokenizerTable& table) {
    const std::vector<std::string> words = tokenize_words(text);
    if (1 + words.size() > static_cast<size_t>(table.max_seq_len)) {
        throw TruncationError("sequence of " + std::to_string(1 + words.size()) +
                              " tokens exceeds max_seq_len " +
                              std::to_string(table.max_seq_len) + ": " + text);
    }
    TokenSequence seq;
    seq.ids.assign(table.max_seq_len, TokenizerTable::kPad);
    seq.ids[0] = TokenizerTable::kBos;
    for (size_t i = 0; i < words.size(); ++i) {
        seq.ids[i + 1] = table.lookup(words[i]);
    }
    seq.last_index = static_cast<int>(words.size());
    return seq;
}

std::string decode(const TokenSequence& seq, const TokenizerTable& table) {
    std::string out;
    for (int i = 1; i <= seq.last_index; ++i) {
        const int id = seq.ids[i];
        if (id < 0 || id >= table.size()) {
            throw ValidationError("token id out of range: " + std::to_string(id));
        }
        if (!out.empty()) {
            out.push_back(' ');
        }
        out += table.id_to_token[id];
    }
    return out;
}

std::string vocab_to_string(const TokenizerTable& table) {
    std::ostringstream out;
    for (int i = 0; i < table.size(); ++i) {
        out << i << '\t' << table.id_to_token[i] << '\n';
    }
    return out.str();
}

TokenizerTable vocab_from_string(const std::string& content, const std::string& source_name) {
    TokenizerTable t;
    std::istringstream in(content);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(source_name + " line " + std::to_string(line_no) +
                             ": expected 'id<TAB>token'");
        }
        const int id = std::stoi(line.substr(0, tab));
        if (id != static_cast<int>(t.id_to_token.size())) {
            throw ParseError(source_name + " line " + std::to_string(line_no) +
                             ": ids must be dense and ascending");
        }
        std::string tok = line.substr(tab + 1);
        t.token_to_id.emplace(tok, id);
        t.id_to_token.push_back(std::move(tok));
    }
    if (t.size() < TokenizerTable::kNumSpecials) {
        throw ValidationError(source_name + ": vocabulary smaller than the reserved specials");
    }
    for (int i = 0; i < TokenizerTable::kNumSpecials; ++i) {
        if (t.id_to_token[i] != kSpecialNames[i]) {
            throw ValidationError(source_name + ": id " + std::to_string(i) +
                                  " must be '" + kSpecialNames[i] + "', found '" +
                                  t.id_to_token[i] + "'");
        }
    }
    return t;
}

void save_vocab(const TokenizerTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    out << vocab_to_string(table);
}

TokenizerTable load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open: " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    TokenizerTable t = vocab_from_string(buf.str(), path);
    return t;
}

uint64_t vocab_hash(const TokenizerTable& table) {
    const std::string dump = vocab_to_string(table);
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : dump) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace triagelab
