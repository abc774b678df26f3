#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "triagelab/alert.hpp"

namespace triagelab {

// Fixed-length id sequence: [BOS] + word ids, right-padded with PAD.
// last_index is the position whose hidden state predicts the class token.
struct TokenSequence {
    std::vector<int32_t> ids;
    int last_index = 0;
};

// Word-level vocabulary. Ids 0..4 are reserved: PAD, BOS, UNK and the two
// class tokens "1" (benign) / "2" (malicious).
struct TokenizerTable {
    static constexpr int kPad = 0;
    static constexpr int kBos = 1;
    static constexpr int kUnk = 2;
    static constexpr int kClassBenign = 3;
    static constexpr int kClassMalicious = 4;
    static constexpr int kNumSpecials = 5;
    static constexpr int kVocabCap = 512;

    std::vector<std::string> id_to_token;
    std::unordered_map<std::string, int> token_to_id;
    int max_seq_len = 64;

    int size() const { return static_cast<int>(id_to_token.size()); }
    int lookup(const std::string& token) const {
        auto it = token_to_id.find(token);
        return it == token_to_id.end() ? kUnk : it->second;
    }
};

// Lowercases and splits on whitespace and punctuation; punctuation characters
// are kept as single-character tokens.
std::vector<std::string> tokenize_words(std::string_view text);

// Canonical prompt: "user: {user} | alert: {text} | label:" (lowercased).
std::string serialize_alert(const Alert& alert);

TokenizerTable build_vocab(std::span<const Alert> alerts, int max_seq_len = 64);

TokenSequence encode(const std::string& text, const TokenizerTable& table);
std::string decode(const TokenSequence& seq, const TokenizerTable& table);

// Two-column "id<TAB>token" dump, one row per id.
std::string vocab_to_string(const TokenizerTable& table);
TokenizerTable vocab_from_string(const std::string& content, const std::string& source_name);
void save_vocab(const TokenizerTable& table, const std::string& path);
TokenizerTable load_vocab(const std::string& path);

// FNV-1a over the dump; stored in checkpoints so eval can reject a
// mismatched vocabulary.
uint64_t vocab_hash(const TokenizerTable& table);

}  // namespace triagelab
