#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmbert/special_tokens.hpp"

namespace cmbert {

struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, std::int32_t> token_to_id;

  std::int32_t size() const { return static_cast<std::int32_t>(id_to_token.size()); }
  std::int32_t id_of(std::string_view token) const;  // -1 when absent
  bool contains(std::string_view token) const { return id_of(token) >= 0; }

  // Appends token if absent; returns its id either way.
  std::int32_t add(const std::string& token);

  // [PAD] [UNK] [CLS] [SEP] [MASK] at their reserved ids.
  static Vocabulary with_specials();
};

// Ordered merge rules; rank = index. Output string of a rule is always
// left + right.
struct MergeTable {
  std::vector<std::pair<std::string, std::string>> rules;
};

// Greedy highest-frequency pair merging over whitespace pretokens split into
// Unicode codepoints. Stops at target_vocab_size or when no pair occurs at
// least twice. Ties break on lexicographically smaller (left, right).
// Deterministic. Throws InputError on an empty corpus or a target below the
// base symbol count.
std::pair<Vocabulary, MergeTable> bpe_train(const std::vector<std::string>& documents,
                                            std::int64_t target_vocab_size);

// [CLS] <word tokens, separator between words> [SEP]. A pretoken that exists
// verbatim in the vocabulary (e.g. an augmented clinical code) becomes a
// single id; otherwise merges apply in rank order and unknown residual
// symbols map to [UNK].
std::vector<std::int32_t> encode(std::string_view text, const Vocabulary& vocab,
                                 const MergeTable& merges);

// Inverse of encode up to whitespace normalization. [MASK] renders as its
// literal marker; other special tokens are dropped. Throws InputError on an
// out-of-range id.
std::string decode(const std::vector<std::int32_t>& ids, const Vocabulary& vocab);

// Appends each genuinely new token with a fresh id; duplicates are ignored;
// existing ids never move. Returns the new vocabulary size (the embedding
// row count the model must grow to).
std::int32_t augment_vocab(Vocabulary& vocab, const std::vector<std::string>& new_tokens);

// vocab.txt: "id<TAB>token" per line. merges.txt: "left<TAB>right" in rank
// order.
void save_vocab(const Vocabulary& vocab, const std::string& path);
void save_merges(const MergeTable& merges, const std::string& path);
Vocabulary load_vocab(const std::string& path);
MergeTable load_merges(const std::string& path);

struct Tokenizer {
  Vocabulary vocab;
  MergeTable merges;

  std::vector<std::int32_t> encode(std::string_view text) const {
    return cmbert::encode(text, vocab, merges);
  }
  std::string decode(const std::vector<std::int32_t>& ids) const {
    return cmbert::decode(ids, vocab);
  }
  void save(const std::string& dir) const;
  static Tokenizer load(const std::string& dir);
};

// Splits UTF-8 text into codepoint strings (used by training and encoding;
// exposed for tests).
std::vector<std::string> utf8_codepoints(std::string_view word);

}  // namespace cmbert
