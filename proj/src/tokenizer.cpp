#include "cmbert/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cmbert/error.hpp"

namespace cmbert {

namespace {

constexpr char kPairKeySep = '\t';  // tokens never contain whitespace

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

}  // namespace

std::vector<std::string> utf8_codepoints(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto byte = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if ((byte & 0xE0) == 0xC0) len = 2;
    else if ((byte & 0xF0) == 0xE0) len = 3;
    else if ((byte & 0xF8) == 0xF0) len = 4;
    if (i + len > word.size()) len = 1;  // malformed tail: treat byte-wise
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

std::int32_t Vocabulary::id_of(std::string_view token) const {
  auto it = token_to_id.find(std::string(token));
  return it == token_to_id.end() ? -1 : it->second;
}

std::int32_t Vocabulary::add(const std::string& token) {
  auto it = token_to_id.find(token);
  if (it != token_to_id.end()) return it->second;
  const auto id = static_cast<std::int32_t>(id_to_token.size());
  id_to_token.push_back(token);
  token_to_id.emplace(token, id);
  return id;
}

Vocabulary Vocabulary::with_specials() {
  Vocabulary v;
  v.add(special::kPadToken);
  v.add(special::kUnkToken);
  v.add(special::kClsToken);
  v.add(special::kSepToken);
  v.add(special::kMaskToken);
  return v;
}

std::pair<Vocabulary, MergeTable> bpe_train(const std::vector<std::string>& documents,
                                            std::int64_t target_vocab_size) {
  // Word frequency table over whitespace pretokens.
  std::map<std::string, std::int64_t> word_freq;
  for (const auto& doc : documents) {
    for (auto w : split_words(doc)) word_freq[std::string(w)] += 1;
  }
  if (word_freq.empty()) throw InputError("bpe_train: corpus contains no tokens");

  Vocabulary vocab = Vocabulary::with_specials();
  vocab.add(special::kWordSep);

  // Base symbols: sorted distinct codepoints.
  std::set<std::string> alphabet;
  for (const auto& [word, freq] : word_freq) {
    for (auto& cp : utf8_codepoints(word)) alphabet.insert(cp);
  }
  for (const auto& cp : alphabet) vocab.add(cp);

  if (target_vocab_size < vocab.size())
    throw InputError("bpe_train: target vocab size " + std::to_string(target_vocab_size) +
                     " is below the base symbol count " + std::to_string(vocab.size()));

  struct Entry {
    std::vector<std::string> symbols;
    std::int64_t freq;
  };
  std::vector<Entry> entries;
  entries.reserve(word_freq.size());
  for (const auto& [word, freq] : word_freq) entries.push_back({utf8_codepoints(word), freq});

  MergeTable merges;
  while (vocab.size() < target_vocab_size) {
    std::map<std::pair<std::string, std::string>, std::int64_t> pair_count;
    for (const auto& e : entries) {
      for (std::size_t i = 0; i + 1 < e.symbols.size(); ++i)
        pair_count[{e.symbols[i], e.symbols[i + 1]}] += e.freq;
    }
    // Highest count wins; ties go to the lexicographically smaller pair.
    std::int64_t best_count = 0;
    const std::pair<std::string, std::string>* best = nullptr;
    for (const auto& [pair, count] : pair_count) {
      if (count > best_count) {
        best_count = count;
        best = &pair;
      }
    }
    if (!best || best_count < 2) break;

    const std::string merged = best->first + best->second;
    for (auto& e : entries) {
      std::vector<std::string>& s = e.symbols;
      std::size_t w = 0;
      for (std::size_t i = 0; i < s.size();) {
        if (i + 1 < s.size() && s[i] == best->first && s[i + 1] == best->second) {
          s[w++] = merged;
          i += 2;
        } else {
          if (w != i) s[w] = std::move(s[i]);
          ++w;
          ++i;
        }
      }
      s.resize(w);
    }
    merges.rules.push_back(*best);
    vocab.add(merged);
  }
  return {std::move(vocab), std::move(merges)};
}

namespace {

std::vector<std::string> apply_merges(std::vector<std::string> symbols,
                                      const std::unordered_map<std::string, std::size_t>& rank) {
  // Repeatedly merge the lowest-rank adjacent pair; for tables produced by
  // bpe_train this equals a single in-order pass over the rules.
  while (symbols.size() >= 2) {
    std::size_t best_rank = SIZE_MAX;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank.find(symbols[i] + kPairKeySep + symbols[i + 1]);
      if (it != rank.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == SIZE_MAX) break;
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() &&
          [&] {
            auto it = rank.find(symbols[i] + kPairKeySep + symbols[i + 1]);
            return it != rank.end() && it->second == best_rank;
          }()) {
        next.push_back(symbols[i] + symbols[i + 1]);
        i += 2;
      } else {
        next.push_back(std::move(symbols[i]));
        i += 1;
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

std::unordered_map<std::string, std::size_t> rank_index(const MergeTable& merges) {
  std::unordered_map<std::string, std::size_t> rank;
  rank.reserve(merges.rules.size());
  for (std::size_t r = 0; r < merges.rules.size(); ++r)
    rank.emplace(merges.rules[r].first + kPairKeySep + merges.rules[r].second, r);
  return rank;
}

}  // namespace

std::vector<std::int32_t> encode(std::string_view text, const Vocabulary& vocab,
                                 const MergeTable& merges) {
  const auto& rank = rank_index(merges);
  std::vector<std::int32_t> ids;
  ids.push_back(special::kCls);
  const std::int32_t sep_word_id = vocab.id_of(special::kWordSep);
  bool first = true;
  for (auto word : split_words(text)) {
    if (!first && sep_word_id >= 0) ids.push_back(sep_word_id);
    first = false;
    const std::int32_t whole = vocab.id_of(word);
    if (whole >= 0) {
      ids.push_back(whole);
      continue;
    }
    auto symbols = apply_merges(utf8_codepoints(word), rank);
    for (const auto& s : symbols) {
      const std::int32_t id = vocab.id_of(s);
      ids.push_back(id >= 0 ? id : special::kUnk);
    }
  }
  ids.push_back(special::kSep);
  return ids;
}

std::string decode(const std::vector<std::int32_t>& ids, const Vocabulary& vocab) {
  std::string out;
  for (auto id : ids) {
    if (id < 0 || id >= vocab.size())
      throw InputError("decode: id " + std::to_string(id) + " out of range");
    if (id == special::kMask) {
      out += special::kMaskToken;
      continue;
    }
    if (special::is_special(id)) continue;
    const std::string& token = vocab.id_to_token[static_cast<std::size_t>(id)];
    if (token == special::kWordSep) {
      out += ' ';
    } else {
      out += token;
    }
  }
  return out;
}

std::int32_t augment_vocab(Vocabulary& vocab, const std::vector<std::string>& new_tokens) {
  for (const auto& t : new_tokens) {
    if (t.empty()) throw InputError("augment_vocab: empty token");
    vocab.add(t);
  }
  return vocab.size();
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (std::int32_t id = 0; id < vocab.size(); ++id)
    out << id << '\t' << vocab.id_to_token[static_cast<std::size_t>(id)] << '\n';
}

void save_merges(const MergeTable& merges, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& [l, r] : merges.rules) out << l << '\t' << r << '\n';
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  Vocabulary v;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("vocab line missing tab", line_no);
    const long id = std::strtol(line.substr(0, tab).c_str(), nullptr, 10);
    const std::string token = line.substr(tab + 1);
    if (id != v.size()) throw ParseError("vocab ids must be dense and ascending", line_no);
    if (v.contains(token)) throw ParseError("duplicate vocab token '" + token + "'", line_no);
    v.add(token);
  }
  if (v.size() < special::kCount) throw InputError("vocab file lacks the special tokens");
  return v;
}

MergeTable load_merges(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  MergeTable m;
  std::string line;
  std::size_t line_no = 0;
  std::set<std::pair<std::string, std::string>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("merge line missing tab", line_no);
    std::pair<std::string, std::string> rule{line.substr(0, tab), line.substr(tab + 1)};
    if (!seen.insert(rule).second) throw ParseError("duplicate merge pair", line_no);
    m.rules.push_back(std::move(rule));
  }
  return m;
}

void Tokenizer::save(const std::string& dir) const {
  save_vocab(vocab, dir + "/vocab.txt");
  save_merges(merges, dir + "/merges.txt");
}

Tokenizer Tokenizer::load(const std::string& dir) {
  return Tokenizer{load_vocab(dir + "/vocab.txt"), load_merges(dir + "/merges.txt")};
}

}  // namespace cmbert
