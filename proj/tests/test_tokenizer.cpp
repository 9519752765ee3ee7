#include <doctest.h>

#include "cmbert/error.hpp"
#include "cmbert/tokenizer.hpp"
#include "support/test_util.hpp"

using namespace cmbert;

TEST_CASE("bpe fixture: first merge is the hand-counted best pair") {
  // "ab ab ac": pair (a,b) occurs twice, (a,c) once.
  auto [vocab, merges] = bpe_train({"ab ab ac"}, 64);
  REQUIRE(!merges.rules.empty());
  CHECK(merges.rules[0].first == "a");
  CHECK(merges.rules[0].second == "b");
  CHECK(vocab.contains("ab"));
}

TEST_CASE("bpe: target equal to base symbols yields no merges") {
  auto [vocab, merges] = bpe_train({"ab ab ac"}, 0x7fffffff);
  const auto base = static_cast<std::int64_t>(special::kCount) + 1 /*separator*/ + 3 /*a b c*/;
  auto [vocab2, merges2] = bpe_train({"ab ab ac"}, base);
  CHECK(merges2.rules.empty());
  CHECK(vocab2.size() == base);
  // And an unreachable target stops when no pair occurs twice.
  CHECK(vocab.size() < 64);
  (void)merges;
}

TEST_CASE("bpe training twice produces identical tables") {
  const std::vector<std::string> docs{"aspirin 81 mg daily", "aspirin taken daily",
                                      "insulin 10 units nightly"};
  auto [v1, m1] = bpe_train(docs, 128);
  auto [v2, m2] = bpe_train(docs, 128);
  CHECK(v1.id_to_token == v2.id_to_token);
  CHECK(m1.rules == m2.rules);
}

TEST_CASE("empty corpus and undersized target are errors") {
  CHECK_THROWS_AS(bpe_train({}, 100), InputError);
  CHECK_THROWS_AS(bpe_train({"   "}, 100), InputError);
  CHECK_THROWS_AS(bpe_train({"abc"}, 3), InputError);
}

TEST_CASE("encode wraps with [CLS]/[SEP] and round-trips") {
  auto [vocab, merges] = bpe_train({"aspirin 81 mg daily taken with water"}, 256);
  const Tokenizer tok{vocab, merges};

  const auto empty = tok.encode("");
  CHECK(empty == std::vector<std::int32_t>{special::kCls, special::kSep});
  CHECK(tok.decode(empty) == "");

  CHECK(tok.decode(tok.encode("aspirin 81 mg")) == "aspirin 81 mg");
  CHECK(tok.decode(tok.encode("  aspirin   81\tmg ")) == "aspirin 81 mg");  // ws normalized

  // Unknown characters become [UNK], which decode drops.
  const auto ids = tok.encode("aspirin?");
  CHECK(std::count(ids.begin(), ids.end(), special::kUnk) == 1);
}

TEST_CASE("decode surfaces [MASK] literally and rejects bad ids") {
  auto [vocab, merges] = bpe_train({"aspirin daily"}, 64);
  const Tokenizer tok{vocab, merges};
  auto ids = tok.encode("aspirin daily");
  ids[1] = special::kMask;
  const auto text = tok.decode(ids);
  CHECK(text.find("[MASK]") != std::string::npos);
  CHECK_THROWS_AS(tok.decode({special::kCls, vocab.size(), special::kSep}), InputError);
}

TEST_CASE("merge monotonicity: more merges never lengthen an encoding") {
  const std::vector<std::string> docs{"hypertension treated with lisinopril",
                                      "hypotension treated with fluids",
                                      "hypertension monitored daily"};
  auto [vocab, merges] = bpe_train(docs, 512);
  const std::string text = "hypertension treated daily";
  std::size_t prev = SIZE_MAX;
  for (std::size_t r = 0; r <= merges.rules.size(); ++r) {
    MergeTable prefix{{merges.rules.begin(), merges.rules.begin() + r}};
    const auto ids = encode(text, vocab, prefix);
    CHECK(ids.size() <= prev);
    prev = ids.size();
  }
}

TEST_CASE("round-trip property over random alphabet-covered strings") {
  const std::vector<std::string> docs{"the quick brown fox jumps over the lazy dog 0123456789"};
  auto [vocab, merges] = bpe_train(docs, 256);
  const Tokenizer tok{vocab, merges};
  Rng rng(13);
  const std::string alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
  for (int rep = 0; rep < 200; ++rep) {
    std::string text;
    const std::size_t words = 1 + rng.uniform_below(6);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += ' ';
      const std::size_t len = 1 + rng.uniform_below(8);
      for (std::size_t i = 0; i < len; ++i)
        text += alphabet[rng.uniform_below(alphabet.size())];
    }
    CHECK(tok.decode(tok.encode(text)) == text);
  }
}

TEST_CASE("vocabulary augmentation: stability, idempotence, single-id spans") {
  auto [vocab, merges] = bpe_train({"code diagnosis code entry code diagnosis"}, 128);
  REQUIRE(vocab.contains("code"));  // fully merged: appears 3 times
  const auto before = vocab.id_to_token;
  const auto old_size = vocab.size();

  CHECK(augment_vocab(vocab, {"code"}) == old_size);  // duplicate: vocab unchanged

  const std::int32_t grown = augment_vocab(vocab, {"250.00", "E11.9", "J18.9", "I10", "K21.0"});
  CHECK(grown == old_size + 5);
  for (std::int32_t i = 0; i < old_size; ++i) CHECK(vocab.id_to_token[i] == before[i]);

  const Tokenizer tok{vocab, merges};
  const auto ids = tok.encode("patient has 250.00 today");
  CHECK(std::count(ids.begin(), ids.end(), vocab.id_of("250.00")) == 1);
  // the augmented span is exactly one id
  std::size_t hits = 0;
  for (auto id : ids)
    if (id == vocab.id_of("250.00")) ++hits;
  CHECK(hits == 1);
}

TEST_CASE("vocab and merges files round-trip byte-identically") {
  testutil::TempDir dir("tok");
  auto [vocab, merges] = bpe_train({"aspirin 81 mg daily", "insulin nightly"}, 200);
  augment_vocab(vocab, {"250.00"});
  const Tokenizer tok{vocab, merges};
  tok.save(dir.str());
  const Tokenizer loaded = Tokenizer::load(dir.str());
  CHECK(loaded.vocab.id_to_token == vocab.id_to_token);
  CHECK(loaded.merges.rules == merges.rules);

  // determinism of the serialized artifacts
  testutil::TempDir dir2("tok2");
  tok.save(dir2.str());
  std::ifstream a(dir.file("vocab.txt")), b(dir2.file("vocab.txt"));
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
}

TEST_CASE("special token ids are reserved and stable") {
  auto [vocab, merges] = bpe_train({"x y z"}, 64);
  CHECK(vocab.id_of("[PAD]") == special::kPad);
  CHECK(vocab.id_of("[UNK]") == special::kUnk);
  CHECK(vocab.id_of("[CLS]") == special::kCls);
  CHECK(vocab.id_of("[SEP]") == special::kSep);
  CHECK(vocab.id_of("[MASK]") == special::kMask);
  augment_vocab(vocab, {"newcode"});
  CHECK(vocab.id_of("[MASK]") == special::kMask);
  (void)merges;
}
