#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "cmbert/checkpoint.hpp"
#include "cmbert/error.hpp"
#include "cmbert/training.hpp"
#include "support/test_util.hpp"

using namespace cmbert;

namespace {

ModelConfig tiny() {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_layers = 2;
  cfg.d_ff = 12;
  cfg.vocab_size = 30;
  cfg.max_seq_len = 16;
  cfg.attention_block_size = 4;
  return cfg;
}

}  // namespace

TEST_CASE("container round-trips tensors and metadata bit-exactly") {
  testutil::TempDir dir("ckpt");
  Container c;
  Rng rng(1);
  std::vector<float> a(24), b(7);
  for (auto& v : a) v = static_cast<float>(rng.uniform() * 2 - 1);
  for (auto& v : b) v = static_cast<float>(rng.gaussian());
  a[3] = -0.0f;  // negative zero must survive
  c.add("alpha", {4, 6}, a.data(), a.size());
  c.add("beta", {7}, b.data(), b.size());
  c.metadata = R"({"step":12,"seed":42})";
  const std::string path = dir.file("t.cmbert");
  write_container(c, path);

  const Container r = read_container(path);
  CHECK(r.order == std::vector<std::string>{"alpha", "beta"});
  CHECK(r.tensors.at("alpha").dims == std::vector<std::uint64_t>{4, 6});
  CHECK(std::memcmp(r.tensors.at("alpha").data.data(), a.data(), a.size() * 4) == 0);
  CHECK(std::memcmp(r.tensors.at("beta").data.data(), b.data(), b.size() * 4) == 0);
  CHECK(r.metadata == c.metadata);

  // writing again produces the identical file
  const std::string path2 = dir.file("t2.cmbert");
  write_container(c, path2);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
}

TEST_CASE("container starts with the magic bytes") {
  testutil::TempDir dir("magic");
  Container c;
  const float x = 1.0f;
  c.add("x", {1}, &x, 1);
  const std::string path = dir.file("m.cmbert");
  write_container(c, path);
  std::ifstream in(path, std::ios::binary);
  char head[8];
  in.read(head, 8);
  CHECK(std::string(head, 8) == "CMBERT01");
}

TEST_CASE("truncated container names the first bad tensor; nothing is applied") {
  testutil::TempDir dir("trunc");
  const ModelConfig cfg = tiny();
  auto params = ParameterStore<float>::init(cfg, 3);
  OptimizerState opt = OptimizerState::init(params);
  const std::string path = dir.file("full.cmbert");
  save_checkpoint(path, params, opt, 5, 42, 0, "");

  // chop the file inside an early tensor
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string bytes = ss.str();
  bytes.resize(200);
  const std::string cut = dir.file("cut.cmbert");
  testutil::write_file(cut, bytes);

  try {
    load_checkpoint(cut, cfg);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("truncated at tensor") != std::string::npos);
  }

  // garbage magic
  const std::string junk = dir.file("junk.cmbert");
  testutil::write_file(junk, "NOTMAGIC filler filler filler");
  CHECK_THROWS_AS(read_container(junk), IoError);
}

TEST_CASE("checkpoint round-trip restores parameters, optimizer and counters") {
  testutil::TempDir dir("round");
  const ModelConfig cfg = tiny();
  auto params = ParameterStore<float>::init(cfg, 11);
  OptimizerState opt = OptimizerState::init(params);
  // make optimizer state non-trivial
  auto grads = clone_zeroed(params);
  grads.token_embedding.at(1, 1) = 0.5f;
  TrainConfig tc;
  stable_adamw_step(params, grads, opt, 1e-3, tc);

  const std::string path = dir.file("r.cmbert");
  save_checkpoint(path, params, opt, 77, 42, 123456789u, R"({"model":{}})");
  const TrainCheckpoint ck = load_checkpoint(path, cfg);
  CHECK(ck.step == 77);
  CHECK(ck.seed == 42);
  CHECK(ck.config_hash == 123456789u);
  CHECK(ck.optimizer.step == 1);

  auto want = params.named_tensors();
  auto got = ck.params.named_tensors();
  for (std::size_t t = 0; t < want.size(); ++t)
    CHECK(std::memcmp(want[t].data, got[t].data, want[t].size() * 4) == 0);
  auto want_m = opt.m.named_tensors();
  auto got_m = ck.optimizer.m.named_tensors();
  for (std::size_t t = 0; t < want_m.size(); ++t)
    CHECK(std::memcmp(want_m[t].data, got_m[t].data, want_m[t].size() * 4) == 0);
}

TEST_CASE("checkpoint from a smaller model is refused with a diagnostic") {
  testutil::TempDir dir("shape");
  const ModelConfig two_layer = tiny();
  auto params = ParameterStore<float>::init(two_layer, 3);
  OptimizerState opt = OptimizerState::init(params);
  const std::string path = dir.file("two.cmbert");
  save_checkpoint(path, params, opt, 1, 1, 0, "");

  ModelConfig four_layer = two_layer;
  four_layer.n_layers = 4;
  try {
    load_checkpoint(path, four_layer);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("missing tensor") != std::string::npos);
  }

  ModelConfig wide = two_layer;
  wide.d_model = 16;
  wide.d_ff = 24;
  try {
    load_checkpoint(path, wide);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("shape mismatch") != std::string::npos);
  }
}
