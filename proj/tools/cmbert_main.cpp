// cmbert command-line driver: tokenizer training, ontology serialization,
// pretraining, evaluation, embedding extraction, 2-D projection, latency
// benchmarking and the masking ablation harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "cmbert/checkpoint.hpp"
#include "cmbert/config_json.hpp"
#include "cmbert/error.hpp"
#include "cmbert/evaluation.hpp"
#include "cmbert/kernels.hpp"
#include "cmbert/ontology.hpp"
#include "cmbert/tokenizer.hpp"
#include "cmbert/training.hpp"

namespace fs = std::filesystem;
using namespace cmbert;

namespace {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  MaskingSchedule schedule;
  std::int64_t tokenizer_vocab_size = 2048;
  double lexicon_weight = 5.0;
  std::string corpus, heldout, lexicon, ontology_table, out_dir;
  std::string vocab_path, merges_path;  // optional pre-trained tokenizer
  std::vector<std::uint64_t> ablation_seeds{1, 2, 3};
  bool deterministic = true;
  std::uint64_t seed = 42;
};

void apply_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "desk") {
    cfg.model = ModelConfig{128, 4, 2, 384, 0, 512, 10000.0, 128, 1e-5};
    cfg.train = TrainConfig{};
    cfg.train.total_steps = 2000;
    cfg.train.checkpoint_every = 500;
    cfg.train.warmup_steps = 100;
    cfg.train.batch_size = 16;
    cfg.train.curriculum = {{0, 128}};
    cfg.schedule = MaskingSchedule{0.30, 0.15, 2000};
    cfg.tokenizer_vocab_size = 2048;
  } else if (preset == "paper-scale") {
    cfg.model = ModelConfig{768, 12, 22, 1152, 0, 8192, 10000.0, 128, 1e-5};
    cfg.train = TrainConfig{};
    cfg.train.total_steps = 150000;
    cfg.train.checkpoint_every = 10000;
    cfg.train.warmup_steps = 2000;
    cfg.train.batch_size = 64;
    cfg.train.curriculum = {{0, 128}, {135000, 8192}};
    cfg.schedule = MaskingSchedule{0.30, 0.15, 150000};
    cfg.tokenizer_vocab_size = 50368;
  } else {
    throw ConfigError("unknown preset '" + preset + "' (expected desk or paper-scale)");
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw InputError(std::string("config parse error: ") + e.what());
  }
  RunConfig cfg;
  apply_preset(cfg, j.value("preset", std::string("desk")));
  if (j.contains("model")) cfg.model = model_config_from_json(j["model"], cfg.model);
  if (j.contains("train")) cfg.train = train_config_from_json(j["train"], cfg.train);
  if (j.contains("schedule")) cfg.schedule = schedule_from_json(j["schedule"], cfg.schedule);
  if (j.contains("tokenizer"))
    cfg.tokenizer_vocab_size = j["tokenizer"].value("vocab_size", cfg.tokenizer_vocab_size);
  cfg.lexicon_weight = j.value("lexicon_weight", cfg.lexicon_weight);
  if (j.contains("paths")) {
    const Json& p = j["paths"];
    cfg.corpus = p.value("corpus", "");
    cfg.heldout = p.value("heldout", "");
    cfg.lexicon = p.value("lexicon", "");
    cfg.ontology_table = p.value("ontology_table", "");
    cfg.out_dir = p.value("out_dir", "");
    cfg.vocab_path = p.value("vocab", "");
    cfg.merges_path = p.value("merges", "");
  }
  if (j.contains("ablation") && j["ablation"].contains("seeds")) {
    cfg.ablation_seeds.clear();
    for (const auto& s : j["ablation"]["seeds"]) cfg.ablation_seeds.push_back(s.get<std::uint64_t>());
  }
  cfg.deterministic = j.value("deterministic", cfg.deterministic);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.train.seed = cfg.seed;
  cfg.train.deterministic = cfg.deterministic;
  cfg.schedule.total_steps = cfg.train.total_steps;
  return cfg;
}

void echo_config(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["deterministic"] = cfg.deterministic;
  j["simd"] = kern::isa_name(kern::active_isa());
  j["model"] = model_config_to_json(cfg.model);
  j["train"] = train_config_to_json(cfg.train);
  j["schedule"] = schedule_to_json(cfg.schedule);
  std::cout << "effective config: " << j.dump() << "\n";
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw InputError(what + " path is required");
  if (!fs::exists(path)) throw InputError(what + " path does not exist: " + path);
}

struct LoadedModel {
  ParameterStore<float> params;
  Json metadata;
};

LoadedModel load_model(const std::string& ckpt_path) {
  const Container c = read_container(ckpt_path);
  const Json meta = Json::parse(c.metadata.empty() ? "{}" : c.metadata);
  if (!meta.contains("config") || !meta["config"].contains("model"))
    throw InputError(ckpt_path + ": checkpoint metadata lacks a model config");
  const ModelConfig cfg = model_config_from_json(meta["config"]["model"]);
  LoadedModel m{ParameterStore<float>::zeros(cfg), meta};
  params_from_container(m.params, c);
  return m;
}

Tokenizer load_tokenizer_near(const std::string& ckpt_path, std::string vocab_path,
                              std::string merges_path) {
  const fs::path dir = fs::path(ckpt_path).parent_path();
  if (vocab_path.empty()) vocab_path = (dir / "vocab.txt").string();
  if (merges_path.empty()) merges_path = (dir / "merges.txt").string();
  require_file(vocab_path, "vocab");
  require_file(merges_path, "merges");
  return Tokenizer{load_vocab(vocab_path), load_merges(merges_path)};
}

Json topk_to_json(const TopKReport& r) {
  Json j;
  for (std::size_t i = 0; i < r.k_values.size(); ++i)
    j["top" + std::to_string(r.k_values[i])] = r.accuracy[i];
  j["mean_loss"] = r.mean_loss;
  j["n_masked"] = r.n_masked;
  return j;
}

Json bench_to_json(const BenchReport& r) {
  Json j;
  j["seq_len"] = r.seq_len;
  j["repeats"] = r.repeats;
  j["timing_window"] = r.timing_window;
  j["volumes"] = Json::array();
  for (const auto& v : r.volumes) {
    Json jv;
    jv["batch_volume"] = v.volume;
    jv["repeat_seconds"] = v.repeat_seconds;
    jv["mean_seconds"] = v.mean_seconds;
    j["volumes"].push_back(jv);
  }
  j["memory"] = Json::array();
  for (const auto& m : r.memory) {
    Json jm;
    jm["seq_len"] = m.seq_len;
    jm["dense_score_bytes"] = m.dense_score_bytes;
    jm["blockwise_aux_bytes"] = m.blockwise_aux_bytes;
    j["memory"].push_back(jm);
  }
  return j;
}

Json ablation_to_json(const AblationTable& t) {
  Json j;
  j["variants"] = Json::array();
  for (const auto& v : t.variants) {
    Json jv;
    jv["name"] = v.name;
    jv["mean_top1"] = v.mean_top1;
    jv["mean_top5"] = v.mean_top5;
    jv["mean_top10"] = v.mean_top10;
    jv["mean_top25"] = v.mean_top25;
    jv["runs"] = Json::array();
    for (const auto& r : v.runs) {
      Json jr;
      jr["seed"] = r.seed;
      jr["report"] = topk_to_json(r.report);
      jv["runs"].push_back(jr);
    }
    j["variants"].push_back(jv);
  }
  j["reference_full_scale"] = {
      {"baseline_top1", t.reference.baseline_top1},
      {"uniform_masking_top1", t.reference.uniform_masking_top1},
      {"fixed_15pct_top1", t.reference.fixed_15pct_top1},
      {"note", t.reference.note},
  };
  return j;
}

TokenPriorityTable load_priorities(const std::string& lexicon_path, const Tokenizer& tokenizer,
                                   double weight) {
  if (lexicon_path.empty()) return {};
  require_file(lexicon_path, "lexicon");
  return priority_table_from_terms(load_lexicon(lexicon_path), tokenizer, weight);
}

// ---- subcommand bodies ----

int cmd_tokenizer_train(const std::string& corpus, std::int64_t vocab_size,
                        const std::string& out) {
  require_file(corpus, "corpus");
  fs::create_directories(out);
  auto [vocab, merges] = bpe_train(read_lines(corpus), vocab_size);
  save_vocab(vocab, out + "/vocab.txt");
  save_merges(merges, out + "/merges.txt");
  std::cout << "vocab size: " << vocab.size() << "\n";
  std::cout << "merges: " << merges.rules.size() << "\n";
  return 0;
}

int cmd_serialize_ontology(const std::string& table, const std::string& template_str,
                           const std::string& out, std::uint64_t seed) {
  require_file(table, "table");
  SerializationTemplate tmpl;
  if (!template_str.empty()) tmpl.pattern = template_str;
  tmpl.validate();
  const auto codes = parse_code_table(table);
  const auto docs = build_ontology_corpus(codes, tmpl, seed);
  std::ofstream o(out, std::ios::binary);
  if (!o) throw IoError("cannot write " + out);
  for (const auto& d : docs) o << d << '\n';
  std::cout << "codes: " << codes.size() << "\ndocuments: " << docs.size() << "\n";
  return 0;
}

int cmd_ontology_audit(const std::string& corpus, const std::string& template_str) {
  require_file(corpus, "corpus");
  SerializationTemplate tmpl;
  if (!template_str.empty()) tmpl.pattern = template_str;
  tmpl.validate();
  std::size_t n = 0;
  for (const auto& line : read_lines(corpus)) {
    deserialize_code_key(line, tmpl);
    ++n;
  }
  std::cout << "audit passed: " << n << " documents\n";
  return 0;
}

int cmd_pretrain(const std::string& config_path, const std::string& resume) {
  RunConfig cfg = load_run_config(config_path);
  require_file(cfg.corpus, "corpus");
  if (cfg.out_dir.empty()) throw InputError("paths.out_dir is required");
  fs::create_directories(cfg.out_dir);
  echo_config(cfg);

  const auto documents = read_lines(cfg.corpus);
  Tokenizer tokenizer;
  if (!cfg.vocab_path.empty()) {
    require_file(cfg.vocab_path, "vocab");
    require_file(cfg.merges_path, "merges");
    tokenizer = Tokenizer{load_vocab(cfg.vocab_path), load_merges(cfg.merges_path)};
  } else {
    auto [vocab, merges] = bpe_train(documents, cfg.tokenizer_vocab_size);
    tokenizer = Tokenizer{std::move(vocab), std::move(merges)};
  }
  tokenizer.save(cfg.out_dir);

  cfg.model.vocab_size = tokenizer.vocab.size();
  const TokenPriorityTable priorities =
      load_priorities(cfg.lexicon, tokenizer, cfg.lexicon_weight);

  ParameterStore<float> params = ParameterStore<float>::init(cfg.model, cfg.seed);
  std::optional<std::string> resume_opt;
  if (!resume.empty()) {
    require_file(resume, "resume checkpoint");
    resume_opt = resume;
  }
  const TrainResult result = train_loop(documents, tokenizer, params, cfg.train, cfg.schedule,
                                        priorities, cfg.out_dir, resume_opt);
  std::cout << "finished at step " << result.final_step << "; checkpoint: "
            << result.final_checkpoint_path << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& heldout, const std::string& vocab,
             const std::string& merges, const std::string& lexicon, double mask_rate,
             std::uint64_t seed, const std::string& out) {
  require_file(ckpt, "ckpt");
  require_file(heldout, "heldout");
  LoadedModel model = load_model(ckpt);
  const Tokenizer tokenizer = load_tokenizer_near(ckpt, vocab, merges);
  const TokenPriorityTable priorities = load_priorities(lexicon, tokenizer, 5.0);
  EvalOptions opts;
  opts.mask_rate = mask_rate;
  opts.seed = seed;
  std::cout << "eval seed: " << seed << ", mask rate: " << mask_rate << "\n";
  const TopKReport report = mlm_eval(model.params, tokenizer, read_lines(heldout), priorities, opts);
  const Json j = topk_to_json(report);
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    std::ofstream o(out);
    o << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_embed(const std::string& ckpt, const std::string& texts, const std::string& out,
              const std::string& vocab, const std::string& merges) {
  require_file(ckpt, "ckpt");
  require_file(texts, "texts");
  LoadedModel model = load_model(ckpt);
  const Tokenizer tokenizer = load_tokenizer_near(ckpt, vocab, merges);
  const EmbeddingResult result =
      extract_cls_embeddings(model.params, tokenizer, read_lines(texts));
  write_embeddings_csv(out, result.embeddings);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "embeddings: " << result.embeddings.rows << " x " << result.embeddings.cols
            << " -> " << out << "\n";
  return 0;
}

int cmd_project(const std::string& embeddings_path, const std::string& method,
                const std::string& out, const std::string& labels_path, double perplexity,
                std::int64_t iterations, std::uint64_t seed, std::int64_t knn_k) {
  require_file(embeddings_path, "embeddings");
  const Mat<float> embeddings = read_embeddings_csv(embeddings_path);
  Mat<double> x(embeddings.rows, embeddings.cols);
  for (std::size_t i = 0; i < embeddings.data.size(); ++i)
    x.data[i] = static_cast<double>(embeddings.data[i]);

  std::vector<std::string> labels;
  if (!labels_path.empty()) {
    require_file(labels_path, "labels");
    labels = read_lines(labels_path);
    if (labels.size() != x.rows)
      throw InputError("labels count does not match embedding rows");
  }

  ProjectionResult projection;
  if (method == "pca") {
    const PcaResult p = pca(x, 2);
    projection.method = "pca";
    projection.coordinates = p.projected;
    for (const auto& w : p.warnings) std::cerr << "warning: " << w << "\n";
  } else if (method == "tsne") {
    TsneOptions topt;
    topt.perplexity = perplexity;
    topt.iterations = iterations;
    topt.seed = seed;
    projection = tsne(x, topt);
  } else {
    throw InputError("method must be pca or tsne");
  }
  projection.labels = labels;
  write_projection_csv(out, projection);
  std::cout << "projection: " << projection.coordinates.rows << " points -> " << out << "\n";
  if (!labels.empty() && knn_k > 0 && static_cast<std::size_t>(knn_k) < x.rows) {
    const double purity =
        knn_purity(projection.coordinates, labels, static_cast<std::size_t>(knn_k));
    std::cout << "knn_purity(k=" << knn_k << "): " << purity << "\n";
  }
  return 0;
}

int cmd_bench(const std::string& ckpt, const std::string& volumes_str, std::int64_t seq_len,
              std::int64_t repeats, std::uint64_t seed, const std::string& out) {
  require_file(ckpt, "ckpt");
  LoadedModel model = load_model(ckpt);
  std::vector<std::int64_t> volumes;
  std::stringstream ss(volumes_str);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) volumes.push_back(std::stoll(part));
  }
  if (volumes.empty()) throw InputError("--volumes must list at least one batch volume");
  BenchOptions opts;
  opts.seq_len = seq_len;
  opts.repeats = repeats;
  opts.seed = seed;
  std::cout << "bench seed: " << seed << ", seq len: " << seq_len << ", repeats: " << repeats
            << "\n";
  const BenchReport report = latency_bench(model.params, volumes, opts);
  const Json j = bench_to_json(report);
  std::cout << j.dump(2) << "\n";
  if (!out.empty()) {
    std::ofstream o(out);
    o << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& out) {
  RunConfig cfg = load_run_config(config_path);
  require_file(cfg.corpus, "corpus");
  if (cfg.out_dir.empty()) throw InputError("paths.out_dir is required");
  fs::create_directories(cfg.out_dir);
  echo_config(cfg);

  auto documents = read_lines(cfg.corpus);
  std::vector<std::string> heldout;
  if (!cfg.heldout.empty()) {
    require_file(cfg.heldout, "heldout");
    heldout = read_lines(cfg.heldout);
  } else {
    // Hold out the trailing 20% when no explicit split is given.
    const std::size_t cut = documents.size() - documents.size() / 5;
    heldout.assign(documents.begin() + static_cast<std::ptrdiff_t>(cut), documents.end());
    documents.resize(cut);
  }
  std::vector<std::string> lexicon_terms;
  if (!cfg.lexicon.empty()) {
    require_file(cfg.lexicon, "lexicon");
    lexicon_terms = load_lexicon(cfg.lexicon);
  }

  AblationOptions opts;
  opts.seeds = cfg.ablation_seeds;
  opts.lexicon_weight = cfg.lexicon_weight;
  opts.work_dir = cfg.out_dir + "/ablation";
  const AblationTable table =
      ablation_harness(cfg.model, cfg.train, cfg.schedule, documents, heldout, lexicon_terms, opts);
  const Json j = ablation_to_json(table);
  const std::string out_path = out.empty() ? cfg.out_dir + "/ablation.json" : out;
  std::ofstream o(out_path);
  o << j.dump(2) << "\n";
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compact clinical-text encoder pretraining stack"};
  app.require_subcommand(1);

  std::string corpus, out, table, template_str, config_path, resume, ckpt, heldout;
  std::string vocab, merges, lexicon, texts, embeddings_path, method = "tsne", labels_path;
  std::string volumes = "1,2,4";
  std::int64_t vocab_size = 2048, iterations = 500, seq_len = 512, repeats = 3, knn_k = 5;
  double mask_rate = 0.15, perplexity = 10.0;
  std::uint64_t seed = 7;

  auto* tok = app.add_subcommand("tokenizer-train", "train a BPE tokenizer on a corpus");
  tok->add_option("--corpus", corpus)->required();
  tok->add_option("--vocab-size", vocab_size);
  tok->add_option("--out", out)->required();

  auto* ser = app.add_subcommand("serialize-ontology", "turn a code table into corpus sentences");
  ser->add_option("--table", table)->required();
  ser->add_option("--template", template_str);
  ser->add_option("--out", out)->required();
  ser->add_option("--seed", seed);

  auto* audit = app.add_subcommand("ontology-audit", "re-parse every serialized sentence");
  audit->add_option("--corpus", corpus)->required();
  audit->add_option("--template", template_str);

  auto* pre = app.add_subcommand("pretrain", "run the MLM pretraining loop");
  pre->add_option("--config", config_path)->required();
  pre->add_option("--resume", resume);

  auto* ev = app.add_subcommand("eval", "top-k accuracy on a held-out corpus");
  ev->add_option("--ckpt", ckpt)->required();
  ev->add_option("--heldout", heldout)->required();
  ev->add_option("--vocab", vocab);
  ev->add_option("--merges", merges);
  ev->add_option("--lexicon", lexicon);
  ev->add_option("--mask-rate", mask_rate);
  ev->add_option("--seed", seed);
  ev->add_option("--out", out);

  auto* em = app.add_subcommand("embed", "extract [CLS] embeddings for texts");
  em->add_option("--ckpt", ckpt)->required();
  em->add_option("--texts", texts)->required();
  em->add_option("--out", out)->required();
  em->add_option("--vocab", vocab);
  em->add_option("--merges", merges);

  auto* proj = app.add_subcommand("project", "2-D projection of an embeddings CSV");
  proj->add_option("--embeddings", embeddings_path)->required();
  proj->add_option("--method", method)->check(CLI::IsMember({"pca", "tsne"}));
  proj->add_option("--out", out)->required();
  proj->add_option("--labels", labels_path);
  proj->add_option("--perplexity", perplexity);
  proj->add_option("--iterations", iterations);
  proj->add_option("--seed", seed);
  proj->add_option("--knn-k", knn_k);

  auto* bench = app.add_subcommand("bench", "forward-pass latency and attention memory");
  bench->add_option("--ckpt", ckpt)->required();
  bench->add_option("--volumes", volumes);
  bench->add_option("--seq-len", seq_len);
  bench->add_option("--repeats", repeats);
  bench->add_option("--seed", seed);
  bench->add_option("--out", out);

  auto* abl = app.add_subcommand("ablate", "masking-strategy ablation over seeds");
  abl->add_option("--config", config_path)->required();
  abl->add_option("--out", out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (tok->parsed()) return cmd_tokenizer_train(corpus, vocab_size, out);
    if (ser->parsed()) return cmd_serialize_ontology(table, template_str, out, seed);
    if (audit->parsed()) return cmd_ontology_audit(corpus, template_str);
    if (pre->parsed()) return cmd_pretrain(config_path, resume);
    if (ev->parsed()) return cmd_eval(ckpt, heldout, vocab, merges, lexicon, mask_rate, seed, out);
    if (em->parsed()) return cmd_embed(ckpt, texts, out, vocab, merges);
    if (proj->parsed())
      return cmd_project(embeddings_path, method, out, labels_path, perplexity, iterations, seed,
                         knn_k);
    if (bench->parsed()) return cmd_bench(ckpt, volumes, seq_len, repeats, seed, out);
    if (abl->parsed()) return cmd_ablate(config_path, out);
  } catch (const TrainAborted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
