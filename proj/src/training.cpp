#include "cmbert/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "cmbert/checkpoint.hpp"
#include "cmbert/config_json.hpp"
#include "cmbert/error.hpp"
#include "cmbert/evaluation.hpp"
#include "cmbert/threading.hpp"

namespace cmbert {

void TrainConfig::validate() const {
  if (total_steps <= 0) throw ConfigError("train config: total_steps must be positive");
  if (warmup_steps < 0 || warmup_steps >= total_steps)
    throw ConfigError("train config: warmup_steps must lie in [0, total_steps)");
  if (batch_size <= 0) throw ConfigError("train config: batch_size must be positive");
  if (checkpoint_every <= 0) throw ConfigError("train config: checkpoint_every must be positive");
  if (log_every <= 0) throw ConfigError("train config: log_every must be positive");
  if (!(peak_lr >= 0.0)) throw ConfigError("train config: peak_lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("train config: weight_decay must be non-negative");
  if (curriculum.empty() || curriculum.front().first != 0)
    throw ConfigError("train config: curriculum must start at step 0");
  for (std::size_t i = 0; i < curriculum.size(); ++i) {
    if (curriculum[i].second <= 0)
      throw ConfigError("train config: curriculum sequence lengths must be positive");
    if (i > 0 && curriculum[i].first <= curriculum[i - 1].first)
      throw ConfigError("train config: curriculum start steps must be strictly increasing");
  }
}

std::int64_t TrainConfig::seq_len_at(std::int64_t step) const {
  std::int64_t len = curriculum.front().second;
  for (const auto& [start, seq] : curriculum) {
    if (step >= start) len = seq;
  }
  return len;
}

double cosine_lr(std::int64_t step, const TrainConfig& cfg) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
    return cfg.peak_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  const double denom = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
  double progress = denom > 0.0 ? static_cast<double>(step - cfg.warmup_steps) / denom : 1.0;
  progress = std::min(progress, 1.0);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

OptimizerState OptimizerState::init(const ParameterStore<float>& params) {
  OptimizerState s;
  s.m = clone_zeroed(params);
  s.v = clone_zeroed(params);
  s.step = 0;
  return s;
}

StepStatus stable_adamw_step(ParameterStore<float>& params, const ParameterStore<float>& grads,
                             OptimizerState& state, double lr, const TrainConfig& cfg) {
  auto g_tensors = grads.named_tensors();
  for (const auto& g : g_tensors) {
    if (!all_finite(std::span<const float>(g.data, g.size()))) return StepStatus::rejected_nonfinite;
  }

  auto p_tensors = params.named_tensors();
  auto m_tensors = state.m.named_tensors();
  auto v_tensors = state.v.named_tensors();
  const std::int64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

  for (std::size_t ti = 0; ti < p_tensors.size(); ++ti) {
    float* p = p_tensors[ti].data;
    const float* g = g_tensors[ti].data;
    float* m = m_tensors[ti].data;
    float* v = v_tensors[ti].data;
    const std::size_t n = p_tensors[ti].size();

    // Moments first, then the per-tensor clip factor from the ratio of raw
    // gradient energy to the bias-corrected second moment.
    double ratio_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = g[i];
      m[i] = static_cast<float>(cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi);
      v[i] = static_cast<float>(cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi);
      const double v_hat = v[i] / bc2;
      ratio_sum += gi * gi / (v_hat + cfg.eps);
    }
    const double rms = std::sqrt(ratio_sum / static_cast<double>(n));
    const double clip = 1.0 / std::max(1.0, rms);
    const double decay = 1.0 - lr * cfg.weight_decay;

    for (std::size_t i = 0; i < n; ++i) {
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      const double update = m_hat / (std::sqrt(v_hat) + cfg.eps);
      p[i] = static_cast<float>(p[i] * decay - lr * clip * update);
    }
  }
  state.step = t;
  return StepStatus::applied;
}

std::string MetricsRecord::to_json_line() const {
  Json j;
  j["step"] = step;
  j["mlm_loss"] = mlm_loss;
  j["top1"] = top1;
  j["top5"] = top5;
  j["top10"] = top10;
  j["top25"] = top25;
  j["learning_rate"] = learning_rate;
  j["masking_rate"] = masking_rate;
  j["wall_time"] = wall_time;
  return j.dump();
}

std::uint64_t fnv1a_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::string& path, const ParameterStore<float>& params,
                     const OptimizerState& optimizer, std::int64_t step, std::uint64_t seed,
                     std::uint64_t config_hash, const std::string& config_json) {
  Container c;
  params_to_container(params, c);
  params_to_container(optimizer.m, c, "optim.m.");
  params_to_container(optimizer.v, c, "optim.v.");
  Json meta;
  meta["schema"] = "cmbert-train";
  meta["step"] = step;
  meta["optimizer_step"] = optimizer.step;
  meta["seed"] = seed;
  meta["config_hash"] = config_hash;
  if (!config_json.empty()) meta["config"] = Json::parse(config_json);
  c.metadata = meta.dump();
  write_container(c, path);
}

TrainCheckpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
  const Container c = read_container(path);
  TrainCheckpoint ck;
  ck.params = ParameterStore<float>::zeros(expected);
  ck.optimizer.m = ParameterStore<float>::zeros(expected);
  ck.optimizer.v = ParameterStore<float>::zeros(expected);
  params_from_container(ck.params, c);
  params_from_container(ck.optimizer.m, c, "optim.m.");
  params_from_container(ck.optimizer.v, c, "optim.v.");
  const Json meta = Json::parse(c.metadata.empty() ? "{}" : c.metadata);
  ck.step = meta.value("step", std::int64_t{0});
  ck.optimizer.step = meta.value("optimizer_step", ck.step);
  ck.seed = meta.value("seed", std::uint64_t{0});
  ck.config_hash = meta.value("config_hash", std::uint64_t{0});
  if (meta.contains("config")) ck.config_json = meta["config"].dump();
  return ck;
}

namespace {

// Document order for one epoch: Fisher-Yates under a per-epoch stream, so a
// resumed run regenerates the same order from (seed, epoch) alone.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::stream(seed, "epoch-shuffle", epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_below(i)]);
  return order;
}

std::vector<std::int32_t> truncate_to(const std::vector<std::int32_t>& ids, std::size_t max_len) {
  if (ids.size() <= max_len) return ids;
  std::vector<std::int32_t> out(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(max_len));
  out.back() = special::kSep;
  return out;
}

void metrics_topk(const Mat<float>& logits, const std::vector<std::int32_t>& labels,
                  MetricsRecord& rec) {
  const auto vocab = static_cast<std::int64_t>(logits.cols);
  std::vector<std::int64_t> ks;
  for (std::int64_t k : {1, 5, 10, 25}) ks.push_back(std::min(k, vocab));
  const TopKReport report = topk_accuracy(logits, labels, ks);
  rec.top1 = report.accuracy[0];
  rec.top5 = report.accuracy[1];
  rec.top10 = report.accuracy[2];
  rec.top25 = report.accuracy[3];
}

}  // namespace

TrainResult train_loop(const std::vector<std::string>& documents, const Tokenizer& tokenizer,
                       ParameterStore<float>& params, const TrainConfig& train_cfg,
                       const MaskingSchedule& schedule, const TokenPriorityTable& priorities,
                       const std::string& out_dir,
                       const std::optional<std::string>& resume_from,
                       const TrainCallbacks& callbacks) {
  train_cfg.validate();
  schedule.validate();
  if (documents.empty()) throw InputError("train_loop: empty corpus");

  const std::string config_json =
      canonical_run_config(params.config, train_cfg, schedule);
  const std::uint64_t config_hash = fnv1a_hash(config_json);

  OptimizerState optimizer = OptimizerState::init(params);
  std::int64_t start_step = 0;
  if (resume_from) {
    TrainCheckpoint ck = load_checkpoint(*resume_from, params.config);
    if (ck.config_hash != 0 && ck.config_hash != config_hash)
      throw InputError("resume: checkpoint config hash does not match the current config");
    params = std::move(ck.params);
    optimizer = std::move(ck.optimizer);
    start_step = ck.step;
  }

  // Tokenize once; per-step truncation follows the curriculum.
  std::vector<std::vector<std::int32_t>> token_docs(documents.size());
  parallel_for(documents.size(), [&](std::size_t i) {
    token_docs[i] = tokenizer.encode(documents[i]);
  });

  std::ofstream metrics_out(out_dir + "/metrics.jsonl",
                            resume_from ? std::ios::app : std::ios::trunc);
  if (!metrics_out) throw IoError("cannot write " + out_dir + "/metrics.jsonl");

  const std::size_t n_docs = token_docs.size();
  std::uint64_t cached_epoch = UINT64_MAX;
  std::vector<std::size_t> cached_order;
  auto order_for = [&](std::uint64_t epoch) -> const std::vector<std::size_t>& {
    if (epoch != cached_epoch) {
      cached_order = epoch_order(n_docs, train_cfg.seed, epoch);
      cached_epoch = epoch;
    }
    return cached_order;
  };

  TrainResult result;
  const auto t0 = std::chrono::steady_clock::now();
  std::string last_checkpoint;

  auto write_checkpoint = [&](std::int64_t completed_steps, const std::string& name) {
    const std::string path = out_dir + "/" + name;
    save_checkpoint(path, params, optimizer, completed_steps, train_cfg.seed, config_hash,
                    config_json);
    last_checkpoint = path;
  };

  for (std::int64_t step = start_step; step < train_cfg.total_steps; ++step) {
    const auto seq_len = static_cast<std::size_t>(train_cfg.seq_len_at(step));

    // Batch membership is a pure function of (seed, step): documents come
    // from the epoch-shuffled order at the step's global offset.
    std::vector<std::vector<std::int32_t>> batch_docs;
    batch_docs.reserve(static_cast<std::size_t>(train_cfg.batch_size));
    std::uint64_t cursor = static_cast<std::uint64_t>(step) *
                           static_cast<std::uint64_t>(train_cfg.batch_size);
    for (std::int64_t b = 0; b < train_cfg.batch_size; ++b, ++cursor) {
      const std::uint64_t epoch = cursor / n_docs;
      const std::size_t offset = static_cast<std::size_t>(cursor % n_docs);
      batch_docs.push_back(truncate_to(token_docs[order_for(epoch)[offset]], seq_len));
    }

    Rng collate_rng = Rng::stream(train_cfg.seed, "collate", static_cast<std::uint64_t>(step));
    CollateOptions copt;
    copt.pad_to = static_cast<std::int64_t>(seq_len);
    const MLMBatch batch = collate(batch_docs, step, schedule, priorities,
                                   params.config.vocab_size, collate_rng, copt);

    const double lr = cosine_lr(step, train_cfg);
    MlmObjectiveResult<float> obj;
    if (batch.mask_positions.empty()) {
      obj.loss = 0.0;  // nothing to predict this step; no update
    } else {
      ParameterStore<float> grads = clone_zeroed(params);
      obj = mlm_objective(params, batch, ForwardOptions{}, &grads);
      if (!std::isfinite(obj.loss)) {
        throw TrainAborted("non-finite loss at step " + std::to_string(step) +
                           (last_checkpoint.empty() ? "; no checkpoint written yet"
                                                    : "; last good checkpoint: " + last_checkpoint));
      }
      const StepStatus status = stable_adamw_step(params, grads, optimizer, lr, train_cfg);
      if (status == StepStatus::rejected_nonfinite) {
        std::cerr << "step " << step << ": non-finite gradient, update rejected\n";
      }
    }

    if (step % train_cfg.log_every == 0) {
      MetricsRecord rec;
      rec.step = step;
      rec.mlm_loss = obj.loss;
      if (obj.n_masked > 0) metrics_topk(obj.logits, obj.labels, rec);
      rec.learning_rate = lr;
      rec.masking_rate = masking_rate(schedule, step);
      rec.wall_time = train_cfg.deterministic
                          ? 0.0
                          : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                .count();
      metrics_out << rec.to_json_line() << '\n';
      metrics_out.flush();
      if (callbacks.on_metrics) callbacks.on_metrics(rec);
      result.metrics.push_back(std::move(rec));
    }

    const std::int64_t completed = step + 1;
    if (completed % train_cfg.checkpoint_every == 0 && completed < train_cfg.total_steps) {
      write_checkpoint(completed, "checkpoint-" + std::to_string(completed) + ".cmbert");
    }
  }

  write_checkpoint(train_cfg.total_steps, "checkpoint-final.cmbert");
  result.final_step = train_cfg.total_steps;
  result.final_checkpoint_path = last_checkpoint;
  return result;
}

}  // namespace cmbert
