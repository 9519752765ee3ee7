#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cmbert/masking.hpp"
#include "cmbert/mlm.hpp"
#include "cmbert/params.hpp"
#include "cmbert/tokenizer.hpp"

namespace cmbert {

struct TrainConfig {
  std::int64_t total_steps = 2000;
  std::int64_t checkpoint_every = 10000;
  double peak_lr = 5e-4;
  std::int64_t warmup_steps = 100;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  std::int64_t batch_size = 16;
  // (start_step, seq_len) phases; start_steps strictly increasing from 0.
  std::vector<std::pair<std::int64_t, std::int64_t>> curriculum{{0, 128}};
  std::uint64_t seed = 42;
  std::int64_t log_every = 10;
  bool deterministic = true;

  void validate() const;
  std::int64_t seq_len_at(std::int64_t step) const;
};

// Linear warmup to peak_lr over warmup_steps, then cosine decay to zero at
// total_steps (floored at zero beyond).
double cosine_lr(std::int64_t step, const TrainConfig& cfg);

struct OptimizerState {
  ParameterStore<float> m;
  ParameterStore<float> v;
  std::int64_t step = 0;

  static OptimizerState init(const ParameterStore<float>& params);
};

enum class StepStatus { applied, rejected_nonfinite };

// One decoupled-weight-decay Adam step with per-tensor RMS update clipping:
//   m <- b1 m + (1-b1) g ; v <- b2 v + (1-b2) g^2 ; bias-corrected m^, v^
//   clip c = 1 / max(1, sqrt(mean(g^2 / (v^ + eps))))
//   p <- p (1 - lr wd) - lr c m^ / (sqrt(v^) + eps)
// A non-finite gradient anywhere rejects the whole step: parameters and
// state stay bitwise untouched.
StepStatus stable_adamw_step(ParameterStore<float>& params, const ParameterStore<float>& grads,
                             OptimizerState& state, double lr, const TrainConfig& cfg);

struct MetricsRecord {
  std::int64_t step = 0;
  double mlm_loss = 0.0;
  double top1 = 0.0, top5 = 0.0, top10 = 0.0, top25 = 0.0;
  double learning_rate = 0.0;
  double masking_rate = 0.0;
  double wall_time = 0.0;  // seconds since loop start; 0 in deterministic mode

  std::string to_json_line() const;
};

// Everything a resumable run needs beyond the model: optimizer state, the
// step to execute next, and the master seed all randomness derives from.
struct TrainCheckpoint {
  ParameterStore<float> params;
  OptimizerState optimizer;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string config_json;
};

void save_checkpoint(const std::string& path, const ParameterStore<float>& params,
                     const OptimizerState& optimizer, std::int64_t step, std::uint64_t seed,
                     std::uint64_t config_hash, const std::string& config_json);
TrainCheckpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

std::uint64_t fnv1a_hash(const std::string& s);

struct TrainResult {
  std::vector<MetricsRecord> metrics;
  std::int64_t final_step = 0;
  std::string final_checkpoint_path;
};

struct TrainCallbacks {
  // Called after each metrics record is written (used by tests and the CLI).
  std::function<void(const MetricsRecord&)> on_metrics;
};

// The pretraining loop. Documents are tokenized once; each step draws its
// batch from a per-epoch reshuffled order derived from (seed, epoch) and its
// masking stream from (seed, step), so a resumed run replays the exact
// uninterrupted trajectory. Emits metrics.jsonl and periodic checkpoints
// under out_dir. Throws TrainAborted on a non-finite loss; the latest
// written checkpoint stays valid.
TrainResult train_loop(const std::vector<std::string>& documents, const Tokenizer& tokenizer,
                       ParameterStore<float>& params, const TrainConfig& train_cfg,
                       const MaskingSchedule& schedule, const TokenPriorityTable& priorities,
                       const std::string& out_dir,
                       const std::optional<std::string>& resume_from = std::nullopt,
                       const TrainCallbacks& callbacks = {});

}  // namespace cmbert
