#include "cmbert/config_json.hpp"

namespace cmbert {

Json model_config_to_json(const ModelConfig& cfg) {
  Json j;
  j["d_model"] = cfg.d_model;
  j["n_heads"] = cfg.n_heads;
  j["n_layers"] = cfg.n_layers;
  j["d_ff"] = cfg.d_ff;
  j["vocab_size"] = cfg.vocab_size;
  j["max_seq_len"] = cfg.max_seq_len;
  j["rope_base"] = cfg.rope_base;
  j["attention_block_size"] = cfg.attention_block_size;
  j["layer_norm_eps"] = cfg.layer_norm_eps;
  return j;
}

ModelConfig model_config_from_json(const Json& j, const ModelConfig& defaults) {
  ModelConfig cfg = defaults;
  cfg.d_model = j.value("d_model", cfg.d_model);
  cfg.n_heads = j.value("n_heads", cfg.n_heads);
  cfg.n_layers = j.value("n_layers", cfg.n_layers);
  cfg.d_ff = j.value("d_ff", cfg.d_ff);
  cfg.vocab_size = j.value("vocab_size", cfg.vocab_size);
  cfg.max_seq_len = j.value("max_seq_len", cfg.max_seq_len);
  cfg.rope_base = j.value("rope_base", cfg.rope_base);
  cfg.attention_block_size = j.value("attention_block_size", cfg.attention_block_size);
  cfg.layer_norm_eps = j.value("layer_norm_eps", cfg.layer_norm_eps);
  return cfg;
}

Json train_config_to_json(const TrainConfig& cfg) {
  Json j;
  j["total_steps"] = cfg.total_steps;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["peak_lr"] = cfg.peak_lr;
  j["warmup_steps"] = cfg.warmup_steps;
  j["weight_decay"] = cfg.weight_decay;
  j["beta1"] = cfg.beta1;
  j["beta2"] = cfg.beta2;
  j["eps"] = cfg.eps;
  j["batch_size"] = cfg.batch_size;
  Json curriculum = Json::array();
  for (const auto& [start, len] : cfg.curriculum) curriculum.push_back(Json::array({start, len}));
  j["curriculum"] = curriculum;
  j["seed"] = cfg.seed;
  j["log_every"] = cfg.log_every;
  j["deterministic"] = cfg.deterministic;
  return j;
}

TrainConfig train_config_from_json(const Json& j, const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  cfg.total_steps = j.value("total_steps", cfg.total_steps);
  cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
  cfg.peak_lr = j.value("peak_lr", cfg.peak_lr);
  cfg.warmup_steps = j.value("warmup_steps", cfg.warmup_steps);
  cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
  cfg.beta1 = j.value("beta1", cfg.beta1);
  cfg.beta2 = j.value("beta2", cfg.beta2);
  cfg.eps = j.value("eps", cfg.eps);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  if (j.contains("curriculum")) {
    cfg.curriculum.clear();
    for (const auto& phase : j["curriculum"])
      cfg.curriculum.emplace_back(phase.at(0).get<std::int64_t>(),
                                  phase.at(1).get<std::int64_t>());
  }
  cfg.seed = j.value("seed", cfg.seed);
  cfg.log_every = j.value("log_every", cfg.log_every);
  cfg.deterministic = j.value("deterministic", cfg.deterministic);
  return cfg;
}

Json schedule_to_json(const MaskingSchedule& s) {
  Json j;
  j["start_rate"] = s.start_rate;
  j["end_rate"] = s.end_rate;
  j["total_steps"] = s.total_steps;
  return j;
}

MaskingSchedule schedule_from_json(const Json& j, const MaskingSchedule& defaults) {
  MaskingSchedule s = defaults;
  s.start_rate = j.value("start_rate", s.start_rate);
  s.end_rate = j.value("end_rate", s.end_rate);
  s.total_steps = j.value("total_steps", s.total_steps);
  return s;
}

std::string canonical_run_config(const ModelConfig& model, const TrainConfig& train,
                                 const MaskingSchedule& schedule) {
  Json j;
  j["model"] = model_config_to_json(model);
  j["train"] = train_config_to_json(train);
  j["schedule"] = schedule_to_json(schedule);
  return j.dump();
}

}  // namespace cmbert
