#pragma once

#include <string>

#include <json.hpp>

#include "cmbert/config.hpp"
#include "cmbert/masking.hpp"
#include "cmbert/training.hpp"

// JSON (de)serialization for the run configuration types, shared by the CLI
// and checkpoint metadata. Uses ordered_json so dumps are stable for hashing.

namespace cmbert {

using Json = nlohmann::ordered_json;

Json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const Json& j, const ModelConfig& defaults = {});

Json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j, const TrainConfig& defaults = {});

Json schedule_to_json(const MaskingSchedule& s);
MaskingSchedule schedule_from_json(const Json& j, const MaskingSchedule& defaults = {});

// Canonical dump used for config hashing and checkpoint metadata.
std::string canonical_run_config(const ModelConfig& model, const TrainConfig& train,
                                 const MaskingSchedule& schedule);

}  // namespace cmbert
