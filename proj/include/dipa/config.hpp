#pragma once

#include <json.hpp>

#include "dipa/core.hpp"
#include "dipa/env.hpp"
#include "dipa/mlp.hpp"
#include "dipa/operator.hpp"

namespace dipa {

// Config-file sections. Missing keys keep their defaults; unknown keys are
// rejected so typos surface.
nlohmann::json to_json(const EnvConfig& c);
EnvConfig env_config_from_json(const nlohmann::json& j, EnvConfig base = {});

nlohmann::json to_json(const OperatorConfig& c);
OperatorConfig operator_config_from_json(const nlohmann::json& j, OperatorConfig base = {});

nlohmann::json to_json(const nn::TrainSpec& s);
nn::TrainSpec train_spec_from_json(const nlohmann::json& j, nn::TrainSpec base = {});

nlohmann::json to_json(const DisturbanceLevel& s);

}  // namespace dipa
