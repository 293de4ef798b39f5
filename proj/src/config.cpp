#include "dipa/config.hpp"

#include <set>
#include <string>

namespace dipa {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError(section + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(section + "." + key + ": " + e.what());
  }
}

}  // namespace

json to_json(const EnvConfig& c) {
  return {{"n_objects", c.n_objects},
          {"sigma_init_cm", c.sigma_init_cm},
          {"auto2_threshold", to_string(c.auto2_threshold)},
          {"t_max", c.effective_t_max()},
          {"grasp_radius", c.grasp_radius},
          {"grasp_height", c.grasp_height},
          {"place_radius", c.place_radius},
          {"theta_close", c.theta_close},
          {"theta_open", c.theta_open}};
}

EnvConfig env_config_from_json(const json& j, EnvConfig c) {
  const std::string sec = "env";
  reject_unknown(j, {"n_objects", "sigma_init_cm", "auto2_threshold", "t_max", "grasp_radius",
                     "grasp_height", "place_radius", "theta_close", "theta_open"},
                 sec);
  read(j, "n_objects", c.n_objects, sec);
  read(j, "sigma_init_cm", c.sigma_init_cm, sec);
  if (j.contains("auto2_threshold")) {
    if (!j["auto2_threshold"].is_string()) throw ConfigError("env.auto2_threshold: expected L|M|S");
    c.auto2_threshold = parse_threshold(j["auto2_threshold"].get<std::string>());
  }
  if (j.contains("t_max")) {
    if (j["t_max"].is_null()) {
      c.t_max.reset();
    } else {
      int t = 0;
      read(j, "t_max", t, sec);
      c.t_max = t;
    }
  }
  read(j, "grasp_radius", c.grasp_radius, sec);
  read(j, "grasp_height", c.grasp_height, sec);
  read(j, "place_radius", c.place_radius, sec);
  read(j, "theta_close", c.theta_close, sec);
  read(j, "theta_open", c.theta_open, sec);
  c.validate();
  return c;
}

json to_json(const OperatorConfig& c) {
  return {{"kp", c.kp},
          {"clamp", c.clamp},
          {"label_source", to_string(c.label_source)},
          {"reach_entry_x", c.reach_entry_x},
          {"grasp_tolerance", c.grasp_tolerance},
          {"grasp_height", c.grasp_height},
          {"place_tolerance", c.place_tolerance},
          {"place_height", c.place_height},
          {"grip_rate", c.grip_rate}};
}

OperatorConfig operator_config_from_json(const json& j, OperatorConfig c) {
  const std::string sec = "operator";
  reject_unknown(j, {"kp", "clamp", "label_source", "reach_entry_x", "grasp_tolerance",
                     "grasp_height", "place_tolerance", "place_height", "grip_rate"},
                 sec);
  read(j, "kp", c.kp, sec);
  read(j, "clamp", c.clamp, sec);
  if (j.contains("label_source")) {
    try {
      c.label_source = parse_label_source(j["label_source"].get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("operator.label_source: ") + e.what());
    }
  }
  read(j, "reach_entry_x", c.reach_entry_x, sec);
  read(j, "grasp_tolerance", c.grasp_tolerance, sec);
  read(j, "grasp_height", c.grasp_height, sec);
  read(j, "place_tolerance", c.place_tolerance, sec);
  read(j, "place_height", c.place_height, sec);
  read(j, "grip_rate", c.grip_rate, sec);
  c.validate();
  return c;
}

json to_json(const nn::TrainSpec& s) {
  return {{"learning_rate", s.learning_rate},
          {"batch_size", s.batch_size},
          {"max_epochs", s.max_epochs},
          {"patience", s.patience},
          {"validation_fraction", s.validation_fraction},
          {"seed", s.seed}};
}

nn::TrainSpec train_spec_from_json(const json& j, nn::TrainSpec s) {
  const std::string sec = "train";
  reject_unknown(j, {"learning_rate", "batch_size", "max_epochs", "patience",
                     "validation_fraction", "seed"},
                 sec);
  read(j, "learning_rate", s.learning_rate, sec);
  read(j, "batch_size", s.batch_size, sec);
  read(j, "max_epochs", s.max_epochs, sec);
  read(j, "patience", s.patience, sec);
  read(j, "validation_fraction", s.validation_fraction, sec);
  read(j, "seed", s.seed, sec);
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return s;
}

json to_json(const DisturbanceLevel& s) {
  return {{"sigma", s.sigma}, {"iteration", s.iteration_k}};
}

}  // namespace dipa
