#pragma once

#include <cstdint>

#include <json.hpp>

#include "dipa/core.hpp"
#include "dipa/env.hpp"
#include "dipa/policies.hpp"

namespace dipa {

struct EvalMetrics {
  int episodes = 0;
  double success_rate = 0.0;
  double mean_objects_moved = 0.0;
  double mean_episode_length = 0.0;
  std::size_t illegal_transitions = 0;
  ActionArray sigma{};  // disturbance level in force when the data was collected

  bool operator==(const EvalMetrics&) const = default;
};

// Seeded, disturbance-free rollouts. Episode i uses the stream
// (seed, {"eval", "i=<i>"}), so every bundle is tested on the same initial
// states for a given seed.
EvalMetrics evaluate_bundle(const PolicyBundle& bundle, const EnvConfig& env, int episodes,
                            std::uint64_t seed);

nlohmann::json to_json(const EvalMetrics& m);
EvalMetrics eval_metrics_from_json(const nlohmann::json& j);

}  // namespace dipa
