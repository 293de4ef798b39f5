#include "dipa/evaluation.hpp"

#include <stdexcept>

namespace dipa {

EvalMetrics evaluate_bundle(const PolicyBundle& bundle, const EnvConfig& env, int episodes,
                            std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("evaluate_bundle: episodes must be >= 1");
  EvalMetrics m;
  m.episodes = episodes;
  int successes = 0;
  double moved = 0.0, length = 0.0;
  for (int i = 0; i < episodes; ++i) {
    Trajectory traj =
        rollout(bundle, env, derive_stream(seed, {"eval", label("i", i)}), env.effective_t_max());
    successes += traj.success ? 1 : 0;
    moved += traj.terminal.moved_count;
    length += static_cast<double>(traj.steps.size());
    m.illegal_transitions += count_illegal_transitions(traj);
  }
  m.success_rate = static_cast<double>(successes) / episodes;
  m.mean_objects_moved = moved / episodes;
  m.mean_episode_length = length / episodes;
  return m;
}

nlohmann::json to_json(const EvalMetrics& m) {
  return {{"episodes", m.episodes},
          {"success_rate", m.success_rate},
          {"mean_objects_moved", m.mean_objects_moved},
          {"mean_episode_length", m.mean_episode_length},
          {"illegal_transitions", m.illegal_transitions},
          {"sigma", m.sigma}};
}

EvalMetrics eval_metrics_from_json(const nlohmann::json& j) {
  EvalMetrics m;
  m.episodes = j.at("episodes").get<int>();
  m.success_rate = j.at("success_rate").get<double>();
  m.mean_objects_moved = j.at("mean_objects_moved").get<double>();
  m.mean_episode_length = j.at("mean_episode_length").get<double>();
  m.illegal_transitions = j.at("illegal_transitions").get<std::size_t>();
  m.sigma = j.at("sigma").get<ActionArray>();
  return m;
}

}  // namespace dipa
