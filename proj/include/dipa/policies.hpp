#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dipa/core.hpp"
#include "dipa/env.hpp"
#include "dipa/features.hpp"
#include "dipa/mlp.hpp"
#include "dipa/rng.hpp"

namespace dipa {

inline constexpr int kHiddenWidth = 64;

// How demonstrations map onto networks.
struct DatasetLayout {
  bool uses_pa = true;               // mode-gated policy with a switch net
  bool separated_action_nets = false;  // one action net per manual mode
};

// Learned policies: a mode-switching classifier and the action network(s)
// that replace the operator's manual policy. Auto modes always run the fixed
// automatic actions.
struct PolicyBundle {
  std::string method;
  int n_objects = 1;
  bool uses_pa = true;
  std::optional<nn::Regressor> switch_net;  // FullState -> one score per mode
  std::vector<nn::Regressor> action_nets;
  // action net index per mode, -1 for automatic modes (or unused)
  std::array<int, kNumModes> action_net_for_mode{-1, -1, -1, -1};

  FeatureSpec switch_features() const { return {FeatureVariant::kFullState, n_objects}; }
  FeatureSpec action_features() const {
    return {uses_pa ? FeatureVariant::kPAActionState : FeatureVariant::kFullState, n_objects};
  }
  void validate() const;
  bool operator==(const PolicyBundle& o) const;
};

// Argmax of `scores` restricted to {current, current.next()}; ties keep
// `current`.
Mode masked_argmax(std::span<const double> scores, Mode current);

Mode predict_mode(const PolicyBundle& bundle, const std::vector<double>& full, Mode current);
Mode predict_mode(const PolicyBundle& bundle, const EnvState& state, Mode current);

// Manual modes run the (clamped) action net on PAActionState features; auto
// modes return the automatic constant exactly. Bundles without partial
// automation ignore `mode` and run their single net on FullState features.
ActionDelta predict_action(const PolicyBundle& bundle, const std::vector<double>& full,
                           std::optional<Mode> mode);
ActionDelta predict_action(const PolicyBundle& bundle, const EnvState& state,
                           std::optional<Mode> mode);

struct ActionDataset {
  std::vector<int> modes;  // manual modes covered; empty for full-manual data
  nn::Dataset data;
};

struct PolicyDatasets {
  std::optional<nn::Dataset> switch_data;
  std::vector<ActionDataset> action_data;
};

// Switch rows: every labelled step, one-hot demonstrated mode. Action rows:
// demonstrated-manual steps (partitioned per manual mode when separated), or
// every step for full-manual layouts. Throws std::runtime_error when there are
// no action rows.
PolicyDatasets build_datasets(std::span<const Trajectory> trajectories, int n_objects,
                              const DatasetLayout& layout,
                              LabelSource label = LabelSource::kIntended);

// Standardises inputs, initialises {in, 64, 64, out} and fits.
struct TrainedRegressor {
  nn::Regressor regressor;
  nn::TrainReport report;
};
TrainedRegressor train_regressor(const nn::Dataset& data, const nn::TrainSpec& spec);

// Closed-loop rollout without disturbance. Stops when done or after t_max
// steps.
Trajectory rollout(const PolicyBundle& bundle, const EnvConfig& config, RngStream rng, int t_max);

void save_bundle(const PolicyBundle& bundle, const std::filesystem::path& dir);
PolicyBundle load_bundle(const std::filesystem::path& dir);

}  // namespace dipa
