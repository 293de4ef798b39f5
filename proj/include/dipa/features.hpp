#pragma once

#include <vector>

#include "dipa/env.hpp"

namespace dipa {

// FullState:     gripper X,Y,Z,theta | object X,Y,Z per object | moved_count
// PAActionState: FullState without theta (the automatic modes drive the
//                gripper joint)
enum class FeatureVariant { kFullState, kPAActionState };

inline constexpr int kThetaFeature = 3;

struct FeatureSpec {
  FeatureVariant variant = FeatureVariant::kFullState;
  int n_objects = 1;

  int dimension() const;
  bool operator==(const FeatureSpec&) const = default;
};

int full_state_dimension(int n_objects);

std::vector<double> full_state_features(const EnvState& state);

// Projects a FullState vector onto `spec`.
std::vector<double> project_features(const std::vector<double>& full, const FeatureSpec& spec);

std::vector<double> extract_features(const EnvState& state, const FeatureSpec& spec);

// Rebuilds an EnvState from a FullState vector. Attachment and placement are
// recovered from geometry: a held object coincides with the gripper, and a
// free object resting inside its place radius is placed.
EnvState state_from_features(const std::vector<double>& full, const EnvConfig& config,
                             Mode mode = Mode(0), int t = 0);

}  // namespace dipa
