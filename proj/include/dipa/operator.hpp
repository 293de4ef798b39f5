#pragma once

#include <stdexcept>

#include "dipa/core.hpp"
#include "dipa/env.hpp"
#include "dipa/rng.hpp"

namespace dipa {

// Raised when the operator has no sensible command, e.g. asked to reach an
// object when none is left.
class OperatorFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct OperatorConfig {
  double kp = 0.5;      // proportional gain, 1/step
  double clamp = 5.0;   // per-axis translation clamp, cm
  LabelSource label_source = LabelSource::kIntended;

  double reach_entry_x = -15.0;   // end of the move-left automatic mode
  double grasp_tolerance = 1.0;   // horizontal distance to close on an object
  double grasp_height = 1.0;      // gripper height above the object to close
  double place_tolerance = 1.0;   // horizontal distance to open over a slot
  double place_height = 5.0;      // carry height while placing
  double grip_rate = 1.0 / 3.0;   // |dtheta| per step while closing or opening

  void validate() const;
};

// Fixed automatic policy. Throws std::logic_error for manual modes.
ActionDelta auto_action(Mode mode);

// Scripted stand-in for the human demonstrator: proportional manual control,
// a rule-based mode switcher and a full-manual controller for the baselines
// that run without partial automation.
class AlgorithmicOperator {
 public:
  AlgorithmicOperator(OperatorConfig op, EnvConfig env);

  const OperatorConfig& config() const { return op_; }
  const EnvConfig& env_config() const { return env_; }

  // Intended (pre-noise) manual command. Throws std::logic_error for an auto
  // mode and OperatorFault when mode 1 has no object left to reach.
  ActionDelta manual_action(const EnvState& state, Mode mode) const;

  // Mode for this step given state.current_mode as the previous mode.
  Mode switch_mode(const EnvState& state) const;

  // Whole-task controller without mode labels.
  ActionDelta full_manual_action(const EnvState& state) const;

  // kp * error clamped per axis.
  Vec3 proportional(const EnvState& state, const Vec3& target) const;

 private:
  OperatorConfig op_;
  EnvConfig env_;
};

// executed = clamp(intended + eps), eps_d ~ N(0, sigma_d). Throws
// std::invalid_argument on a negative or non-finite variance.
ActionDelta inject_disturbance(const ActionDelta& intended, const DisturbanceLevel& sigma,
                               RngStream& rng);

}  // namespace dipa
