#include "dipa/core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dipa {

double ActionDelta::operator[](int d) const {
  switch (d) {
    case 0: return dx;
    case 1: return dy;
    case 2: return dz;
    case 3: return dtheta;
  }
  throw std::out_of_range("ActionDelta index " + std::to_string(d));
}

bool ActionDelta::is_finite() const {
  return std::isfinite(dx) && std::isfinite(dy) && std::isfinite(dz) &&
         std::isfinite(dtheta);
}

ActionDelta clamp_action(const ActionDelta& a, double max_translation,
                         double max_rotation) {
  if (!a.is_finite()) throw std::domain_error("clamp_action: non-finite action");
  return {std::clamp(a.dx, -max_translation, max_translation),
          std::clamp(a.dy, -max_translation, max_translation),
          std::clamp(a.dz, -max_translation, max_translation),
          std::clamp(a.dtheta, -max_rotation, max_rotation)};
}

bool is_manual_mode(int index) {
  return std::find(kManualModes.begin(), kManualModes.end(), index) !=
         kManualModes.end();
}

Mode::Mode(int index) : index_(index) {
  if (index < 0 || index >= kNumModes) {
    throw std::out_of_range("mode index " + std::to_string(index) +
                            " outside [0, " + std::to_string(kNumModes) + ")");
  }
}

ModeKind Mode::kind() const {
  return is_manual_mode(index_) ? ModeKind::kManual : ModeKind::kAuto;
}

bool DisturbanceLevel::is_zero() const {
  return std::all_of(sigma.begin(), sigma.end(), [](double s) { return s == 0.0; });
}

bool DisturbanceLevel::is_valid() const {
  return std::all_of(sigma.begin(), sigma.end(),
                     [](double s) { return std::isfinite(s) && s >= 0.0; });
}

std::string to_string(LabelSource src) {
  return src == LabelSource::kIntended ? "intended" : "executed";
}

LabelSource parse_label_source(const std::string& s) {
  if (s == "intended") return LabelSource::kIntended;
  if (s == "executed") return LabelSource::kExecuted;
  throw std::invalid_argument("label_source must be 'intended' or 'executed' (got '" + s + "')");
}

std::string check_mode_transitions(const Trajectory& traj) {
  std::optional<Mode> prev;
  for (const auto& s : traj.steps) {
    if (!s.mode) continue;
    // reset state is mode 0
    Mode from = prev.value_or(Mode(0));
    if (!from.can_transition_to(*s.mode)) {
      return "step " + std::to_string(s.t) + ": " +
             std::to_string(from.index()) + " -> " +
             std::to_string(s.mode->index());
    }
    prev = s.mode;
  }
  return {};
}

std::size_t count_illegal_transitions(const Trajectory& traj) {
  std::size_t n = 0;
  std::optional<Mode> prev;
  for (const auto& s : traj.steps) {
    if (!s.mode) continue;
    if (!prev.value_or(Mode(0)).can_transition_to(*s.mode)) ++n;
    prev = s.mode;
  }
  return n;
}

}  // namespace dipa
