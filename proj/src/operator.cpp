#include "dipa/operator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace dipa {
namespace {

double horizontal(const GripperPose& g, const Vec3& p) { return std::hypot(p.x - g.x, p.y - g.y); }

// Nearest object that is neither placed nor held; lowest index wins ties.
std::optional<std::size_t> reach_target(const EnvState& s) {
  std::optional<std::size_t> best;
  double best_d = 0.0;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const ObjectState& o = s.objects[i];
    if (o.placed || o.attached) continue;
    double d = horizontal(s.gripper, o.pos);
    if (!best || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

void OperatorConfig::validate() const {
  if (!(kp > 0.0)) throw ConfigError("operator kp must be > 0");
  if (!(clamp > 0.0) || clamp > kMaxTranslationCm)
    throw ConfigError("operator clamp must be in (0, 5] cm");
  if (!(grip_rate > 0.0) || grip_rate > kMaxRotationRad)
    throw ConfigError("operator grip_rate must be in (0, 1]");
}

ActionDelta auto_action(Mode mode) {
  switch (mode.index()) {
    case 0: return {-5.0, 0.0, 0.0, 1.0};
    case 2: return {5.0, 0.0, 3.0, -1.0};
  }
  throw std::logic_error("auto_action called for manual mode " + std::to_string(mode.index()));
}

AlgorithmicOperator::AlgorithmicOperator(OperatorConfig op, EnvConfig env)
    : op_(op), env_(std::move(env)) {
  op_.validate();
  env_.validate();
}

Vec3 AlgorithmicOperator::proportional(const EnvState& s, const Vec3& target) const {
  auto axis = [&](double err) { return std::clamp(op_.kp * err, -op_.clamp, op_.clamp); };
  return {axis(target.x - s.gripper.x), axis(target.y - s.gripper.y), axis(target.z - s.gripper.z)};
}

ActionDelta AlgorithmicOperator::manual_action(const EnvState& s, Mode mode) const {
  if (!mode.is_manual())
    throw std::logic_error("manual_action called for auto mode " + std::to_string(mode.index()));
  const int n = static_cast<int>(s.objects.size());

  if (mode.index() == 1) {
    auto target = reach_target(s);
    if (!target) throw OperatorFault("reach: no unplaced object remaining");
    const Vec3& o = s.objects[*target].pos;
    Vec3 d = proportional(s, o);
    bool over = horizontal(s.gripper, o) <= op_.grasp_tolerance &&
                s.gripper.z - o.z <= op_.grasp_height;
    return {d.x, d.y, d.z, over ? -op_.grip_rate : op_.grip_rate};
  }

  // mode 3: carry the held object to its slot and open over it
  auto held = s.attached_index();
  if (!held) return {0.0, 0.0, 0.0, 1.0};
  Vec3 slot = place_slot(static_cast<int>(*held), n);
  Vec3 target{slot.x, slot.y, op_.place_height};
  Vec3 d = proportional(s, target);
  bool over = horizontal(s.gripper, slot) <= op_.place_tolerance;
  return {d.x, d.y, d.z, over ? op_.grip_rate : -op_.grip_rate};
}

Mode AlgorithmicOperator::switch_mode(const EnvState& s) const {
  const Mode cur = s.current_mode;
  bool complete = false;
  switch (cur.index()) {
    case 0: complete = s.gripper.x <= op_.reach_entry_x; break;
    case 1: complete = s.attached_index().has_value(); break;
    case 2: complete = s.gripper.x >= env_.auto2_x(); break;
    // a dropped object outside its slot is picked up again on the next cycle
    case 3: complete = !s.attached_index().has_value(); break;
  }
  return complete ? cur.next() : cur;
}

ActionDelta AlgorithmicOperator::full_manual_action(const EnvState& s) const {
  if (s.attached_index()) {
    if (s.gripper.x < env_.auto2_x()) return auto_action(Mode(2));
    return manual_action(s, Mode(3));
  }
  auto target = reach_target(s);
  if (!target) throw OperatorFault("full manual: no unplaced object remaining");
  if (s.gripper.x > op_.reach_entry_x && s.objects[*target].pos.x <= op_.reach_entry_x)
    return auto_action(Mode(0));
  return manual_action(s, Mode(1));
}

ActionDelta inject_disturbance(const ActionDelta& intended, const DisturbanceLevel& sigma,
                               RngStream& rng) {
  if (!sigma.is_valid()) throw std::invalid_argument("inject_disturbance: negative variance");
  ActionArray a = intended.to_array();
  for (int d = 0; d < kActionDims; ++d) {
    double z = rng.normal();  // drawn even for zero variance: keeps dims aligned
    if (sigma.sigma[d] > 0.0) a[d] += std::sqrt(sigma.sigma[d]) * z;
  }
  return clamp_action(ActionDelta::from_array(a));
}

}  // namespace dipa
