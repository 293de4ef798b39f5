#include "dipa/features.hpp"

#include <cmath>
#include <stdexcept>

namespace dipa {

int full_state_dimension(int n_objects) { return 4 + 3 * n_objects + 1; }

int FeatureSpec::dimension() const {
  int full = full_state_dimension(n_objects);
  return variant == FeatureVariant::kFullState ? full : full - 1;
}

std::vector<double> full_state_features(const EnvState& s) {
  std::vector<double> f;
  f.reserve(full_state_dimension(static_cast<int>(s.objects.size())));
  f.insert(f.end(), {s.gripper.x, s.gripper.y, s.gripper.z, s.gripper.theta});
  for (const auto& o : s.objects) f.insert(f.end(), {o.pos.x, o.pos.y, o.pos.z});
  f.push_back(static_cast<double>(s.moved_count));
  return f;
}

std::vector<double> project_features(const std::vector<double>& full, const FeatureSpec& spec) {
  if (static_cast<int>(full.size()) != full_state_dimension(spec.n_objects))
    throw std::invalid_argument("feature vector has " + std::to_string(full.size()) +
                                " entries, expected " +
                                std::to_string(full_state_dimension(spec.n_objects)));
  if (spec.variant == FeatureVariant::kFullState) return full;
  std::vector<double> out;
  out.reserve(full.size() - 1);
  for (std::size_t i = 0; i < full.size(); ++i)
    if (static_cast<int>(i) != kThetaFeature) out.push_back(full[i]);
  return out;
}

std::vector<double> extract_features(const EnvState& state, const FeatureSpec& spec) {
  return project_features(full_state_features(state), spec);
}

EnvState state_from_features(const std::vector<double>& full, const EnvConfig& config, Mode mode,
                             int t) {
  const int n = config.n_objects;
  if (static_cast<int>(full.size()) != full_state_dimension(n))
    throw std::invalid_argument("state_from_features: dimension mismatch");
  EnvState s;
  s.gripper = {full[0], full[1], full[2], full[3]};
  s.objects.resize(n);
  bool held = false;
  for (int i = 0; i < n; ++i) {
    ObjectState& o = s.objects[i];
    o.pos = {full[4 + 3 * i], full[5 + 3 * i], full[6 + 3 * i]};
    if (!held && o.pos == Vec3{s.gripper.x, s.gripper.y, s.gripper.z}) {
      o.attached = true;
      held = true;
      continue;
    }
    Vec3 slot = place_slot(i, n);
    o.placed = o.pos.z == 0.0 &&
               std::hypot(o.pos.x - slot.x, o.pos.y - slot.y) <= config.place_radius;
  }
  s.moved_count = static_cast<int>(std::lround(full.back()));
  s.current_mode = mode;
  s.t = t;
  return s;
}

}  // namespace dipa
