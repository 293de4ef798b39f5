#include "dipa/env.hpp"

#include <algorithm>
#include <cmath>

namespace dipa {

std::optional<std::size_t> EnvState::attached_index() const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].attached) return i;
  return std::nullopt;
}

double threshold_x(Auto2Threshold th) {
  switch (th) {
    case Auto2Threshold::kL: return 15.0;
    case Auto2Threshold::kM: return 0.0;
    case Auto2Threshold::kS: return -15.0;
  }
  return 15.0;
}

std::string to_string(Auto2Threshold th) {
  switch (th) {
    case Auto2Threshold::kL: return "L";
    case Auto2Threshold::kM: return "M";
    case Auto2Threshold::kS: return "S";
  }
  return "?";
}

Auto2Threshold parse_threshold(const std::string& s) {
  if (s == "L") return Auto2Threshold::kL;
  if (s == "M") return Auto2Threshold::kM;
  if (s == "S") return Auto2Threshold::kS;
  throw ConfigError("auto2_threshold must be one of L, M, S (got '" + s + "')");
}

void EnvConfig::validate() const {
  if (n_objects < 1 || n_objects > kSlotCapacity)
    throw ConfigError("n_objects=" + std::to_string(n_objects) + " exceeds slot capacity " +
                      std::to_string(kSlotCapacity));
  if (!(sigma_init_cm >= 0.0)) throw ConfigError("sigma_init_cm must be >= 0");
  if (t_max && *t_max < 0) throw ConfigError("t_max must be >= 0");
  if (!(grasp_radius > 0.0) || !(grasp_height > 0.0) || !(place_radius > 0.0))
    throw ConfigError("grasp/place radii must be positive");
  if (!(theta_close < theta_open)) throw ConfigError("theta_close must be below theta_open");
  double x = auto2_x();
  if (x < kWorkspaceMinX || x > kWorkspaceMaxX) throw ConfigError("threshold outside workspace");
}

double slot_y(int i, int n) { return (i - 0.5 * (n - 1)) * kSlotSpacingY; }
Vec3 pick_slot(int i, int n) { return {kWhiteAreaX, slot_y(i, n), 0.0}; }
Vec3 place_slot(int i, int n) { return {kBlueAreaX, slot_y(i, n), 0.0}; }

EnvState reset(const EnvConfig& config, RngStream& rng) {
  config.validate();
  EnvState s;
  s.gripper = kHomePose;
  s.objects.resize(config.n_objects);
  const double w = config.sigma_init_cm;
  for (int i = 0; i < config.n_objects; ++i) {
    Vec3 p = pick_slot(i, config.n_objects);
    if (w > 0.0) {
      p.x += rng.uniform(-w, w);
      p.y += rng.uniform(-w, w);
    }
    s.objects[i].pos = p;
  }
  s.moved_count = 0;
  s.current_mode = Mode(0);
  s.t = 0;
  return s;
}

namespace {

double horizontal_distance(double x0, double y0, double x1, double y1) {
  return std::hypot(x1 - x0, y1 - y0);
}

}  // namespace

EnvState step(const EnvConfig& config, const EnvState& state, const ActionDelta& action) {
  const ActionDelta a = clamp_action(action);
  EnvState next = state;
  GripperPose& g = next.gripper;
  g.x = std::clamp(g.x + a.dx, kWorkspaceMinX, kWorkspaceMaxX);
  g.y = std::clamp(g.y + a.dy, kWorkspaceMinY, kWorkspaceMaxY);
  g.z = std::clamp(g.z + a.dz, kWorkspaceMinZ, kWorkspaceMaxZ);
  g.theta = std::clamp(g.theta + a.dtheta, kThetaMin, kThetaMax);

  const int n = static_cast<int>(next.objects.size());
  if (auto held = next.attached_index()) {
    ObjectState& obj = next.objects[*held];
    if (g.theta >= config.theta_open) {
      obj.attached = false;
      obj.pos = {g.x, g.y, 0.0};
      Vec3 slot = place_slot(static_cast<int>(*held), n);
      if (horizontal_distance(obj.pos.x, obj.pos.y, slot.x, slot.y) <= config.place_radius) {
        obj.placed = true;
        ++next.moved_count;
      }
    } else {
      obj.pos = {g.x, g.y, g.z};
    }
  } else if (g.theta <= config.theta_close) {
    std::optional<std::size_t> best;
    double best_d = 0.0;
    for (int i = 0; i < n; ++i) {
      const ObjectState& o = next.objects[i];
      if (o.placed || o.attached) continue;
      double d = horizontal_distance(g.x, g.y, o.pos.x, o.pos.y);
      if (d <= config.grasp_radius && std::abs(g.z - o.pos.z) <= config.grasp_height &&
          (!best || d < best_d)) {
        best = i;
        best_d = d;
      }
    }
    if (best) {
      next.objects[*best].attached = true;
      next.objects[*best].pos = {g.x, g.y, g.z};
    }
  }
  ++next.t;
  return next;
}

bool is_success(const EnvState& state) {
  return state.moved_count == static_cast<int>(state.objects.size());
}

bool is_done(const EnvState& state, const EnvConfig& config) {
  return is_success(state) || state.t >= config.effective_t_max();
}

std::string check_state(const EnvState& s, const EnvConfig& config) {
  const GripperPose& g = s.gripper;
  if (g.x < kWorkspaceMinX || g.x > kWorkspaceMaxX || g.y < kWorkspaceMinY ||
      g.y > kWorkspaceMaxY || g.z < kWorkspaceMinZ || g.z > kWorkspaceMaxZ ||
      g.theta < kThetaMin || g.theta > kThetaMax)
    return "gripper outside workspace";
  int attached = 0, placed = 0;
  const int n = static_cast<int>(s.objects.size());
  for (int i = 0; i < n; ++i) {
    const ObjectState& o = s.objects[i];
    if (o.attached && o.placed) return "object " + std::to_string(i) + " attached and placed";
    if (o.attached) {
      ++attached;
      if (!(o.pos == Vec3{g.x, g.y, g.z})) return "attached object detached from gripper";
    }
    if (o.placed) {
      ++placed;
      Vec3 slot = place_slot(i, n);
      if (o.pos.z != 0.0 ||
          horizontal_distance(o.pos.x, o.pos.y, slot.x, slot.y) > config.place_radius)
        return "placed object " + std::to_string(i) + " outside the blue area";
    }
  }
  if (attached > 1) return "more than one object attached";
  if (placed != s.moved_count) return "moved_count disagrees with placed objects";
  return {};
}

}  // namespace dipa
