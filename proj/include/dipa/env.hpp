#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dipa/core.hpp"
#include "dipa/rng.hpp"

namespace dipa {

// Workspace box (cm / rad).
inline constexpr double kWorkspaceMinX = -30.0, kWorkspaceMaxX = 30.0;
inline constexpr double kWorkspaceMinY = -20.0, kWorkspaceMaxY = 20.0;
inline constexpr double kWorkspaceMinZ = 0.0, kWorkspaceMaxZ = 20.0;
inline constexpr double kThetaMin = 0.0, kThetaMax = 1.0;

inline constexpr double kWhiteAreaX = -20.0;  // nominal pick slots
inline constexpr double kBlueAreaX = 20.0;    // place slots
inline constexpr double kSlotSpacingY = 8.0;
inline constexpr int kSlotCapacity = 5;

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
  bool operator==(const Vec3&) const = default;
};

struct GripperPose {
  double x = 0.0, y = 0.0, z = 10.0, theta = 1.0;
  bool operator==(const GripperPose&) const = default;
};

inline constexpr GripperPose kHomePose{0.0, 0.0, 10.0, 1.0};

struct ObjectState {
  Vec3 pos;
  bool attached = false;
  bool placed = false;
  bool operator==(const ObjectState&) const = default;
};

struct EnvState {
  GripperPose gripper = kHomePose;
  std::vector<ObjectState> objects;
  int moved_count = 0;
  Mode current_mode;
  int t = 0;

  // Index of the attached object, if any.
  std::optional<std::size_t> attached_index() const;
  bool operator==(const EnvState&) const = default;
};

// Threshold designs for the end of the carry mode.
enum class Auto2Threshold { kL, kM, kS };

double threshold_x(Auto2Threshold th);
std::string to_string(Auto2Threshold th);
Auto2Threshold parse_threshold(const std::string& s);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EnvConfig {
  int n_objects = 1;
  double sigma_init_cm = 2.0;
  Auto2Threshold auto2_threshold = Auto2Threshold::kL;
  std::optional<int> t_max;  // defaults to 150 * n_objects
  double grasp_radius = 2.0;
  double grasp_height = 2.0;
  double place_radius = 5.0;
  double theta_close = 0.1;
  double theta_open = 0.9;

  int effective_t_max() const { return t_max.value_or(150 * n_objects); }
  double auto2_x() const { return threshold_x(auto2_threshold); }
  void validate() const;  // throws ConfigError
};

// Nominal Y of slot `i` when `n` objects are in play; slots are centred on 0.
double slot_y(int i, int n);
Vec3 pick_slot(int i, int n);
Vec3 place_slot(int i, int n);

EnvState reset(const EnvConfig& config, RngStream& rng);
EnvState step(const EnvConfig& config, const EnvState& state, const ActionDelta& action);
bool is_success(const EnvState& state);
bool is_done(const EnvState& state, const EnvConfig& config);

// Workspace bounds, attachment and placement bookkeeping. Empty when valid.
std::string check_state(const EnvState& state, const EnvConfig& config);

}  // namespace dipa
