#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dipa {

inline constexpr int kActionDims = 4;
inline constexpr int kNumModes = 4;
inline constexpr double kMaxTranslationCm = 5.0;
inline constexpr double kMaxRotationRad = 1.0;

using ActionArray = std::array<double, kActionDims>;

// Per-step command: translation increments in cm, gripper-joint increment in
// rad.
struct ActionDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
  double dtheta = 0.0;

  ActionArray to_array() const { return {dx, dy, dz, dtheta}; }
  static ActionDelta from_array(const ActionArray& a) {
    return {a[0], a[1], a[2], a[3]};
  }
  double operator[](int d) const;

  bool is_finite() const;
  bool operator==(const ActionDelta&) const = default;
};

// Clamps each translation component to +-max_translation and the rotation to
// +-max_rotation. Non-finite components are rejected with std::domain_error.
ActionDelta clamp_action(const ActionDelta& a,
                         double max_translation = kMaxTranslationCm,
                         double max_rotation = kMaxRotationRad);

enum class ModeKind { kManual, kAuto };

// Mode index along the 0 -> 1 -> 2 -> 3 -> 0 cycle.
class Mode {
 public:
  constexpr Mode() = default;
  explicit Mode(int index);

  constexpr int index() const { return index_; }
  ModeKind kind() const;
  bool is_manual() const { return kind() == ModeKind::kManual; }
  Mode next() const { return Mode((index_ + 1) % kNumModes); }

  // True for {current, next-in-cycle}.
  bool can_transition_to(Mode to) const {
    return to == *this || to == next();
  }

  bool operator==(const Mode&) const = default;

 private:
  int index_ = 0;
};

// Modes operated manually. Everything else runs a fixed automatic policy.
inline constexpr std::array<int, 2> kManualModes = {1, 3};

bool is_manual_mode(int index);

struct Step {
  int t = 0;
  std::vector<double> state_full;
  ActionDelta action_intended;
  ActionDelta action_executed;
  // Absent for full-manual (non partially automated) demonstrations.
  std::optional<Mode> mode;
  int episode_id = 0;
  int iteration_k = 0;

  bool operator==(const Step&) const = default;
};

struct TerminalSummary {
  std::array<double, 4> gripper{};  // X, Y, Z, theta
  int moved_count = 0;
  int t = 0;

  bool operator==(const TerminalSummary&) const = default;
};

struct DisturbanceLevel {
  ActionArray sigma{};  // per-dimension variance, cm^2 / rad^2
  int iteration_k = 1;

  static DisturbanceLevel zero(int k = 1) { return {{0, 0, 0, 0}, k}; }
  bool is_zero() const;
  bool is_valid() const;
  bool operator==(const DisturbanceLevel&) const = default;
};

// Collection regime recorded in the episode header.
inline constexpr const char* kRegimePartialAuto = "pa";
inline constexpr const char* kRegimeFullManual = "full_manual";

struct Trajectory {
  int episode_id = 0;
  int iteration_k = 1;
  std::uint64_t seed = 0;
  std::string method = kRegimePartialAuto;
  DisturbanceLevel sigma;
  std::vector<Step> steps;
  TerminalSummary terminal;
  bool success = false;

  bool operator==(const Trajectory&) const = default;
};

// Which recorded action is the operator's training label.
enum class LabelSource { kIntended, kExecuted };

inline const ActionDelta& label_action(const Step& s, LabelSource src) {
  return src == LabelSource::kIntended ? s.action_intended : s.action_executed;
}

std::string to_string(LabelSource src);
LabelSource parse_label_source(const std::string& s);

// Returns an empty string when every consecutive mode pair along the
// trajectory is a legal cycle transition, otherwise a description of the
// first violation.
std::string check_mode_transitions(const Trajectory& traj);

std::size_t count_illegal_transitions(const Trajectory& traj);

}  // namespace dipa
