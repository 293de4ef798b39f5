#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dipa/core.hpp"

namespace dipa {

// Line-delimited JSON. One file record, then per episode:
//   {"type":"episode","episode_id","iteration","seed","method","sigma":[4]}
//   {"type":"step","t","state_full":[],"action_intended":[4],
//    "action_executed":[4],"mode":int|null}   (one per step)
//   {"type":"end","success","terminal":{"gripper":[4],"moved_count","t"}}
inline constexpr const char* kTrajectoryFormat = "dipa-trajectories";
inline constexpr int kTrajectoryFormatVersion = 1;

class TrajectoryParseError : public std::runtime_error {
 public:
  TrajectoryParseError(std::size_t line, const std::string& field,
                       const std::string& what);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

std::size_t write_trajectories(std::span<const Trajectory> trajectories,
                               std::ostream& sink);
std::vector<Trajectory> read_trajectories(std::istream& source);

std::size_t write_trajectory_file(std::span<const Trajectory> trajectories,
                                  const std::filesystem::path& path);
std::vector<Trajectory> read_trajectory_file(const std::filesystem::path& path);

// Incremental writer used while an episode is still running.
class TrajectoryAppender {
 public:
  explicit TrajectoryAppender(std::ostream& sink);
  void begin_episode(const Trajectory& header);
  void append_step(const Step& step);
  void end_episode(const Trajectory& trailer);
  std::size_t bytes_written() const { return bytes_; }

 private:
  void emit(const std::string& line);
  std::ostream& sink_;
  std::size_t bytes_ = 0;
};

}  // namespace dipa
