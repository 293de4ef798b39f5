#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dipa/core.hpp"
#include "dipa/env.hpp"
#include "dipa/rng.hpp"

namespace dipa::teleop {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kTickMs = 50;

enum class Phase { kIdle, kRunning, kSaved };
std::string to_string(Phase p);

struct SessionState {
  EnvConfig env;
  DisturbanceLevel sigma;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = ".";

  EnvState state;
  ActionDelta pending;  // last human action, held between ticks
  Trajectory buffer;
  long tick = 0;
  Phase phase = Phase::kIdle;
  bool finished = false;
  int episode = 0;
  std::optional<RngStream> noise;
};

struct Outcome {
  SessionState session;
  std::vector<nlohmann::json> outbound;
};

// Session state machine. Inbound types: hello, start, action, switch_mode,
// reset, save, tick. `tick` advances the simulation one step; the server
// generates it every kTickMs.
Outcome handle_message(SessionState session, const nlohmann::json& msg);

// Writes the episode buffer as a trajectory file and returns its path.
// Throws std::logic_error for an empty buffer.
std::filesystem::path save_episode(const SessionState& session);

// Message schema shared with browser clients.
const nlohmann::json& message_schema();
// Empty when `msg` conforms to the schema for `direction` ("inbound" or
// "outbound"), otherwise the reason.
std::string validate_message(const nlohmann::json& msg, const std::string& direction);

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  int tick_ms = kTickMs;       // 0: clients drive the clock with `tick` messages
  SessionState initial;
  std::function<void(const std::string&)> log;
};

// WebSocket host for one session. A single thread owns the session and
// serializes inbound messages and ticks.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();
  // Blocks until the I/O thread exits.
  void wait();
  unsigned short port() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace dipa::teleop
