#include <doctest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dipa/learner.hpp"
#include "dipa/teleop.hpp"
#include "dipa/trajectory_io.hpp"

using namespace dipa;
using namespace dipa::teleop;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Driver {
  SessionState session;
  std::vector<json> log;

  std::vector<json> send(const json& msg) {
    Outcome o = handle_message(std::move(session), msg);
    session = std::move(o.session);
    for (const auto& m : o.outbound) {
      std::string why = validate_message(m, "outbound");
      INFO(m.dump());
      CHECK(why.empty());
      log.push_back(m);
    }
    return o.outbound;
  }
};

SessionState session_in(const fs::path& dir, int n_objects = 1) {
  SessionState s;
  s.env.n_objects = n_objects;
  s.output_dir = dir;
  s.seed = 5;
  return s;
}

json action(const ActionDelta& a) {
  return {{"type", "action"}, {"dx", a.dx}, {"dy", a.dy}, {"dz", a.dz}, {"dtheta", a.dtheta}};
}

// Plays a whole episode with the algorithmic operator acting as the human.
fs::path scripted_episode(Driver& d, const ActionArray& sigma) {
  AlgorithmicOperator op({}, d.session.env);
  d.send({{"type", "start"}, {"sigma", sigma}});
  while (!d.session.finished) {
    Mode want = op.switch_mode(d.session.state);
    if (want != d.session.state.current_mode) d.send({{"type", "switch_mode"}, {"to", want.index()}});
    if (d.session.state.current_mode.is_manual())
      d.send(action(op.manual_action(d.session.state, d.session.state.current_mode)));
    d.send({{"type", "tick"}});
  }
  auto out = d.send({{"type", "save"}});
  REQUIRE(out.size() == 1);
  REQUIRE(out[0]["type"] == "saved");
  return out[0]["path"].get<std::string>();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("hello is answered with the protocol description") {
  Driver d{session_in(".")};
  auto out = d.send({{"type", "hello"}, {"client", "test"}});
  REQUIRE(out.size() == 1);
  CHECK(out[0]["type"] == "welcome");
  CHECK(out[0]["protocol"] == kProtocolVersion);
  CHECK(out[0]["manual_modes"] == json({1, 3}));
  CHECK(out[0]["phase"] == "idle");
}

TEST_CASE("malformed and out-of-phase messages") {
  Driver d{session_in(".")};
  CHECK(d.send({{"type", "fly"}})[0]["type"] == "error");
  CHECK(d.send({{"type", "action"}, {"dx", 1}})[0]["type"] == "error");
  CHECK(d.send(json::array())[0]["type"] == "error");
  CHECK(d.send(action({1, 0, 0, 0}))[0]["reason"] == "no running episode");
  CHECK(d.send({{"type", "reset"}})[0]["type"] == "error");
  CHECK(d.send({{"type", "tick"}}).empty());
  CHECK(d.send({{"type", "start"}, {"sigma", {0.1, -1, 0, 0}}})[0]["type"] == "error");
}

TEST_CASE("mode switches follow the cycle") {
  Driver d{session_in(".")};
  d.send({{"type", "start"}});
  auto ok = d.send({{"type", "switch_mode"}, {"to", 1}});
  CHECK(ok[0]["type"] == "ack");
  CHECK(ok[0]["mode"] == 1);
  auto bad = d.send({{"type", "switch_mode"}, {"to", 3}});
  CHECK(bad[0]["type"] == "nack");
  CHECK(bad[0]["allowed"] == json({1, 2}));
  CHECK(d.session.state.current_mode == Mode(1));
  auto next = d.send({{"type", "switch_mode"}});
  CHECK(next[0]["mode"] == 2);
}

TEST_CASE("human actions are ignored in automatic modes") {
  Driver d{session_in(".")};
  d.send({{"type", "start"}});
  auto out = d.send(action({1, 1, 1, 0}));
  CHECK(out[0]["applied"] == false);
  auto st = d.send({{"type", "tick"}});
  CHECK(st[0]["executed"] == json({-5.0, 0.0, 0.0, 1.0}));
  d.send({{"type", "switch_mode"}, {"to", 1}});
  CHECK(d.send(action({9, 0, 0, 0}))[0]["applied"] == true);
  st = d.send({{"type", "tick"}});
  CHECK(st[0]["intended"] == json({5.0, 0.0, 0.0, 0.0}));
  CHECK(st[0]["executed"] == st[0]["intended"]);
}

TEST_CASE("fifty ticks save fifty steps that read back") {
  fs::path dir = fs::temp_directory_path() / "dipa_test_teleop_fifty";
  fs::remove_all(dir);
  Driver d{session_in(dir, 2)};
  d.send({{"type", "start"}});
  for (int i = 0; i < 50; ++i) d.send({{"type", "tick"}});
  auto out = d.send({{"type", "save"}});
  REQUIRE(out[0]["type"] == "saved");
  CHECK(out[0]["steps"] == 50);
  auto back = read_trajectory_file(out[0]["path"].get<std::string>());
  REQUIRE(back.size() == 1);
  CHECK(back[0] == d.session.buffer);
  CHECK(d.session.phase == Phase::kSaved);
  fs::remove_all(dir);
}

TEST_CASE("saving an empty episode is an error") {
  Driver d{session_in(fs::temp_directory_path())};
  d.send({{"type", "start"}});
  CHECK(d.send({{"type", "save"}})[0]["type"] == "error");
}

TEST_CASE("scripted human demonstrations train a policy and replay exactly") {
  fs::path dir = fs::temp_directory_path() / "dipa_test_teleop_demo";
  fs::remove_all(dir);
  std::vector<Trajectory> demos;
  std::vector<fs::path> files;
  Driver d{session_in(dir)};
  for (int e = 0; e < 3; ++e) {
    files.push_back(scripted_episode(d, {0.0, 0.0, 0.0, 0.0}));
    auto t = read_trajectory_file(files.back());
    CHECK(t[0].success);
    CHECK(count_illegal_transitions(t[0]) == 0);
    for (const auto& s : t[0].steps) CHECK(s.action_executed == s.action_intended);
    demos.push_back(t[0]);
  }
  nn::TrainSpec spec;
  spec.max_epochs = 5;
  FitOutput fit = fit_iteration(Method::kBcpa, demos, 1, spec);
  CHECK(fit.switch_rows > 0);
  CHECK(fit.bundle.switch_net.has_value());

  std::string first = slurp(files[0]);
  fs::remove_all(dir);
  Driver again{session_in(dir)};
  fs::path replay = scripted_episode(again, {0.0, 0.0, 0.0, 0.0});
  CHECK(slurp(replay) == first);
  fs::remove_all(dir);
}

TEST_CASE("disturbed sessions only perturb manual steps") {
  fs::path dir = fs::temp_directory_path() / "dipa_test_teleop_noise";
  fs::remove_all(dir);
  Driver d{session_in(dir)};
  auto t = read_trajectory_file(scripted_episode(d, {0.05, 0.05, 0.05, 0.01}))[0];
  int perturbed = 0;
  for (const auto& s : t.steps) {
    if (s.mode->is_manual())
      perturbed += !(s.action_executed == s.action_intended);
    else
      CHECK(s.action_executed == s.action_intended);
  }
  CHECK(perturbed > 0);
  CHECK(t.sigma.sigma == ActionArray{0.05, 0.05, 0.05, 0.01});
  fs::remove_all(dir);
}

TEST_CASE("schema describes every message kind") {
  const json& s = message_schema();
  for (const char* t : {"hello", "start", "action", "switch_mode", "reset", "save", "tick"})
    CHECK(s["inbound"].contains(t));
  for (const char* t : {"welcome", "ack", "nack", "error", "state", "done", "saved"})
    CHECK(s["outbound"].contains(t));
  CHECK(validate_message({{"type", "action"}, {"dx", 1}, {"dy", 0}, {"dz", 0}, {"dtheta", 0}, {"x", 1}},
                         "inbound") != "");
  CHECK(validate_message({{"type", "start"}, {"sigma", {1, 2, 3}}}, "inbound") != "");
  CHECK(validate_message({{"type", "start"}, {"seed", 3}}, "inbound") == "");
}

TEST_CASE("websocket server round-trip") {
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  ServerOptions opts;
  opts.port = 0;
  opts.tick_ms = 0;
  opts.initial = session_in(fs::temp_directory_path());
  Server server(opts);
  server.start();
  REQUIRE(server.port() != 0);

  boost::asio::io_context ioc;
  tcp::resolver resolver(ioc);
  websocket::stream<tcp::socket> ws(ioc);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/");

  auto roundtrip = [&](const json& msg, int replies) {
    ws.write(boost::asio::buffer(msg.dump()));
    std::vector<json> out;
    for (int i = 0; i < replies; ++i) {
      beast::flat_buffer buf;
      ws.read(buf);
      out.push_back(json::parse(beast::buffers_to_string(buf.data())));
      CHECK(validate_message(out.back(), "outbound") == "");
    }
    return out;
  };
  CHECK(roundtrip({{"type", "hello"}}, 1)[0]["type"] == "welcome");
  CHECK(roundtrip({{"type", "start"}}, 1)[0]["episode"] == 1);
  auto st = roundtrip({{"type", "tick"}}, 1);
  CHECK(st[0]["type"] == "state");
  CHECK(st[0]["tick"] == 1);
  CHECK(roundtrip({{"type", "switch_mode"}, {"to", 2}}, 1)[0]["type"] == "nack");
  ws.close(websocket::close_code::normal);
  server.stop();
}

TEST_CASE("server-driven clock rejects client ticks") {
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;
  using tcp = boost::asio::ip::tcp;

  ServerOptions opts;
  opts.port = 0;
  opts.tick_ms = 10;
  opts.initial = session_in(fs::temp_directory_path());
  Server server(opts);
  server.start();

  boost::asio::io_context ioc;
  tcp::resolver resolver(ioc);
  websocket::stream<tcp::socket> ws(ioc);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/");
  ws.write(boost::asio::buffer(json{{"type", "tick"}}.dump()));
  beast::flat_buffer buf;
  ws.read(buf);
  auto reply = json::parse(beast::buffers_to_string(buf.data()));
  CHECK(reply["type"] == "error");
  CHECK(reply["of"] == "tick");

  ws.write(boost::asio::buffer(json{{"type", "start"}}.dump()));
  int states = 0;
  for (int i = 0; i < 20 && states < 3; ++i) {
    beast::flat_buffer b;
    ws.read(b);
    states += json::parse(beast::buffers_to_string(b.data()))["type"] == "state";
  }
  CHECK(states == 3);
  ws.close(websocket::close_code::normal);
  server.stop();
}
