#include <cmath>
#include <stdexcept>

#include "dipa/config.hpp"
#include "dipa/features.hpp"
#include "dipa/operator.hpp"
#include "dipa/teleop.hpp"
#include "dipa/teleop_schema.hpp"
#include "dipa/trajectory_io.hpp"

namespace dipa::teleop {
namespace {

using nlohmann::json;

json error(const std::string& reason, const std::string& of = {}) {
  json j = {{"type", "error"}, {"reason", reason}};
  if (!of.empty()) j["of"] = of;
  return j;
}

json ack(const std::string& of) { return {{"type", "ack"}, {"of", of}}; }

json arr(const ActionDelta& a) { return json(a.to_array()); }

json state_message(const SessionState& s, const Step& last) {
  json objects = json::array();
  for (const auto& o : s.state.objects)
    objects.push_back({{"pos", {o.pos.x, o.pos.y, o.pos.z}}, {"attached", o.attached}, {"placed", o.placed}});
  const auto& g = s.state.gripper;
  return {{"type", "state"},
          {"tick", s.tick},
          {"gripper", {g.x, g.y, g.z, g.theta}},
          {"objects", objects},
          {"mode", s.state.current_mode.index()},
          {"intended", arr(last.action_intended)},
          {"executed", arr(last.action_executed)},
          {"moved_count", s.state.moved_count},
          {"sigma", s.sigma.sigma}};
}

void begin_episode(SessionState& s) {
  ++s.episode;
  RngStream root = derive_stream(s.seed, {"teleop", label("episode", s.episode)});
  RngStream reset_rng = root.child("reset");
  s.state = reset(s.env, reset_rng);
  s.noise = root.child("noise");
  s.pending = {};
  s.tick = 0;
  s.finished = false;
  s.phase = Phase::kRunning;
  s.buffer = Trajectory{};
  s.buffer.episode_id = s.episode;
  s.buffer.iteration_k = s.sigma.iteration_k;
  s.buffer.seed = s.seed;
  s.buffer.method = kRegimePartialAuto;
  s.buffer.sigma = s.sigma;
}

void advance(SessionState& s, std::vector<json>& out) {
  const Mode mode = s.state.current_mode;
  Step st;
  st.t = s.state.t;
  st.state_full = full_state_features(s.state);
  st.mode = mode;
  st.episode_id = s.episode;
  st.iteration_k = s.buffer.iteration_k;
  if (mode.is_manual()) {
    st.action_intended = clamp_action(s.pending);
    st.action_executed = inject_disturbance(st.action_intended, s.sigma, *s.noise);
  } else {
    st.action_intended = auto_action(mode);
    st.action_executed = st.action_intended;
  }
  s.state = step(s.env, s.state, st.action_executed);
  ++s.tick;
  s.buffer.success = is_success(s.state);
  s.buffer.terminal = {{s.state.gripper.x, s.state.gripper.y, s.state.gripper.z, s.state.gripper.theta},
                       s.state.moved_count,
                       s.state.t};
  out.push_back(state_message(s, st));
  s.buffer.steps.push_back(std::move(st));
  if (is_done(s.state, s.env)) {
    s.finished = true;
    out.push_back({{"type", "done"},
                   {"success", s.buffer.success},
                   {"tick", s.tick},
                   {"moved_count", s.state.moved_count}});
  }
}

bool running(const SessionState& s) { return s.phase == Phase::kRunning && !s.finished; }

}  // namespace

std::string to_string(Phase p) {
  switch (p) {
    case Phase::kIdle: return "idle";
    case Phase::kRunning: return "running";
    case Phase::kSaved: return "saved";
  }
  return "unknown";
}

Outcome handle_message(SessionState s, const json& msg) {
  std::vector<json> out;
  if (std::string why = validate_message(msg, "inbound"); !why.empty()) {
    out.push_back(error(why));
    return {std::move(s), std::move(out)};
  }
  const std::string type = msg["type"].get<std::string>();

  if (type == "hello") {
    out.push_back({{"type", "welcome"},
                   {"protocol", kProtocolVersion},
                   {"tick_ms", kTickMs},
                   {"n_modes", kNumModes},
                   {"manual_modes", kManualModes},
                   {"phase", to_string(s.phase)},
                   {"n_objects", s.env.n_objects},
                   {"sigma", s.sigma.sigma}});
  } else if (type == "start") {
    try {
      EnvConfig env = msg.contains("config") ? env_config_from_json(msg["config"], s.env) : s.env;
      DisturbanceLevel sigma = s.sigma;
      if (msg.contains("sigma")) sigma.sigma = msg["sigma"].get<ActionArray>();
      if (!sigma.is_valid()) throw std::invalid_argument("sigma must be finite and non-negative");
      s.env = env;
      s.sigma = sigma;
      if (msg.contains("seed")) s.seed = msg["seed"].get<std::uint64_t>();
    } catch (const std::exception& e) {
      out.push_back(error(e.what(), type));
      return {std::move(s), std::move(out)};
    }
    begin_episode(s);
    json a = ack(type);
    a["episode"] = s.episode;
    out.push_back(a);
  } else if (type == "reset") {
    if (s.phase == Phase::kIdle) {
      out.push_back(error("no episode started", type));
    } else {
      begin_episode(s);
      json a = ack(type);
      a["episode"] = s.episode;
      out.push_back(a);
    }
  } else if (type == "action") {
    if (!running(s)) {
      out.push_back(error("no running episode", type));
    } else {
      ActionDelta a{msg["dx"].get<double>(), msg["dy"].get<double>(), msg["dz"].get<double>(),
                    msg["dtheta"].get<double>()};
      if (!a.is_finite()) {
        out.push_back(error("action components must be finite", type));
      } else {
        const bool manual = s.state.current_mode.is_manual();
        if (manual) s.pending = clamp_action(a);
        json r = ack(type);
        r["applied"] = manual;
        out.push_back(r);
      }
    }
  } else if (type == "switch_mode") {
    if (!running(s)) {
      out.push_back(error("no running episode", type));
    } else {
      const Mode cur = s.state.current_mode;
      const int to = msg.contains("to") ? msg["to"].get<int>() : cur.next().index();
      if (to < 0 || to >= kNumModes || !cur.can_transition_to(Mode(to))) {
        out.push_back({{"type", "nack"},
                       {"of", type},
                       {"reason", "mode " + std::to_string(to) + " is not reachable from mode " +
                                      std::to_string(cur.index())},
                       {"allowed", {cur.index(), cur.next().index()}}});
      } else {
        if (to != cur.index()) s.pending = {};
        s.state.current_mode = Mode(to);
        json r = ack(type);
        r["mode"] = to;
        out.push_back(r);
      }
    }
  } else if (type == "save") {
    if (s.phase == Phase::kIdle) {
      out.push_back(error("no episode started", type));
    } else {
      try {
        auto path = save_episode(s);
        out.push_back({{"type", "saved"},
                       {"path", path.string()},
                       {"steps", static_cast<long>(s.buffer.steps.size())}});
        s.phase = Phase::kSaved;
      } catch (const std::exception& e) {
        out.push_back(error(e.what(), type));
      }
    }
  } else if (type == "tick") {
    if (running(s)) advance(s, out);
  }
  return {std::move(s), std::move(out)};
}

std::filesystem::path save_episode(const SessionState& s) {
  if (s.buffer.steps.empty()) throw std::logic_error("empty buffer: nothing to save");
  std::filesystem::create_directories(s.output_dir);
  auto path = s.output_dir / ("teleop_seed" + std::to_string(s.seed) + "_ep" +
                              std::to_string(s.episode) + ".jsonl");
  std::vector<Trajectory> one{s.buffer};
  write_trajectory_file(one, path);
  return path;
}

const json& message_schema() {
  static const json schema = json::parse(kTeleopSchemaText);
  return schema;
}

namespace {

bool kind_matches(const json& v, const std::string& kind) {
  if (kind == "number") return v.is_number() && std::isfinite(v.get<double>());
  if (kind == "integer") return v.is_number_integer();
  if (kind == "string") return v.is_string();
  if (kind == "boolean") return v.is_boolean();
  if (kind == "object") return v.is_object();
  if (kind == "array") return v.is_array();
  if (kind == "number[3]" || kind == "number[4]") {
    std::size_t n = kind == "number[3]" ? 3 : 4;
    if (!v.is_array() || v.size() != n) return false;
    for (const auto& x : v)
      if (!x.is_number() || !std::isfinite(x.get<double>())) return false;
    return true;
  }
  return false;
}

}  // namespace

std::string validate_message(const json& msg, const std::string& direction) {
  if (!msg.is_object()) return "message must be an object";
  auto t = msg.find("type");
  if (t == msg.end() || !t->is_string()) return "missing string field 'type'";
  const json& types = message_schema().at(direction);
  const std::string type = t->get<std::string>();
  auto spec = types.find(type);
  if (spec == types.end()) return "unknown " + direction + " type '" + type + "'";
  const json& required = spec->at("required");
  const json& optional = spec->at("optional");
  for (const auto& [field, kind] : required.items()) {
    auto v = msg.find(field);
    if (v == msg.end()) return type + ": missing field '" + field + "'";
    if (!kind_matches(*v, kind.get<std::string>()))
      return type + "." + field + ": expected " + kind.get<std::string>();
  }
  for (const auto& [field, value] : msg.items()) {
    if (field == "type" || required.contains(field)) continue;
    auto kind = optional.find(field);
    if (kind == optional.end()) return type + ": unexpected field '" + field + "'";
    if (!kind_matches(value, kind->get<std::string>()))
      return type + "." + field + ": expected " + kind->get<std::string>();
  }
  return {};
}

}  // namespace dipa::teleop
