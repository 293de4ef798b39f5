#include "dipa/trajectory_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace dipa {
namespace {

using nlohmann::json;

json array4(const ActionArray& a) { return json::array({a[0], a[1], a[2], a[3]}); }

json step_record(const Step& s) {
  json j;
  j["type"] = "step";
  j["t"] = s.t;
  j["state_full"] = s.state_full;
  j["action_intended"] = array4(s.action_intended.to_array());
  j["action_executed"] = array4(s.action_executed.to_array());
  j["mode"] = s.mode ? json(s.mode->index()) : json(nullptr);
  return j;
}

json header_record(const Trajectory& t) {
  json j;
  j["type"] = "episode";
  j["episode_id"] = t.episode_id;
  j["iteration"] = t.iteration_k;
  j["seed"] = t.seed;
  j["method"] = t.method;
  j["sigma"] = array4(t.sigma.sigma);
  return j;
}

json end_record(const Trajectory& t) {
  json j;
  j["type"] = "end";
  j["success"] = t.success;
  j["terminal"] = {{"gripper", json::array({t.terminal.gripper[0], t.terminal.gripper[1],
                                            t.terminal.gripper[2], t.terminal.gripper[3]})},
                   {"moved_count", t.terminal.moved_count},
                   {"t", t.terminal.t}};
  return j;
}

// Field access with error context.
class RecordReader {
 public:
  RecordReader(const json& j, std::size_t line, std::string record)
      : j_(j), line_(line), record_(std::move(record)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
    throw TrajectoryParseError(line_, record_ + "." + field, msg);
  }

  const json& get(const std::string& field) const {
    auto it = j_.find(field);
    if (it == j_.end()) fail(field, "missing");
    return *it;
  }

  long long integer(const std::string& field) const {
    const json& v = get(field);
    if (!v.is_number_integer()) fail(field, "expected integer");
    return v.get<long long>();
  }

  std::uint64_t unsigned_integer(const std::string& field) const {
    const json& v = get(field);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(field, "expected non-negative integer");
    return v.get<std::uint64_t>();
  }

  double number(const json& v, const std::string& field) const {
    if (!v.is_number()) fail(field, "expected number");
    double d = v.get<double>();
    if (!std::isfinite(d)) fail(field, "non-finite number");
    return d;
  }

  std::vector<double> numbers(const std::string& field) const {
    const json& v = get(field);
    if (!v.is_array()) fail(field, "expected array");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(number(v[i], field + "[" + std::to_string(i) + "]"));
    return out;
  }

  ActionArray array4(const std::string& field) const {
    auto v = numbers(field);
    if (v.size() != kActionDims)
      fail(field, "expected " + std::to_string(kActionDims) + " entries, got " +
                      std::to_string(v.size()));
    return {v[0], v[1], v[2], v[3]};
  }

  std::string string(const std::string& field) const {
    const json& v = get(field);
    if (!v.is_string()) fail(field, "expected string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& field) const {
    const json& v = get(field);
    if (!v.is_boolean()) fail(field, "expected boolean");
    return v.get<bool>();
  }

 private:
  const json& j_;
  std::size_t line_;
  std::string record_;
};

}  // namespace

TrajectoryParseError::TrajectoryParseError(std::size_t line, const std::string& field,
                                           const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", field " + field + ": " + what),
      line_(line),
      field_(field) {}

TrajectoryAppender::TrajectoryAppender(std::ostream& sink) : sink_(sink) {
  json j = {{"type", "file"},
            {"format", kTrajectoryFormat},
            {"version", kTrajectoryFormatVersion}};
  emit(j.dump());
}

void TrajectoryAppender::emit(const std::string& line) {
  sink_ << line << '\n';
  bytes_ += line.size() + 1;
}

void TrajectoryAppender::begin_episode(const Trajectory& header) {
  emit(header_record(header).dump());
}

void TrajectoryAppender::append_step(const Step& step) { emit(step_record(step).dump()); }

void TrajectoryAppender::end_episode(const Trajectory& trailer) {
  emit(end_record(trailer).dump());
}

std::size_t write_trajectories(std::span<const Trajectory> trajectories, std::ostream& sink) {
  TrajectoryAppender out(sink);
  for (const auto& t : trajectories) {
    out.begin_episode(t);
    for (const auto& s : t.steps) out.append_step(s);
    out.end_episode(t);
  }
  sink.flush();
  return out.bytes_written();
}

std::vector<Trajectory> read_trajectories(std::istream& source) {
  std::vector<Trajectory> out;
  std::string text;
  std::size_t line_no = 0;
  bool seen_file_header = false;
  Trajectory* open = nullptr;

  while (std::getline(source, text)) {
    ++line_no;
    if (text.empty()) continue;
    json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object())
      throw TrajectoryParseError(line_no, "<record>", "not a JSON object");
    auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string())
      throw TrajectoryParseError(line_no, "type", "missing record type");
    const std::string type = type_it->get<std::string>();

    if (!seen_file_header) {
      RecordReader r(j, line_no, "file");
      if (type != "file") r.fail("type", "first record must be the file header");
      if (r.string("format") != kTrajectoryFormat) r.fail("format", "unknown format");
      if (r.integer("version") != kTrajectoryFormatVersion) r.fail("version", "unsupported version");
      seen_file_header = true;
      continue;
    }

    if (type == "episode") {
      RecordReader r(j, line_no, "episode");
      if (open) r.fail("type", "previous episode not terminated");
      Trajectory t;
      t.episode_id = static_cast<int>(r.integer("episode_id"));
      t.iteration_k = static_cast<int>(r.integer("iteration"));
      t.seed = r.unsigned_integer("seed");
      t.method = r.string("method");
      t.sigma.sigma = r.array4("sigma");
      t.sigma.iteration_k = t.iteration_k;
      if (!t.sigma.is_valid()) r.fail("sigma", "negative variance");
      out.push_back(std::move(t));
      open = &out.back();
    } else if (type == "step") {
      RecordReader r(j, line_no, "step");
      if (!open) r.fail("type", "step outside an episode");
      Step s;
      s.t = static_cast<int>(r.integer("t"));
      s.state_full = r.numbers("state_full");
      s.action_intended = ActionDelta::from_array(r.array4("action_intended"));
      s.action_executed = ActionDelta::from_array(r.array4("action_executed"));
      const json& m = r.get("mode");
      if (!m.is_null()) {
        if (!m.is_number_integer()) r.fail("mode", "expected integer or null");
        long long idx = m.get<long long>();
        if (idx < 0 || idx >= kNumModes)
          r.fail("mode", "index " + std::to_string(idx) + " outside [0, " +
                             std::to_string(kNumModes) + ")");
        s.mode = Mode(static_cast<int>(idx));
      }
      s.episode_id = open->episode_id;
      s.iteration_k = open->iteration_k;
      open->steps.push_back(std::move(s));
    } else if (type == "end") {
      RecordReader r(j, line_no, "end");
      if (!open) r.fail("type", "end outside an episode");
      open->success = r.boolean("success");
      const json& term = r.get("terminal");
      if (!term.is_object()) r.fail("terminal", "expected object");
      RecordReader tr(term, line_no, "end.terminal");
      auto g = tr.array4("gripper");
      open->terminal.gripper = {g[0], g[1], g[2], g[3]};
      open->terminal.moved_count = static_cast<int>(tr.integer("moved_count"));
      open->terminal.t = static_cast<int>(tr.integer("t"));
      open = nullptr;
    } else {
      throw TrajectoryParseError(line_no, "type", "unknown record type '" + type + "'");
    }
  }
  if (!seen_file_header) throw TrajectoryParseError(line_no, "file", "missing file header");
  if (open) throw TrajectoryParseError(line_no, "end", "last episode not terminated");
  return out;
}

std::size_t write_trajectory_file(std::span<const Trajectory> trajectories,
                                  const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return write_trajectories(trajectories, f);
}

std::vector<Trajectory> read_trajectory_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return read_trajectories(f);
}

}  // namespace dipa
