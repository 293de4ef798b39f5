#include "dipa/harness.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dipa/config.hpp"
#include "dipa/trajectory_io.hpp"

extern char** environ;

namespace dipa {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json read_json(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("cannot read " + p.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& j) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

json to_json(const Cell& c) {
  return {{"method", method_id(c.method)},
          {"n_objects", c.n_objects},
          {"threshold", to_string(c.threshold)},
          {"seed", c.seed}};
}

Cell cell_from_json(const json& j) {
  Cell c;
  c.method = parse_method(j.at("method").get<std::string>());
  c.n_objects = j.at("n_objects").get<int>();
  c.threshold = parse_threshold(j.at("threshold").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

void merge_manifest(const fs::path& root, const std::vector<CellOutcome>& outcomes) {
  fs::path path = root / "manifest.json";
  json manifest = {{"format", "dipa-artifacts"}, {"version", 1}, {"cells", json::array()}};
  if (fs::exists(path)) manifest = read_json(path);
  std::map<std::string, json> by_dir;
  for (const auto& c : manifest["cells"]) by_dir[c.at("dir").get<std::string>()] = c;
  for (const auto& o : outcomes) {
    json entry = to_json(o.cell);
    entry["dir"] = o.cell.relative_dir().generic_string();
    entry["status"] = o.status;
    if (!o.error.empty()) entry["error"] = o.error;
    by_dir[entry["dir"].get<std::string>()] = entry;
  }
  manifest["cells"] = json::array();
  for (auto& [dir, entry] : by_dir) manifest["cells"].push_back(entry);
  write_json(path, manifest);
}

std::string record_status(const fs::path& dir) {
  fs::path rec = dir / "record.json";
  if (!fs::exists(rec)) return "partial";
  return read_json(rec).value("status", "partial");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("methods must be nonempty");
  if (iterations < 1) throw ConfigError("K must be >= 1");
  if (episodes < 1) throw ConfigError("E must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must be nonempty");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
  env.validate();
  op.validate();
  train.validate();
}

json to_json(const ExperimentConfig& c) {
  json methods = json::array();
  for (Method m : c.methods) methods.push_back(method_id(m));
  return {{"methods", methods},
          {"env", to_json(c.env)},
          {"operator", to_json(c.op)},
          {"train", to_json(c.train)},
          {"K", c.iterations},
          {"E", c.episodes},
          {"seeds", c.seeds},
          {"eval_episodes", c.eval_episodes},
          {"output_dir", c.output_dir.generic_string()},
          {"sigma_reading", to_string(c.reading)},
          {"label_source", to_string(c.op.label_source)}};
}

ExperimentConfig experiment_config_from_json(const json& j, ExperimentConfig c) {
  static const std::set<std::string> known = {"methods", "env", "operator", "train", "K", "E",
                                              "seeds", "eval_episodes", "output_dir",
                                              "sigma_reading", "label_source"};
  if (!j.is_object()) throw ConfigError("config: expected an object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("config: unknown key '" + key + "'");

  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j["methods"]) {
      try {
        c.methods.push_back(parse_method(m.get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("methods: ") + e.what());
      }
    }
  }
  if (j.contains("env")) c.env = env_config_from_json(j["env"], c.env);
  if (j.contains("operator")) c.op = operator_config_from_json(j["operator"], c.op);
  if (j.contains("train")) c.train = train_spec_from_json(j["train"], c.train);
  read_key(j, "K", c.iterations);
  read_key(j, "E", c.episodes);
  read_key(j, "seeds", c.seeds);
  read_key(j, "eval_episodes", c.eval_episodes);
  if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
  try {
    if (j.contains("sigma_reading"))
      c.reading = parse_sigma_reading(j["sigma_reading"].get<std::string>());
    if (j.contains("label_source"))
      c.op.label_source = parse_label_source(j["label_source"].get<std::string>());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return experiment_config_from_json(read_json(path));
}

std::string method_id(Method m) {
  switch (m) {
    case Method::kDipa: return "DIPA";
    case Method::kDipaMinus: return "DIPA_MINUS";
    case Method::kSDipaMinus: return "S_DIPA_MINUS";
    case Method::kBcpa: return "BCPA";
    case Method::kDart: return "DART";
    case Method::kBc: return "BC";
  }
  throw std::logic_error("unknown method");
}

std::string Cell::condition() const {
  return "n" + std::to_string(n_objects) + "_" + to_string(threshold);
}

fs::path Cell::relative_dir() const {
  return fs::path(condition()) / method_id(method) / ("seed_" + std::to_string(seed));
}

std::vector<Cell> cells_for(const ExperimentConfig& c) {
  std::vector<Cell> cells;
  for (Method m : c.methods)
    for (auto seed : c.seeds) cells.push_back({m, c.env.n_objects, c.env.auto2_threshold, seed});
  return cells;
}

SweepPreset parse_sweep_preset(const std::string& s) {
  if (s == "p1" || s == "P1") return SweepPreset::kP1;
  if (s == "p2" || s == "P2") return SweepPreset::kP2;
  throw ConfigError("unknown sweep preset '" + s + "' (expected p1|p2)");
}

std::vector<Cell> sweep_cells(const ExperimentConfig& c, SweepPreset preset) {
  std::vector<Cell> cells;
  if (preset == SweepPreset::kP1) {
    for (int n : {1, 2, 3})
      for (Method m : c.methods)
        for (auto seed : c.seeds) cells.push_back({m, n, Auto2Threshold::kL, seed});
  } else {
    for (auto th : {Auto2Threshold::kL, Auto2Threshold::kM, Auto2Threshold::kS})
      for (Method m : c.methods)
        for (auto seed : c.seeds) cells.push_back({m, 2, th, seed});
  }
  return cells;
}

ExperimentSpec spec_for(const ExperimentConfig& c, const Cell& cell, const fs::path& root) {
  ExperimentSpec s;
  s.method = cell.method;
  s.env = c.env;
  s.env.n_objects = cell.n_objects;
  s.env.auto2_threshold = cell.threshold;
  if (cell.n_objects != c.env.n_objects && c.env.t_max) s.env.t_max.reset();
  s.op = c.op;
  s.train = c.train;
  s.iterations = c.iterations;
  s.episodes = c.episodes;
  s.seed = cell.seed;
  s.eval_episodes = c.eval_episodes;
  s.reading = c.reading;
  s.output_dir = root / cell.relative_dir();
  return s;
}

namespace {

CellOutcome run_one(const ExperimentConfig& c, const Cell& cell, const WarningSink& warn) {
  CellOutcome out{cell, "complete", ""};
  try {
    run_experiment(spec_for(c, cell, c.output_dir), warn);
  } catch (const std::exception& e) {
    out.status = "partial";
    out.error = e.what();
    if (warn) warn(cell.relative_dir().generic_string() + ": " + e.what());
  }
  return out;
}

}  // namespace

CellOutcome run_cell_file(const fs::path& cell_file, const WarningSink& warn) {
  json j = read_json(cell_file);
  ExperimentConfig c = experiment_config_from_json(j.at("config"));
  return run_one(c, cell_from_json(j.at("cell")), warn);
}

std::vector<CellOutcome> run_cells(const ExperimentConfig& c, const std::vector<Cell>& cells,
                                   int jobs, const fs::path& self_exe, const WarningSink& warn) {
  c.validate();
  fs::create_directories(c.output_dir);
  write_json(c.output_dir / "config.json", to_json(c));
  std::vector<CellOutcome> outcomes;

  if (jobs <= 1 || self_exe.empty()) {
    for (const auto& cell : cells) {
      outcomes.push_back(run_one(c, cell, warn));
      merge_manifest(c.output_dir, {outcomes.back()});
    }
    return outcomes;
  }

  struct Child {
    pid_t pid;
    std::size_t index;
  };
  std::vector<Child> running;
  std::vector<std::optional<CellOutcome>> results(cells.size());
  auto reap_one = [&] {
    int status = 0;
    pid_t pid = ::wait(&status);
    if (pid < 0) throw std::runtime_error("wait failed");
    auto it = std::find_if(running.begin(), running.end(), [&](const Child& ch) { return ch.pid == pid; });
    if (it == running.end()) return;
    const Cell& cell = cells[it->index];
    CellOutcome o{cell, record_status(c.output_dir / cell.relative_dir()), ""};
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      o.status = "partial";
      o.error = "cell process exited abnormally";
    }
    results[it->index] = o;
    merge_manifest(c.output_dir, {o});
    running.erase(it);
  };

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (static_cast<int>(running.size()) >= jobs) reap_one();
    fs::path cell_file = c.output_dir / "cells" / (cells[i].relative_dir().generic_string() + ".json");
    write_json(cell_file, {{"config", to_json(c)}, {"cell", to_json(cells[i])}});
    std::string exe = self_exe.string(), cmd = "run", flag = "--cell", arg = cell_file.string();
    char* argv[] = {exe.data(), cmd.data(), flag.data(), arg.data(), nullptr};
    pid_t pid = 0;
    if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv, environ) != 0)
      throw std::runtime_error("cannot spawn " + exe);
    running.push_back({pid, i});
  }
  while (!running.empty()) reap_one();
  for (auto& r : results) outcomes.push_back(*r);
  return outcomes;
}

fs::path cmd_run(const ExperimentConfig& c, const WarningSink& warn) {
  run_cells(c, cells_for(c), 1, {}, warn);
  return c.output_dir;
}

DemoRunResult cmd_run_from_demos(const ExperimentConfig& c, Method method,
                                 const std::vector<fs::path>& demo_files) {
  std::vector<Trajectory> demos;
  for (const auto& f : demo_files) {
    auto part = read_trajectory_file(f);
    demos.insert(demos.end(), part.begin(), part.end());
  }
  if (demos.empty()) throw std::runtime_error("from-demos: no episodes in the given files");
  DemoRunResult r;
  r.fit = fit_iteration(method, demos, c.env.n_objects, c.train, c.op.label_source);
  r.bundle_dir = c.output_dir / "from_demos" / method_id(method) / "bundle";
  save_bundle(r.fit.bundle, r.bundle_dir);
  r.eval = evaluate_bundle(r.fit.bundle, c.env, c.eval_episodes, c.seeds.front());
  write_json(r.bundle_dir.parent_path() / "metrics.json", to_json(r.eval));
  return r;
}

EvalMetrics cmd_eval(const fs::path& bundle_dir, const EnvConfig& env, int episodes,
                     std::uint64_t seed) {
  if (!fs::exists(bundle_dir / "manifest.json"))
    throw std::runtime_error("missing checkpoint: " + (bundle_dir / "manifest.json").string());
  PolicyBundle bundle = load_bundle(bundle_dir);
  if (bundle.n_objects != env.n_objects)
    throw ConfigError("bundle was trained for " + std::to_string(bundle.n_objects) +
                      " objects, env has " + std::to_string(env.n_objects));
  return evaluate_bundle(bundle, env, episodes, seed);
}

MeanStd mean_std(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_std: empty sample");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

Report cmd_report(const fs::path& root) {
  struct Loaded {
    fs::path dir;
    json record;
  };
  std::vector<Loaded> records;
  if (fs::is_directory(root)) {
    for (const auto& entry : fs::recursive_directory_iterator(root))
      if (entry.is_regular_file() && entry.path().filename() == "record.json")
        records.push_back({entry.path().parent_path(), read_json(entry.path())});
  }
  if (records.empty()) throw std::runtime_error("no records under " + root.string());
  std::sort(records.begin(), records.end(),
            [](const Loaded& a, const Loaded& b) { return a.dir < b.dir; });

  fs::path out = root / "report";
  fs::create_directories(out);
  Report report;

  std::ofstream series(out / "success_series.csv"), sigma(out / "sigma_series.csv"),
      nll(out / "nll_series.csv");
  series << "method,n_objects,threshold,seed,status,k,success_rate,mean_objects_moved,"
            "mean_episode_length,illegal_transitions\n";
  sigma << "method,n_objects,threshold,seed,status,k,"
           "used_x,used_y,used_z,used_theta,next_x,next_y,next_z,next_theta,selected_steps,degenerate\n";
  nll << "method,n_objects,threshold,seed,status,k,manual_nll\n";

  struct Group {
    std::string method, threshold;
    int n = 0;
    std::vector<double> success, moved;
    int pooled = 0, partial = 0;
  };
  std::map<std::tuple<std::string, int, std::string>, Group> groups;

  for (const auto& rec : records) {
    const json& spec = rec.record.at("spec");
    std::string method = spec.at("method").get<std::string>();
    int n = spec.at("env").at("n_objects").get<int>();
    std::string th = spec.at("env").at("auto2_threshold").get<std::string>();
    auto seed = spec.at("seed").get<std::uint64_t>();
    std::string status = rec.record.value("status", "partial");
    const json& its = rec.record.at("iterations");
    std::string prefix = method + "," + std::to_string(n) + "," + th + "," + std::to_string(seed) + "," + status;
    for (const auto& it : its) {
      const json& ev = it.at("eval");
      series << prefix << "," << it.at("k").get<int>() << "," << fmt(ev.at("success_rate").get<double>())
             << "," << fmt(ev.at("mean_objects_moved").get<double>()) << ","
             << fmt(ev.at("mean_episode_length").get<double>()) << ","
             << ev.at("illegal_transitions").get<std::size_t>() << "\n";
      sigma << prefix << "," << it.at("k").get<int>();
      for (const char* key : {"sigma_used", "sigma_next"})
        for (double v : it.at(key)) sigma << "," << fmt(v);
      sigma << "," << it.at("sigma_selected_steps").get<std::size_t>() << ","
            << (it.at("sigma_degenerate").get<bool>() ? 1 : 0) << "\n";
      if (!it.at("manual_nll").is_null())
        nll << prefix << "," << it.at("k").get<int>() << "," << fmt(it.at("manual_nll").get<double>()) << "\n";
    }

    Group& g = groups[{method, n, th}];
    g.method = method;
    g.n = n;
    g.threshold = th;
    if (status != "complete") {
      ++g.partial;
      ++report.partial_records;
      continue;
    }
    const json& last = its.back().at("eval");
    g.success.push_back(last.at("success_rate").get<double>());
    g.moved.push_back(last.at("mean_objects_moved").get<double>());
    g.pooled += last.at("episodes").get<int>();
  }

  std::ofstream success(out / "success.csv");
  success << "# success_rate = fraction of test episodes with every object placed within T_max, "
             "taken at the final iteration; std is the population std over seeds\n";
  success << "method,n_objects,threshold,seeds,pooled_episodes,mean_success,std_success,"
             "mean_objects_moved,partial_seeds\n";
  for (auto& [key, g] : groups) {
    SuccessRow row;
    row.method = g.method;
    row.n_objects = g.n;
    row.threshold = g.threshold;
    row.condition = "n" + std::to_string(g.n) + "_" + g.threshold;
    row.seeds = static_cast<int>(g.success.size());
    row.pooled_episodes = g.pooled;
    row.partial_seeds = g.partial;
    if (!g.success.empty()) {
      MeanStd s = mean_std(g.success);
      row.mean_success = s.mean;
      row.std_success = s.std;
      row.mean_objects_moved = mean_std(g.moved).mean;
    }
    success << row.method << "," << row.n_objects << "," << row.threshold << "," << row.seeds << ","
            << row.pooled_episodes << ",";
    if (g.success.empty())
      success << ",,";
    else
      success << fmt(row.mean_success) << "," << fmt(row.std_success) << "," << fmt(row.mean_objects_moved);
    success << "," << row.partial_seeds << "\n";
    report.success.push_back(row);
  }
  report.files = {out / "success.csv", out / "success_series.csv", out / "sigma_series.csv",
                  out / "nll_series.csv"};
  return report;
}

json default_config_json() { return to_json(ExperimentConfig{}); }

}  // namespace dipa
