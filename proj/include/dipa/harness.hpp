#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dipa/env.hpp"
#include "dipa/evaluation.hpp"
#include "dipa/learner.hpp"
#include "dipa/mlp.hpp"
#include "dipa/operator.hpp"

namespace dipa {

struct ExperimentConfig {
  std::vector<Method> methods{Method::kDipa};
  EnvConfig env;
  OperatorConfig op;
  nn::TrainSpec train;
  int iterations = 5;  // K
  int episodes = 10;   // E
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int eval_episodes = 10;
  std::filesystem::path output_dir = "runs";
  SigmaReading reading = SigmaReading::kLabelAnchored;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing keys keep the defaults in `base`.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// One (method, condition, seed) experiment.
struct Cell {
  Method method = Method::kDipa;
  int n_objects = 1;
  Auto2Threshold threshold = Auto2Threshold::kL;
  std::uint64_t seed = 0;

  std::string condition() const;  // "n2_L"
  // Relative to the artifact root: <condition>/<method id>/seed_<seed>
  std::filesystem::path relative_dir() const;
};

std::string method_id(Method m);  // filesystem-safe ("DIPA_MINUS")

// Every (method, seed) of the config at its own env settings.
std::vector<Cell> cells_for(const ExperimentConfig& c);

enum class SweepPreset { kP1, kP2 };
SweepPreset parse_sweep_preset(const std::string& s);
// p1: objects {1,2,3} at X_L; p2: thresholds {L,M,S} with two objects.
std::vector<Cell> sweep_cells(const ExperimentConfig& c, SweepPreset preset);

ExperimentSpec spec_for(const ExperimentConfig& c, const Cell& cell,
                        const std::filesystem::path& root);

struct CellOutcome {
  Cell cell;
  std::string status;  // "complete" | "partial"
  std::string error;
};

// Runs the cells and merges them into <output_dir>/manifest.json. With
// jobs > 1 each cell runs in a child process of `self_exe` (invoked as
// `<self_exe> run --cell <cell.json>`).
std::vector<CellOutcome> run_cells(const ExperimentConfig& c, const std::vector<Cell>& cells,
                                   int jobs = 1, const std::filesystem::path& self_exe = {},
                                   const WarningSink& warn = {});

// Runs one cell described by a file written by run_cells.
CellOutcome run_cell_file(const std::filesystem::path& cell_file, const WarningSink& warn = {});

std::filesystem::path cmd_run(const ExperimentConfig& c, const WarningSink& warn = {});

// Fits `method` on recorded demonstrations (e.g. teleop sessions), saves
// the bundle under <out>/bundle and evaluates it.
struct DemoRunResult {
  std::filesystem::path bundle_dir;
  FitOutput fit;
  EvalMetrics eval;
};
DemoRunResult cmd_run_from_demos(const ExperimentConfig& c, Method method,
                                 const std::vector<std::filesystem::path>& demo_files);

EvalMetrics cmd_eval(const std::filesystem::path& bundle_dir, const EnvConfig& env, int episodes,
                     std::uint64_t seed);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};
MeanStd mean_std(const std::vector<double>& xs);

struct SuccessRow {
  std::string method;
  std::string condition;
  int n_objects = 0;
  std::string threshold;
  int seeds = 0;
  int pooled_episodes = 0;
  double mean_success = 0.0;
  double std_success = 0.0;
  double mean_objects_moved = 0.0;
  int partial_seeds = 0;
};

struct Report {
  std::vector<SuccessRow> success;
  std::vector<std::filesystem::path> files;
  int partial_records = 0;
};

// Aggregates every record under `root` (see manifest.json) into
//   report/success.csv, report/success_series.csv,
//   report/sigma_series.csv, report/nll_series.csv
// Throws std::runtime_error("no records ...") when nothing is found.
Report cmd_report(const std::filesystem::path& root);

nlohmann::json default_config_json();

}  // namespace dipa
