#include <csignal>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dipa/config.hpp"
#include "dipa/harness.hpp"
#include "dipa/teleop.hpp"

namespace {

using namespace dipa;

void warn(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

ExperimentConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_experiment_config(path);
  if (seed) c.seeds = {*seed};
  return c;
}

void print_metrics(const EvalMetrics& m) { std::cout << to_json(m).dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Disturbance injection under partial automation: experiments and teleoperation"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Experiment config file (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Root seed (replaces the config's seed list)");

  auto* run = app.add_subcommand("run", "Run every (method, seed) of the config");
  std::string out_dir, cell_file, demo_method = "DIPA";
  std::vector<std::string> demos;
  run->add_option("--out", out_dir, "Artifact directory");
  run->add_option("--cell", cell_file, "Run a single cell file written by sweep")->check(CLI::ExistingFile);
  run->add_option("--from-demos", demos, "Fit on recorded trajectory files instead of collecting")
      ->check(CLI::ExistingFile);
  run->add_option("--method", demo_method, "Method used with --from-demos");

  auto* eval = app.add_subcommand("eval", "Evaluate a saved policy bundle");
  std::string bundle_dir;
  int episodes = 10;
  eval->add_option("--bundle", bundle_dir, "Bundle directory")->required();
  eval->add_option("--episodes", episodes, "Test episodes")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Aggregate experiment records into CSV tables");
  std::string report_dir;
  report->add_option("--dir", report_dir, "Artifact directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Run a preset grid of experiment cells");
  std::string preset;
  int jobs = 1;
  sweep->add_option("--preset", preset, "p1 (objects 1..3) or p2 (thresholds L, M, S)")->required();
  sweep->add_option("--out", out_dir, "Artifact directory");
  sweep->add_option("--jobs", jobs, "Cells run in parallel processes")->check(CLI::PositiveNumber);

  auto* teleop = app.add_subcommand("teleop", "Host a live demonstration session over WebSocket");
  unsigned short port = 8765;
  std::vector<double> sigma;
  int tick_ms = teleop::kTickMs;
  std::string address = "127.0.0.1";
  teleop->add_option("--port", port, "Listening port");
  teleop->add_option("--address", address, "Listening address");
  teleop->add_option("--sigma", sigma, "Disturbance variances dx,dy,dz,dtheta")->delimiter(',')->expected(4);
  teleop->add_option("--out", out_dir, "Directory for saved episodes");
  teleop->add_option("--tick-ms", tick_ms, "Tick period; 0 lets the client send ticks");

  auto* config = app.add_subcommand("config", "Configuration helpers");
  config->require_subcommand(1);
  auto* defaults = config->add_subcommand("print-defaults", "Print the default experiment config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*defaults) {
      std::cout << default_config_json().dump(2) << '\n';
      return 0;
    }
    if (*run && !cell_file.empty()) {
      CellOutcome o = run_cell_file(cell_file, warn);
      return o.status == "complete" ? 0 : 1;
    }

    ExperimentConfig cfg = load(config_path, seed);
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    if (*run) {
      if (!demos.empty()) {
        std::vector<std::filesystem::path> files(demos.begin(), demos.end());
        DemoRunResult r = cmd_run_from_demos(cfg, parse_method(demo_method), files);
        std::cerr << "bundle: " << r.bundle_dir.string() << '\n';
        print_metrics(r.eval);
        return 0;
      }
      std::cout << cmd_run(cfg, warn).string() << '\n';
      return 0;
    }
    if (*eval) {
      print_metrics(cmd_eval(bundle_dir, cfg.env, episodes, cfg.seeds.front()));
      return 0;
    }
    if (*report) {
      Report r = cmd_report(report_dir);
      for (const auto& f : r.files) std::cout << f.string() << '\n';
      if (r.partial_records > 0) warn(std::to_string(r.partial_records) + " partial record(s) flagged");
      return 0;
    }
    if (*sweep) {
      auto cells = sweep_cells(cfg, parse_sweep_preset(preset));
      auto outcomes = run_cells(cfg, cells, jobs, "/proc/self/exe", warn);
      int partial = 0;
      for (const auto& o : outcomes) partial += o.status == "complete" ? 0 : 1;
      std::cout << cfg.output_dir.string() << '\n';
      return partial == 0 ? 0 : 1;
    }
    if (*teleop) {
      teleop::ServerOptions opts;
      opts.address = address;
      opts.port = port;
      opts.tick_ms = tick_ms;
      opts.initial.env = cfg.env;
      opts.initial.seed = cfg.seeds.front();
      opts.initial.output_dir = out_dir.empty() ? std::filesystem::path("demos") : std::filesystem::path(out_dir);
      if (!sigma.empty()) std::copy(sigma.begin(), sigma.end(), opts.initial.sigma.sigma.begin());
      if (!opts.initial.sigma.is_valid()) throw ConfigError("--sigma must be non-negative");
      opts.log = [](const std::string& line) { std::cerr << line << '\n'; };

      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      teleop::Server server(opts);
      server.start();
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
