#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dipa/core.hpp"
#include "dipa/env.hpp"
#include "dipa/evaluation.hpp"
#include "dipa/mlp.hpp"
#include "dipa/operator.hpp"
#include "dipa/policies.hpp"

namespace dipa {

enum class Method { kDipa, kDipaMinus, kSDipaMinus, kBcpa, kDart, kBc };

inline constexpr std::array<Method, 6> kAllMethods = {Method::kDipa, Method::kDipaMinus,
                                                      Method::kSDipaMinus, Method::kBcpa,
                                                      Method::kDart, Method::kBc};

// Which mode selects the steps that enter the disturbance estimate.
enum class DeltaModeSource { kPredicted, kDemonstrated, kNotApplicable };

struct MethodTraits {
  bool uses_pa = false;
  bool uses_disturbance = false;
  bool separated_action_nets = false;
  DeltaModeSource delta = DeltaModeSource::kNotApplicable;

  DatasetLayout layout() const { return {uses_pa, separated_action_nets}; }
};

MethodTraits traits(Method m);
std::string to_string(Method m);
// Accepts display names ("DIPA(-)") and identifiers ("DIPA_MINUS").
Method parse_method(const std::string& s);

// Step selection for the DIPA disturbance estimate.
//   kLabelAnchored: demonstrated-manual steps, action taken under the mode the
//                   learned switcher predicts there.
//   kLiteral:       steps the learned switcher predicts as manual, labelled by
//                   querying the algorithmic operator at the logged state.
enum class SigmaReading { kLabelAnchored, kLiteral };
std::string to_string(SigmaReading r);
SigmaReading parse_sigma_reading(const std::string& s);

struct SigmaOptions {
  SigmaReading reading = SigmaReading::kLabelAnchored;
  LabelSource label = LabelSource::kIntended;
  const AlgorithmicOperator* op = nullptr;  // required by kLiteral
};

// Logging hook for warnings (discarded episodes, degenerate selections).
using WarningSink = std::function<void(const std::string&)>;

struct CollectionResult {
  std::vector<Trajectory> trajectories;
  int discarded = 0;
};

// One demonstration episode. Streams: (root_seed, {"collect", k, e, attempt})
// with children "reset" and "noise"; identical for every method.
Trajectory collect_episode(Method method, const AlgorithmicOperator& op,
                           const DisturbanceLevel& sigma, int k, int e, std::uint64_t root_seed,
                           int attempt = 0);

// E episodes. Operator faults discard the episode and resample it with the
// next attempt stream.
CollectionResult collect_iteration(Method method, const AlgorithmicOperator& op,
                                   const DisturbanceLevel& sigma_k, int episodes, int k,
                                   std::uint64_t root_seed, const WarningSink& warn = {});

// Predicted-minus-label residuals of the steps selected for the disturbance
// estimate. Empty for methods without disturbance injection.
std::vector<ActionArray> disturbance_residuals(Method method, std::span<const Trajectory> trajectories,
                                               const PolicyBundle& bundle, const SigmaOptions& options);

struct SigmaUpdate {
  DisturbanceLevel sigma;
  std::size_t selected_steps = 0;
  bool degenerate = false;  // empty selection, previous level kept
};

// Per-dimension mean of squared residuals (closed-form Gaussian MLE).
SigmaUpdate update_sigma(Method method, std::span<const Trajectory> trajectories_k,
                         const PolicyBundle& bundle_next, const SigmaOptions& options,
                         const DisturbanceLevel& previous, const WarningSink& warn = {});

// Mean negative Gaussian log-density of the selected operator labels under
// N(predicted, diag(sigma)). Throws std::invalid_argument for non-positive
// variance or an empty selection.
double manual_nll(Method method, std::span<const Trajectory> trajectories,
                  const PolicyBundle& bundle, const ActionArray& sigma,
                  const SigmaOptions& options);

struct FitOutput {
  PolicyBundle bundle;
  std::optional<nn::TrainReport> switch_report;
  std::vector<nn::TrainReport> action_reports;
  std::size_t switch_rows = 0;
  std::size_t action_rows = 0;
};

// Fits the method's networks on the aggregate of every trajectory given.
FitOutput fit_iteration(Method method, std::span<const Trajectory> trajectories, int n_objects,
                        const nn::TrainSpec& spec, LabelSource label = LabelSource::kIntended);

struct ExperimentSpec {
  Method method = Method::kDipa;
  EnvConfig env;
  OperatorConfig op;
  nn::TrainSpec train;
  int iterations = 5;  // K
  int episodes = 10;   // E
  std::uint64_t seed = 0;
  int eval_episodes = 10;
  SigmaReading reading = SigmaReading::kLabelAnchored;
  std::optional<std::filesystem::path> output_dir;

  void validate() const;
};

struct IterationRecord {
  int k = 1;
  DisturbanceLevel sigma_used;
  std::vector<Trajectory> trajectories;
  PolicyBundle bundle;
  DisturbanceLevel sigma_next;
  std::size_t sigma_selected_steps = 0;
  bool sigma_degenerate = false;
  std::optional<double> manual_nll;  // at sigma_next, when strictly positive
  EvalMetrics eval;
  std::size_t training_rows = 0;  // switch rows (PA) or action rows
  int discarded_episodes = 0;
};

// Collect with sigma_k, fit on iterations 1..k, estimate sigma_{k+1},
// evaluate. With an output directory every iteration is persisted as
//   iter_<k>/trajectories.jsonl, iter_<k>/bundle/, iter_<k>/sigma.json,
//   iter_<k>/metrics.json
// plus record.json for the whole experiment (status "partial" on failure,
// after which the error is rethrown).
std::vector<IterationRecord> run_experiment(const ExperimentSpec& spec,
                                            const WarningSink& warn = {});

nlohmann::json to_json(const ExperimentSpec& spec);

}  // namespace dipa
