#include "dipa/learner.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>

#include "dipa/config.hpp"
#include "dipa/features.hpp"
#include "dipa/trajectory_io.hpp"

namespace dipa {

MethodTraits traits(Method m) {
  switch (m) {
    case Method::kDipa: return {true, true, false, DeltaModeSource::kPredicted};
    case Method::kDipaMinus: return {true, true, false, DeltaModeSource::kDemonstrated};
    case Method::kSDipaMinus: return {true, true, true, DeltaModeSource::kDemonstrated};
    case Method::kBcpa: return {true, false, false, DeltaModeSource::kNotApplicable};
    case Method::kDart: return {false, true, false, DeltaModeSource::kNotApplicable};
    case Method::kBc: return {false, false, false, DeltaModeSource::kNotApplicable};
  }
  throw std::logic_error("unknown method");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kDipa: return "DIPA";
    case Method::kDipaMinus: return "DIPA(-)";
    case Method::kSDipaMinus: return "S-DIPA(-)";
    case Method::kBcpa: return "BCPA";
    case Method::kDart: return "DART";
    case Method::kBc: return "BC";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "DIPA") return Method::kDipa;
  if (u == "DIPA(-)" || u == "DIPA_MINUS" || u == "DIPA-") return Method::kDipaMinus;
  if (u == "S-DIPA(-)" || u == "S_DIPA_MINUS" || u == "S-DIPA-") return Method::kSDipaMinus;
  if (u == "BCPA") return Method::kBcpa;
  if (u == "DART") return Method::kDart;
  if (u == "BC") return Method::kBc;
  throw std::invalid_argument("unknown method '" + s + "'");
}

std::string to_string(SigmaReading r) {
  return r == SigmaReading::kLabelAnchored ? "label_anchored" : "literal";
}

SigmaReading parse_sigma_reading(const std::string& s) {
  if (s == "label_anchored") return SigmaReading::kLabelAnchored;
  if (s == "literal") return SigmaReading::kLiteral;
  throw std::invalid_argument("sigma reading must be 'label_anchored' or 'literal' (got '" + s + "')");
}

Trajectory collect_episode(Method method, const AlgorithmicOperator& op,
                           const DisturbanceLevel& sigma, int k, int e, std::uint64_t root_seed,
                           int attempt) {
  const MethodTraits tr = traits(method);
  const EnvConfig& env = op.env_config();
  DisturbanceLevel level = tr.uses_disturbance ? sigma : DisturbanceLevel::zero(sigma.iteration_k);
  level.iteration_k = k;
  if (!level.is_valid()) throw std::invalid_argument("collect_episode: invalid disturbance level");

  RngStream base = derive_stream(
      root_seed, {"collect", label("k", k), label("e", e), label("attempt", attempt)});
  RngStream reset_rng = base.child("reset");
  RngStream noise_rng = base.child("noise");

  Trajectory traj;
  traj.episode_id = e;
  traj.iteration_k = k;
  traj.seed = root_seed;
  traj.method = tr.uses_pa ? kRegimePartialAuto : kRegimeFullManual;
  traj.sigma = level;

  EnvState s = reset(env, reset_rng);
  while (!is_done(s, env)) {
    Step st;
    st.t = s.t;
    st.episode_id = e;
    st.iteration_k = k;
    st.state_full = full_state_features(s);
    if (tr.uses_pa) {
      Mode m = op.switch_mode(s);
      s.current_mode = m;
      st.mode = m;
      if (m.is_manual()) {
        st.action_intended = op.manual_action(s, m);
        st.action_executed = inject_disturbance(st.action_intended, level, noise_rng);
      } else {
        st.action_intended = auto_action(m);
        st.action_executed = st.action_intended;
      }
    } else {
      st.action_intended = op.full_manual_action(s);
      st.action_executed = inject_disturbance(st.action_intended, level, noise_rng);
    }
    ActionDelta executed = st.action_executed;
    traj.steps.push_back(std::move(st));
    s = step(env, s, executed);
  }
  traj.success = is_success(s);
  traj.terminal = {{s.gripper.x, s.gripper.y, s.gripper.z, s.gripper.theta}, s.moved_count, s.t};
  return traj;
}

CollectionResult collect_iteration(Method method, const AlgorithmicOperator& op,
                                   const DisturbanceLevel& sigma_k, int episodes, int k,
                                   std::uint64_t root_seed, const WarningSink& warn) {
  if (episodes < 1) throw std::invalid_argument("collect_iteration: episodes must be >= 1");
  constexpr int kMaxAttempts = 32;
  CollectionResult out;
  for (int e = 1; e <= episodes; ++e) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == kMaxAttempts)
        throw std::runtime_error("collect_iteration: episode " + std::to_string(e) +
                                 " faulted " + std::to_string(kMaxAttempts) + " times");
      try {
        out.trajectories.push_back(collect_episode(method, op, sigma_k, k, e, root_seed, attempt));
        break;
      } catch (const OperatorFault& f) {
        ++out.discarded;
        if (warn)
          warn("k=" + std::to_string(k) + " e=" + std::to_string(e) + " attempt " +
               std::to_string(attempt) + " discarded: " + f.what());
      }
    }
  }
  return out;
}

namespace {

ActionArray residual(const ActionDelta& predicted, const ActionDelta& label) {
  ActionArray r;
  for (int d = 0; d < kActionDims; ++d) r[d] = predicted[d] - label[d];
  return r;
}

}  // namespace

std::vector<ActionArray> disturbance_residuals(Method method, std::span<const Trajectory> trajectories,
                                               const PolicyBundle& bundle,
                                               const SigmaOptions& options) {
  const MethodTraits tr = traits(method);
  std::vector<ActionArray> out;
  if (!tr.uses_disturbance) return out;

  if (!tr.uses_pa) {
    for (const auto& traj : trajectories)
      for (const auto& s : traj.steps)
        out.push_back(residual(predict_action(bundle, s.state_full, std::nullopt),
                               label_action(s, options.label)));
    return out;
  }

  const bool literal = tr.delta == DeltaModeSource::kPredicted &&
                       options.reading == SigmaReading::kLiteral;
  if (literal && !options.op)
    throw std::invalid_argument("literal disturbance selection needs a queryable operator");

  for (const auto& traj : trajectories) {
    Mode prev(0);  // demonstrated previous mode is the masking context
    for (const auto& s : traj.steps) {
      if (!s.mode) throw std::invalid_argument("disturbance_residuals: PA step without a mode");
      const Mode demo = *s.mode;
      if (tr.delta == DeltaModeSource::kDemonstrated) {
        if (demo.is_manual())
          out.push_back(residual(predict_action(bundle, s.state_full, demo),
                                 label_action(s, options.label)));
      } else if (!literal) {
        if (demo.is_manual()) {
          Mode predicted = predict_mode(bundle, s.state_full, prev);
          out.push_back(residual(predict_action(bundle, s.state_full, predicted),
                                 label_action(s, options.label)));
        }
      } else {
        Mode predicted = predict_mode(bundle, s.state_full, prev);
        if (predicted.is_manual()) {
          EnvState st = state_from_features(s.state_full, options.op->env_config(), predicted, s.t);
          try {
            ActionDelta lbl = options.op->manual_action(st, predicted);
            out.push_back(residual(predict_action(bundle, s.state_full, predicted), lbl));
          } catch (const OperatorFault&) {
            // nothing left to reach at this state; no operator label exists
          }
        }
      }
      prev = demo;
    }
  }
  return out;
}

SigmaUpdate update_sigma(Method method, std::span<const Trajectory> trajectories_k,
                         const PolicyBundle& bundle_next, const SigmaOptions& options,
                         const DisturbanceLevel& previous, const WarningSink& warn) {
  SigmaUpdate out;
  const int next_k = previous.iteration_k + 1;
  if (!traits(method).uses_disturbance) {
    out.sigma = DisturbanceLevel::zero(next_k);
    return out;
  }
  auto res = disturbance_residuals(method, trajectories_k, bundle_next, options);
  out.selected_steps = res.size();
  if (res.empty()) {
    out.degenerate = true;
    out.sigma = previous;
    out.sigma.iteration_k = next_k;
    if (warn) warn("update_sigma: no steps selected, keeping previous disturbance level");
    return out;
  }
  ActionArray acc{};
  for (const auto& r : res)
    for (int d = 0; d < kActionDims; ++d) acc[d] += r[d] * r[d];
  for (int d = 0; d < kActionDims; ++d) acc[d] /= static_cast<double>(res.size());
  out.sigma = {acc, next_k};
  return out;
}

double manual_nll(Method method, std::span<const Trajectory> trajectories,
                  const PolicyBundle& bundle, const ActionArray& sigma,
                  const SigmaOptions& options) {
  for (double s : sigma)
    if (!(s > 0.0) || !std::isfinite(s))
      throw std::invalid_argument("manual_nll: variance must be strictly positive");
  auto res = disturbance_residuals(method, trajectories, bundle, options);
  if (res.empty()) throw std::invalid_argument("manual_nll: no steps selected");
  double log_norm = 0.0;
  for (double s : sigma) log_norm += 0.5 * std::log(2.0 * std::numbers::pi * s);
  double total = 0.0;
  for (const auto& r : res) {
    double q = 0.0;
    for (int d = 0; d < kActionDims; ++d) q += r[d] * r[d] / sigma[d];
    total += log_norm + 0.5 * q;
  }
  return total / static_cast<double>(res.size());
}

FitOutput fit_iteration(Method method, std::span<const Trajectory> trajectories, int n_objects,
                        const nn::TrainSpec& spec, LabelSource label_source) {
  if (trajectories.empty()) throw std::invalid_argument("fit_iteration: no trajectories");
  const MethodTraits tr = traits(method);
  PolicyDatasets data = build_datasets(trajectories, n_objects, tr.layout(), label_source);

  FitOutput out;
  PolicyBundle& b = out.bundle;
  b.method = to_string(method);
  b.n_objects = n_objects;
  b.uses_pa = tr.uses_pa;

  if (data.switch_data) {
    nn::TrainSpec s = spec;
    s.seed = derive_stream(spec.seed, {"net", "switch"}).next_u64();
    auto trained = train_regressor(*data.switch_data, s);
    out.switch_rows = data.switch_data->size();
    b.switch_net = std::move(trained.regressor);
    out.switch_report = std::move(trained.report);
  }
  for (std::size_t g = 0; g < data.action_data.size(); ++g) {
    nn::TrainSpec s = spec;
    s.seed = derive_stream(spec.seed, {"net", label("action", static_cast<long long>(g))}).next_u64();
    auto trained = train_regressor(data.action_data[g].data, s);
    out.action_rows += data.action_data[g].data.size();
    for (int m : data.action_data[g].modes) b.action_net_for_mode[m] = static_cast<int>(g);
    b.action_nets.push_back(std::move(trained.regressor));
    out.action_reports.push_back(std::move(trained.report));
  }
  b.validate();
  return out;
}

void ExperimentSpec::validate() const {
  env.validate();
  op.validate();
  train.validate();
  if (iterations < 1) throw ConfigError("K must be >= 1");
  if (episodes < 1) throw ConfigError("E must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval episode count must be >= 1");
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  return {{"method", to_string(spec.method)},
          {"env", to_json(spec.env)},
          {"operator", to_json(spec.op)},
          {"train", to_json(spec.train)},
          {"K", spec.iterations},
          {"E", spec.episodes},
          {"seed", spec.seed},
          {"eval_episodes", spec.eval_episodes},
          {"sigma_reading", to_string(spec.reading)}};
}

namespace {

nlohmann::json iteration_json(const IterationRecord& r) {
  return {{"k", r.k},
          {"sigma_used", r.sigma_used.sigma},
          {"sigma_next", r.sigma_next.sigma},
          {"sigma_selected_steps", r.sigma_selected_steps},
          {"sigma_degenerate", r.sigma_degenerate},
          {"manual_nll", r.manual_nll ? nlohmann::json(*r.manual_nll) : nlohmann::json(nullptr)},
          {"eval", to_json(r.eval)},
          {"training_rows", r.training_rows},
          {"discarded_episodes", r.discarded_episodes}};
}

void write_json(const std::filesystem::path& p, const nlohmann::json& j) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << j.dump(2) << '\n';
}

}  // namespace

std::vector<IterationRecord> run_experiment(const ExperimentSpec& spec, const WarningSink& warn) {
  spec.validate();
  AlgorithmicOperator op(spec.op, spec.env);
  SigmaOptions opts{spec.reading, spec.op.label_source, &op};

  std::vector<IterationRecord> records;
  std::vector<Trajectory> aggregate;
  DisturbanceLevel sigma = DisturbanceLevel::zero(1);
  nlohmann::json record = {{"spec", to_json(spec)}, {"status", "running"},
                           {"iterations", nlohmann::json::array()}};
  const auto& out_dir = spec.output_dir;
  if (out_dir) std::filesystem::create_directories(*out_dir);

  try {
    for (int k = 1; k <= spec.iterations; ++k) {
      IterationRecord rec;
      rec.k = k;
      rec.sigma_used = sigma;

      CollectionResult coll = collect_iteration(spec.method, op, sigma, spec.episodes, k, spec.seed, warn);
      rec.discarded_episodes = coll.discarded;
      aggregate.insert(aggregate.end(), coll.trajectories.begin(), coll.trajectories.end());

      nn::TrainSpec train = spec.train;
      train.seed = derive_stream(spec.seed ^ spec.train.seed, {"train", label("k", k)}).next_u64();
      FitOutput fitted = fit_iteration(spec.method, aggregate, spec.env.n_objects, train, spec.op.label_source);
      rec.training_rows = fitted.switch_report ? fitted.switch_rows : fitted.action_rows;

      SigmaUpdate upd = update_sigma(spec.method, coll.trajectories, fitted.bundle, opts, sigma, warn);
      rec.sigma_next = upd.sigma;
      rec.sigma_selected_steps = upd.selected_steps;
      rec.sigma_degenerate = upd.degenerate;
      const bool positive = std::all_of(upd.sigma.sigma.begin(), upd.sigma.sigma.end(),
                                        [](double s) { return s > 0.0; });
      if (traits(spec.method).uses_disturbance && positive && upd.selected_steps > 0)
        rec.manual_nll = manual_nll(spec.method, coll.trajectories, fitted.bundle, upd.sigma.sigma, opts);

      rec.eval = evaluate_bundle(fitted.bundle, spec.env, spec.eval_episodes, spec.seed);
      rec.eval.sigma = sigma.sigma;
      rec.trajectories = std::move(coll.trajectories);
      rec.bundle = std::move(fitted.bundle);

      if (out_dir) {
        auto dir = *out_dir / ("iter_" + std::to_string(k));
        std::filesystem::create_directories(dir);
        write_trajectory_file(rec.trajectories, dir / "trajectories.jsonl");
        save_bundle(rec.bundle, dir / "bundle");
        write_json(dir / "sigma.json", {{"used", to_json(rec.sigma_used)}, {"next", to_json(rec.sigma_next)},
                                        {"selected_steps", rec.sigma_selected_steps},
                                        {"degenerate", rec.sigma_degenerate}});
        write_json(dir / "metrics.json", iteration_json(rec));
        record["iterations"].push_back(iteration_json(rec));
        write_json(*out_dir / "record.json", record);
      }
      sigma = rec.sigma_next;
      records.push_back(std::move(rec));
    }
  } catch (const std::exception& e) {
    if (out_dir) {
      record["status"] = "partial";
      record["error"] = e.what();
      write_json(*out_dir / "record.json", record);
    }
    throw;
  }
  if (out_dir) {
    record["status"] = "complete";
    write_json(*out_dir / "record.json", record);
  }
  return records;
}

}  // namespace dipa
