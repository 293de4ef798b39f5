#include "dipa/policies.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "dipa/operator.hpp"

namespace dipa {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

MatrixXd columns(const std::vector<std::vector<double>>& rows, int dim) {
  MatrixXd m(dim, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    if (static_cast<int>(rows[c].size()) != dim)
      throw std::invalid_argument("dataset row has inconsistent dimension");
    m.col(static_cast<Eigen::Index>(c)) = to_eigen(rows[c]);
  }
  return m;
}

MatrixXd action_columns(const std::vector<ActionArray>& rows) {
  MatrixXd m(kActionDims, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c)
    for (int d = 0; d < kActionDims; ++d) m(d, static_cast<Eigen::Index>(c)) = rows[c][d];
  return m;
}

}  // namespace

void PolicyBundle::validate() const {
  if (uses_pa && !switch_net) throw std::invalid_argument("partial-automation bundle without switch net");
  if (action_nets.empty()) throw std::invalid_argument("bundle without action net");
  for (const auto& net : action_nets) {
    if (net.net.output_size() != kActionDims) throw std::invalid_argument("action net output must be 4");
    if (net.net.input_size() != action_features().dimension())
      throw std::invalid_argument("action net input dimension mismatch");
  }
  if (switch_net && (switch_net->net.output_size() != kNumModes ||
                     switch_net->net.input_size() != switch_features().dimension()))
    throw std::invalid_argument("switch net shape mismatch");
  for (int m = 0; m < kNumModes; ++m) {
    int idx = action_net_for_mode[m];
    if (uses_pa && is_manual_mode(m) && (idx < 0 || idx >= static_cast<int>(action_nets.size())))
      throw std::invalid_argument("manual mode " + std::to_string(m) + " has no action net");
  }
}

bool PolicyBundle::operator==(const PolicyBundle& o) const {
  return method == o.method && n_objects == o.n_objects && uses_pa == o.uses_pa &&
         switch_net == o.switch_net && action_nets == o.action_nets &&
         action_net_for_mode == o.action_net_for_mode;
}

Mode masked_argmax(std::span<const double> scores, Mode current) {
  if (scores.size() != static_cast<std::size_t>(kNumModes))
    throw std::invalid_argument("masked_argmax: expected one score per mode");
  Mode next = current.next();
  return scores[next.index()] > scores[current.index()] ? next : current;
}

Mode predict_mode(const PolicyBundle& bundle, const std::vector<double>& full, Mode current) {
  if (!bundle.switch_net) throw std::logic_error("predict_mode: bundle has no switch net");
  VectorXd scores = bundle.switch_net->predict(to_eigen(full));
  return masked_argmax(std::span<const double>(scores.data(), scores.size()), current);
}

Mode predict_mode(const PolicyBundle& bundle, const EnvState& state, Mode current) {
  return predict_mode(bundle, full_state_features(state), current);
}

ActionDelta predict_action(const PolicyBundle& bundle, const std::vector<double>& full,
                           std::optional<Mode> mode) {
  const nn::Regressor* net = nullptr;
  if (bundle.uses_pa) {
    if (!mode) throw std::invalid_argument("predict_action: partial-automation bundle needs a mode");
    if (!mode->is_manual()) return auto_action(*mode);
    net = &bundle.action_nets.at(bundle.action_net_for_mode[mode->index()]);
  } else {
    net = &bundle.action_nets.front();
  }
  VectorXd out = net->predict(to_eigen(project_features(full, bundle.action_features())));
  return clamp_action({out(0), out(1), out(2), out(3)});
}

ActionDelta predict_action(const PolicyBundle& bundle, const EnvState& state,
                           std::optional<Mode> mode) {
  return predict_action(bundle, full_state_features(state), mode);
}

PolicyDatasets build_datasets(std::span<const Trajectory> trajectories, int n_objects,
                              const DatasetLayout& layout, LabelSource label) {
  const FeatureSpec full_spec{FeatureVariant::kFullState, n_objects};
  const FeatureSpec action_spec{
      layout.uses_pa ? FeatureVariant::kPAActionState : FeatureVariant::kFullState, n_objects};

  std::vector<std::vector<double>> switch_in;
  std::vector<int> switch_mode;

  // partition key -> rows
  std::vector<std::vector<int>> groups;
  if (!layout.uses_pa) {
    groups = {{}};
  } else if (layout.separated_action_nets) {
    for (int m : kManualModes) groups.push_back({m});
  } else {
    groups = {std::vector<int>(kManualModes.begin(), kManualModes.end())};
  }
  std::vector<std::vector<std::vector<double>>> act_in(groups.size());
  std::vector<std::vector<ActionArray>> act_out(groups.size());

  for (const auto& traj : trajectories) {
    for (const auto& s : traj.steps) {
      if (static_cast<int>(s.state_full.size()) != full_state_dimension(n_objects))
        throw std::invalid_argument("build_datasets: step state has wrong dimension for " +
                                    std::to_string(n_objects) + " objects");
      if (!layout.uses_pa) {
        act_in[0].push_back(s.state_full);
        act_out[0].push_back(label_action(s, label).to_array());
        continue;
      }
      if (!s.mode) throw std::invalid_argument("build_datasets: step without mode label in PA data");
      switch_in.push_back(s.state_full);
      switch_mode.push_back(s.mode->index());
      if (!s.mode->is_manual()) continue;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (std::find(groups[g].begin(), groups[g].end(), s.mode->index()) == groups[g].end()) continue;
        act_in[g].push_back(project_features(s.state_full, action_spec));
        act_out[g].push_back(label_action(s, label).to_array());
      }
    }
  }

  PolicyDatasets out;
  if (layout.uses_pa) {
    nn::Dataset sw;
    sw.inputs = columns(switch_in, full_spec.dimension());
    sw.targets = MatrixXd::Zero(kNumModes, static_cast<Eigen::Index>(switch_mode.size()));
    for (std::size_t c = 0; c < switch_mode.size(); ++c) sw.targets(switch_mode[c], c) = 1.0;
    out.switch_data = std::move(sw);
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (act_in[g].empty())
      throw std::runtime_error("build_datasets: no manual-mode rows to fit an action policy");
    out.action_data.push_back(
        {groups[g], {columns(act_in[g], action_spec.dimension()), action_columns(act_out[g])}});
  }
  return out;
}

TrainedRegressor train_regressor(const nn::Dataset& data, const nn::TrainSpec& spec) {
  TrainedRegressor out;
  out.regressor.normalizer = nn::Normalizer::fit(data.inputs);
  nn::Dataset normalized{out.regressor.normalizer.apply_batch(data.inputs), data.targets};
  const int in = static_cast<int>(data.inputs.rows());
  const int o = static_cast<int>(data.targets.rows());
  auto init = nn::Mlp::initialized({in, kHiddenWidth, kHiddenWidth, o}, spec.seed);
  auto fitted = nn::fit(init, normalized, spec);
  out.regressor.net = std::move(fitted.params);
  out.report = std::move(fitted.report);
  out.regressor.metadata = {{"train_rows", out.report.train_rows},
                            {"validation_rows", out.report.validation_rows},
                            {"epochs_run", out.report.epochs_run},
                            {"best_epoch", out.report.best_epoch},
                            {"best_validation_loss", out.report.best_validation_loss},
                            {"seed", spec.seed}};
  return out;
}

Trajectory rollout(const PolicyBundle& bundle, const EnvConfig& config, RngStream rng, int t_max) {
  RngStream reset_rng = rng.child("reset");
  EnvState state = reset(config, reset_rng);
  Trajectory traj;
  traj.method = bundle.uses_pa ? kRegimePartialAuto : kRegimeFullManual;
  traj.seed = rng.root_seed();
  traj.sigma = DisturbanceLevel::zero(0);
  traj.iteration_k = 0;

  for (int t = 0; t < t_max && !is_success(state); ++t) {
    std::vector<double> full = full_state_features(state);
    Step st;
    st.t = state.t;
    if (bundle.uses_pa) {
      Mode mode = predict_mode(bundle, full, state.current_mode);
      state.current_mode = mode;
      st.mode = mode;
    }
    ActionDelta a = predict_action(bundle, full, st.mode);
    st.state_full = std::move(full);
    st.action_intended = a;
    st.action_executed = a;
    traj.steps.push_back(std::move(st));
    state = step(config, state, a);
  }
  traj.success = is_success(state);
  traj.terminal = {{state.gripper.x, state.gripper.y, state.gripper.z, state.gripper.theta},
                   state.moved_count,
                   state.t};
  return traj;
}

void save_bundle(const PolicyBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["method"] = bundle.method;
  manifest["n_objects"] = bundle.n_objects;
  manifest["uses_pa"] = bundle.uses_pa;
  manifest["switch_features"] = "full_state";
  manifest["action_features"] = bundle.uses_pa ? "pa_action_state" : "full_state";
  manifest["manual_modes"] = kManualModes;
  manifest["action_net_for_mode"] = bundle.action_net_for_mode;
  manifest["switch_net"] = bundle.switch_net ? nlohmann::json("switch.json") : nlohmann::json(nullptr);
  nlohmann::json files = nlohmann::json::array();
  for (std::size_t i = 0; i < bundle.action_nets.size(); ++i) {
    std::string name = "action_" + std::to_string(i) + ".json";
    nn::save_checkpoint(bundle.action_nets[i], (dir / name).string());
    files.push_back(name);
  }
  manifest["action_nets"] = files;
  if (bundle.switch_net) nn::save_checkpoint(*bundle.switch_net, (dir / "switch.json").string());
  std::ofstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("cannot write bundle manifest in " + dir.string());
  f << manifest.dump(2) << '\n';
}

PolicyBundle load_bundle(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw std::runtime_error("missing bundle manifest in " + dir.string());
  nlohmann::json m = nlohmann::json::parse(f);
  PolicyBundle b;
  b.method = m.at("method").get<std::string>();
  b.n_objects = m.at("n_objects").get<int>();
  b.uses_pa = m.at("uses_pa").get<bool>();
  b.action_net_for_mode = m.at("action_net_for_mode").get<std::array<int, kNumModes>>();
  if (!m.at("switch_net").is_null())
    b.switch_net = nn::load_checkpoint((dir / m.at("switch_net").get<std::string>()).string());
  for (const auto& name : m.at("action_nets"))
    b.action_nets.push_back(nn::load_checkpoint((dir / name.get<std::string>()).string()));
  b.validate();
  return b;
}

}  // namespace dipa
