#pragma once

// Shared fixtures and independent oracles for the learner tests.

#include <algorithm>
#include <random>
#include <vector>

#include "dipa/features.hpp"
#include "dipa/learner.hpp"
#include "dipa/policies.hpp"

namespace fixtures {

using namespace dipa;

// Single affine layer with zero weights and the given output bias.
inline nn::Regressor affine(int in, std::vector<double> bias) {
  nn::Regressor r{nn::Normalizer::identity(in), nn::Mlp({in, static_cast<int>(bias.size())}), {}};
  for (std::size_t i = 0; i < bias.size(); ++i) r.net.layers()[0].bias(i) = bias[i];
  return r;
}

inline nn::Regressor random_regressor(int in, int out, std::mt19937_64& gen, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd mean(in), sd(in);
  for (int i = 0; i < in; ++i) {
    mean(i) = 5.0 * g(gen);
    sd(i) = 0.5 + std::abs(5.0 * g(gen));
  }
  nn::Regressor r{nn::Normalizer(mean, sd), nn::Mlp::initialized({in, 8, 8, out}, gen()), {}};
  Eigen::VectorXd p = r.net.flatten() * scale;
  r.net.assign(p);
  return r;
}

// Plain-loop network evaluation.
inline std::vector<double> forward(const nn::Regressor& r, const std::vector<double>& raw) {
  std::vector<double> a(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    a[i] = (raw[i] - r.normalizer.mean()(i)) / r.normalizer.scale()(i);
  const auto& layers = r.net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<double> z(layers[l].weight.rows());
    for (std::size_t i = 0; i < z.size(); ++i) {
      double acc = layers[l].bias(i);
      for (std::size_t j = 0; j < a.size(); ++j) acc += layers[l].weight(i, j) * a[j];
      z[i] = (l + 1 < layers.size() && acc < 0.0) ? 0.0 : acc;
    }
    a = z;
  }
  return a;
}

inline std::array<double, 4> auto_constant(int mode) {
  if (mode == 0) return {-5.0, 0.0, 0.0, 1.0};
  return {5.0, 0.0, 3.0, -1.0};
}

inline bool manual(int mode) { return mode == 1 || mode == 3; }

// Independent reimplementation of the disturbance estimate: mean over the
// selected steps of squared (predicted - intended label).
inline std::array<double, 4> oracle_sigma(Method method, const std::vector<Trajectory>& trajs,
                                          const PolicyBundle& b) {
  auto act = [&](const std::vector<double>& full, int mode) {
    std::vector<double> x = full;
    if (b.uses_pa) x.erase(x.begin() + 3);
    const nn::Regressor& net = b.uses_pa ? b.action_nets[b.action_net_for_mode[mode]] : b.action_nets[0];
    auto y = forward(net, x);
    std::array<double, 4> out;
    for (int d = 0; d < 4; ++d) {
      double lim = d < 3 ? 5.0 : 1.0;
      out[d] = std::min(lim, std::max(-lim, y[d]));
    }
    return out;
  };
  std::array<double, 4> sum{};
  long count = 0;
  auto add = [&](const std::array<double, 4>& pred, const ActionDelta& label) {
    ActionArray l = label.to_array();
    for (int d = 0; d < 4; ++d) sum[d] += (pred[d] - l[d]) * (pred[d] - l[d]);
    ++count;
  };
  if (method == Method::kBc || method == Method::kBcpa) return {0, 0, 0, 0};
  for (const auto& t : trajs) {
    int prev = 0;
    for (const auto& s : t.steps) {
      if (method == Method::kDart) {
        add(act(s.state_full, -1), s.action_intended);
        continue;
      }
      int demo = s.mode->index();
      if (manual(demo)) {
        if (method == Method::kDipa) {
          auto score = forward(*b.switch_net, s.state_full);
          int nxt = (prev + 1) % 4;
          int pred = score[nxt] > score[prev] ? nxt : prev;
          add(manual(pred) ? act(s.state_full, pred) : auto_constant(pred), s.action_intended);
        } else {
          add(act(s.state_full, demo), s.action_intended);
        }
      }
      prev = demo;
    }
  }
  if (count == 0) return {0, 0, 0, 0};
  for (double& v : sum) v /= static_cast<double>(count);
  return sum;
}

// Random bundle and labelled trajectories shaped for `method`.
struct SigmaFixture {
  std::vector<Trajectory> trajectories;
  PolicyBundle bundle;
};

inline SigmaFixture random_sigma_fixture(Method method, std::mt19937_64& gen) {
  const MethodTraits tr = traits(method);
  std::uniform_int_distribution<int> nobj(1, 3), len(5, 40), ntraj(1, 4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  SigmaFixture f;
  PolicyBundle& b = f.bundle;
  b.method = to_string(method);
  b.n_objects = nobj(gen);
  b.uses_pa = tr.uses_pa;
  const int full_dim = full_state_dimension(b.n_objects);
  if (tr.uses_pa) b.switch_net = random_regressor(full_dim, 4, gen, 1.0);
  int nets = tr.separated_action_nets ? 2 : 1;
  for (int i = 0; i < nets; ++i)
    b.action_nets.push_back(random_regressor(b.action_features().dimension(), 4, gen, 3.0));
  b.action_net_for_mode = tr.separated_action_nets ? std::array<int, 4>{-1, 0, -1, 1}
                                                   : std::array<int, 4>{-1, 0, -1, 0};

  int n = ntraj(gen);
  for (int i = 0; i < n; ++i) {
    Trajectory t;
    t.method = tr.uses_pa ? kRegimePartialAuto : kRegimeFullManual;
    int mode = 0, steps = len(gen);
    for (int k = 0; k < steps; ++k) {
      Step s;
      s.t = k;
      for (int d = 0; d < full_dim; ++d) s.state_full.push_back(10.0 * g(gen));
      if (tr.uses_pa) {
        if (coin(gen) < 0.3) mode = (mode + 1) % 4;
        s.mode = Mode(mode);
      }
      s.action_intended = {3 * g(gen), 3 * g(gen), 3 * g(gen), g(gen)};
      s.action_executed = s.action_intended;
      t.steps.push_back(s);
    }
    f.trajectories.push_back(t);
  }
  return f;
}

// One object. A mode-0 step followed by `manual` mode-1 steps; the switch
// net predicts the automatic carry mode at `mispredicted` of them.
// Labels equal the action net output, which sits `gap` cm behind the
// automatic dx.
inline SigmaFixture misprediction_fixture(int manual_steps, int mispredicted, double gap) {
  SigmaFixture f;
  PolicyBundle& b = f.bundle;
  b.method = "fixture";
  b.n_objects = 1;
  b.uses_pa = true;
  const int full_dim = full_state_dimension(1);
  // score_0 = -1, score_1 = 0, score_2 = feature0 - 0.5, score_3 = -1
  nn::Regressor sw = affine(full_dim, {-1.0, 0.0, -0.5, -1.0});
  sw.net.layers()[0].weight(2, 0) = 1.0;
  b.switch_net = sw;
  const ActionDelta label{5.0 - gap, 0.0, 3.0, -1.0};
  b.action_nets = {affine(full_dim - 1, {label.dx, label.dy, label.dz, label.dtheta})};
  b.action_net_for_mode = {-1, 0, -1, 0};

  Trajectory t;
  t.method = kRegimePartialAuto;
  for (int k = 0; k <= manual_steps; ++k) {
    Step s;
    s.t = k;
    s.state_full.assign(full_dim, 0.0);
    s.state_full[4] = -20.0;
    bool flip = k >= 2 && k < 2 + mispredicted;
    s.state_full[0] = flip ? 1.0 : 0.0;
    s.mode = Mode(k == 0 ? 0 : 1);
    s.action_intended = k == 0 ? auto_action(Mode(0)) : label;
    s.action_executed = s.action_intended;
    t.steps.push_back(s);
  }
  f.trajectories = {t};
  return f;
}

}  // namespace fixtures
