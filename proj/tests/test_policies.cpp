#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "dipa/features.hpp"
#include "dipa/learner.hpp"
#include "dipa/policies.hpp"

using namespace dipa;

namespace {

nn::Regressor zero_regressor(int in, int out) {
  return {nn::Normalizer::identity(in), nn::Mlp({in, kHiddenWidth, kHiddenWidth, out}), {}};
}

PolicyBundle zero_bundle(int n, bool uses_pa = true) {
  PolicyBundle b;
  b.method = "test";
  b.n_objects = n;
  b.uses_pa = uses_pa;
  if (uses_pa) b.switch_net = zero_regressor(b.switch_features().dimension(), kNumModes);
  b.action_nets = {zero_regressor(b.action_features().dimension(), kActionDims)};
  b.action_net_for_mode = {-1, 0, -1, 0};
  return b;
}

Trajectory labelled(std::vector<int> modes, int n_objects = 1) {
  Trajectory t;
  t.method = kRegimePartialAuto;
  for (std::size_t i = 0; i < modes.size(); ++i) {
    Step s;
    s.t = static_cast<int>(i);
    s.state_full.assign(full_state_dimension(n_objects), static_cast<double>(i));
    s.action_intended = {1.0 * i, 0, 0, 0};
    s.action_executed = s.action_intended;
    s.mode = Mode(modes[i]);
    t.steps.push_back(s);
  }
  return t;
}

std::vector<Trajectory> operator_demos(int n, int episodes, std::uint64_t seed) {
  EnvConfig env;
  env.n_objects = n;
  AlgorithmicOperator op({}, env);
  return collect_iteration(Method::kBcpa, op, DisturbanceLevel::zero(), episodes, 1, seed)
      .trajectories;
}

}  // namespace

TEST_CASE("feature dimensions and theta exclusion") {
  EnvState s;
  s.gripper = {1, 2, 3, 0.25};
  s.objects = {ObjectState{{4, 5, 6}}, ObjectState{{7, 8, 9}}};
  s.moved_count = 1;
  auto full = full_state_features(s);
  CHECK(full == std::vector<double>{1, 2, 3, 0.25, 4, 5, 6, 7, 8, 9, 1});
  CHECK(full_state_dimension(2) == 11);
  auto pa = extract_features(s, {FeatureVariant::kPAActionState, 2});
  CHECK(pa == std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9, 1});
  CHECK(FeatureSpec{FeatureVariant::kPAActionState, 3}.dimension() == 13);
  CHECK(std::find(pa.begin(), pa.end(), 0.25) == pa.end());
}

TEST_CASE("masking oracle over synthetic scores") {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::array<double, 4> scores{u(gen), u(gen), u(gen), u(gen)};
    Mode cur(static_cast<int>(gen() % 4));
    int nxt = (cur.index() + 1) % 4;
    Mode expected = scores[nxt] > scores[cur.index()] ? Mode(nxt) : cur;
    CHECK(masked_argmax(scores, cur) == expected);
  }
  std::array<double, 4> far{0.0, 0.1, 9.0, 0.0};
  CHECK(masked_argmax(far, Mode(0)) == Mode(1));
}

TEST_CASE("ties keep the current mode") {
  std::array<double, 4> flat{0.5, 0.5, 0.5, 0.5};
  for (int m = 0; m < 4; ++m) CHECK(masked_argmax(flat, Mode(m)) == Mode(m));
}

TEST_CASE("auto modes return the constants whatever the weights") {
  PolicyBundle b = zero_bundle(2);
  b.action_nets[0].net = nn::Mlp::initialized({10, 64, 64, 4}, 3);
  EnvState s;
  s.objects.resize(2);
  CHECK(predict_action(b, s, Mode(0)) == ActionDelta{-5, 0, 0, 1});
  CHECK(predict_action(b, s, Mode(2)) == ActionDelta{5, 0, 3, -1});
}

TEST_CASE("zero action net and output clamp") {
  PolicyBundle b = zero_bundle(1);
  EnvState s;
  s.objects.resize(1);
  CHECK(predict_action(b, s, Mode(1)) == ActionDelta{});
  b.action_nets[0].net.layers().back().bias(0) = 9.0;
  CHECK(predict_action(b, s, Mode(1)) == ActionDelta{5, 0, 0, 0});
}

TEST_CASE("dataset row counts") {
  std::vector<int> modes(10, 0);
  modes.insert(modes.end(), {1, 1, 1, 1, 1});
  std::vector<Trajectory> trajs{labelled(modes)};
  PolicyDatasets d = build_datasets(trajs, 1, {true, false});
  REQUIRE(d.switch_data);
  CHECK(d.switch_data->size() == 15);
  REQUIRE(d.action_data.size() == 1);
  CHECK(d.action_data[0].data.size() == 5);
  // one-hot targets
  CHECK(d.switch_data->targets.col(12) == Eigen::Vector4d(0, 1, 0, 0));
  // label is the intended action of the step
  CHECK(d.action_data[0].data.targets(0, 0) == 10.0);
}

TEST_CASE("full-manual layout keeps every step") {
  std::vector<Trajectory> fm;
  EnvConfig env;
  AlgorithmicOperator op({}, env);
  for (int e = 1; e <= 2; ++e)
    fm.push_back(collect_episode(Method::kDart, op, DisturbanceLevel::zero(), 1, e, 4));
  std::size_t total = fm[0].steps.size() + fm[1].steps.size();
  PolicyDatasets d = build_datasets(fm, 1, {false, false});
  CHECK_FALSE(d.switch_data);
  REQUIRE(d.action_data.size() == 1);
  CHECK(d.action_data[0].data.size() == total);
  CHECK(d.action_data[0].data.inputs.rows() == full_state_dimension(1));
}

TEST_CASE("separated layout partitions manual rows") {
  std::vector<Trajectory> trajs{labelled({0, 1, 1, 2, 3, 3, 3, 0, 1})};
  PolicyDatasets joint = build_datasets(trajs, 1, {true, false});
  PolicyDatasets split = build_datasets(trajs, 1, {true, true});
  REQUIRE(split.action_data.size() == 2);
  CHECK(split.action_data[0].modes == std::vector<int>{1});
  CHECK(split.action_data[1].modes == std::vector<int>{3});
  CHECK(split.action_data[0].data.size() == 3);
  CHECK(split.action_data[1].data.size() == 3);
  CHECK(split.action_data[0].data.size() + split.action_data[1].data.size() ==
        joint.action_data[0].data.size());
}

TEST_CASE("no manual rows is an error") {
  std::vector<Trajectory> trajs{labelled({0, 0, 0})};
  CHECK_THROWS_AS(build_datasets(trajs, 1, {true, false}), std::runtime_error);
}

TEST_CASE("switch net memorises operator labels") {
  auto demos = operator_demos(1, 10, 21);
  PolicyDatasets d = build_datasets(demos, 1, {true, false});
  nn::TrainSpec spec;
  spec.seed = 1;
  PolicyBundle b = zero_bundle(1);
  b.switch_net = train_regressor(*d.switch_data, spec).regressor;
  int agree = 0, total = 0;
  for (const auto& tr : demos) {
    Mode prev(0);
    for (const auto& st : tr.steps) {
      agree += predict_mode(b, st.state_full, prev) == *st.mode;
      ++total;
      prev = *st.mode;
    }
  }
  CHECK(static_cast<double>(agree) / total >= 0.99);
}

TEST_CASE("bundle cloned from the operator completes a nominal episode") {
  auto demos = operator_demos(1, 20, 31);
  nn::TrainSpec spec;
  spec.seed = 2;
  PolicyBundle b = fit_iteration(Method::kBcpa, demos, 1, spec).bundle;
  EnvConfig nominal;
  nominal.sigma_init_cm = 0.0;
  Trajectory t = rollout(b, nominal, derive_stream(1, {"rollout"}), nominal.effective_t_max());
  CHECK(t.success);
  CHECK(count_illegal_transitions(t) == 0);
  for (const auto& st : t.steps) CHECK(st.action_executed == st.action_intended);

  SUBCASE("fixed seed gives the same trajectory") {
    Trajectory again = rollout(b, nominal, derive_stream(1, {"rollout"}), nominal.effective_t_max());
    CHECK(again == t);
  }
  SUBCASE("save and load keep the bundle") {
    auto dir = std::filesystem::temp_directory_path() / "dipa_test_bundle";
    std::filesystem::remove_all(dir);
    save_bundle(b, dir);
    PolicyBundle back = load_bundle(dir);
    std::filesystem::remove_all(dir);
    CHECK(back == b);
  }
}

TEST_CASE("zero step budget gives an empty failed rollout") {
  PolicyBundle b = zero_bundle(1);
  EnvConfig env;
  Trajectory t = rollout(b, env, derive_stream(1, {"r"}), 0);
  CHECK(t.steps.empty());
  CHECK_FALSE(t.success);
}

TEST_CASE("rollouts never break the mode cycle") {
  PolicyBundle b = zero_bundle(2);
  b.switch_net->net = nn::Mlp::initialized({11, 64, 64, 4}, 5);
  b.action_nets[0].net = nn::Mlp::initialized({10, 64, 64, 4}, 6);
  EnvConfig env;
  env.n_objects = 2;
  for (int i = 0; i < 20; ++i) {
    Trajectory t = rollout(b, env, derive_stream(i, {"r"}), 100);
    CHECK(count_illegal_transitions(t) == 0);
  }
}

TEST_CASE("malformed bundles are rejected") {
  PolicyBundle b = zero_bundle(1);
  b.action_net_for_mode = {-1, 0, -1, -1};
  CHECK_THROWS(b.validate());
  PolicyBundle c = zero_bundle(1);
  c.switch_net.reset();
  CHECK_THROWS(c.validate());
}
