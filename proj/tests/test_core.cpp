#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "dipa/core.hpp"

using namespace dipa;

TEST_CASE("clamp keeps translation within 5 cm and rotation within 1 rad") {
  ActionDelta a = clamp_action({9.0, -12.0, 4.0, -3.0});
  CHECK(a == ActionDelta{5.0, -5.0, 4.0, -1.0});
  CHECK(clamp_action({0.5, 0.5, 0.5, 0.5}) == ActionDelta{0.5, 0.5, 0.5, 0.5});
}

TEST_CASE("clamp rejects non-finite components") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(clamp_action({nan, 0, 0, 0}), std::domain_error);
  CHECK_THROWS_AS(clamp_action({0, 0, 0, inf}), std::domain_error);
}

TEST_CASE("clamp property: output bounded and idempotent") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int i = 0; i < 2000; ++i) {
    ActionDelta a{u(gen), u(gen), u(gen), u(gen)};
    ActionDelta c = clamp_action(a);
    for (int d = 0; d < 3; ++d) CHECK(std::abs(c[d]) <= kMaxTranslationCm);
    CHECK(std::abs(c.dtheta) <= kMaxRotationRad);
    CHECK(clamp_action(c) == c);
  }
}

TEST_CASE("mode kinds follow the manual set {1,3}") {
  CHECK_FALSE(Mode(0).is_manual());
  CHECK(Mode(1).is_manual());
  CHECK_FALSE(Mode(2).is_manual());
  CHECK(Mode(3).is_manual());
  CHECK_THROWS_AS(Mode(4), std::out_of_range);
  CHECK_THROWS_AS(Mode(-1), std::out_of_range);
}

TEST_CASE("mode cycle allows only stay or advance") {
  for (int i = 0; i < kNumModes; ++i) {
    Mode m(i);
    for (int j = 0; j < kNumModes; ++j) {
      bool expected = j == i || j == (i + 1) % 4;
      CHECK(m.can_transition_to(Mode(j)) == expected);
    }
  }
  CHECK(Mode(3).next() == Mode(0));
}

TEST_CASE("transition checker flags the first illegal pair") {
  Trajectory tr;
  for (int m : {0, 0, 1, 1, 2, 3, 0}) {
    Step s;
    s.mode = Mode(m);
    tr.steps.push_back(s);
  }
  CHECK(check_mode_transitions(tr).empty());
  CHECK(count_illegal_transitions(tr) == 0);
  tr.steps[4].mode = Mode(3);  // 1 -> 3
  CHECK_FALSE(check_mode_transitions(tr).empty());
  CHECK(count_illegal_transitions(tr) == 1);
}

TEST_CASE("trajectories must start in mode 0 or advance to 1") {
  Trajectory tr;
  Step s;
  s.mode = Mode(2);
  tr.steps.push_back(s);
  CHECK(count_illegal_transitions(tr) == 1);
}

TEST_CASE("unlabelled full-manual steps carry no transitions") {
  Trajectory tr;
  tr.method = kRegimeFullManual;
  tr.steps.resize(5);
  CHECK(check_mode_transitions(tr).empty());
}

TEST_CASE("disturbance level validity") {
  CHECK(DisturbanceLevel::zero().is_zero());
  CHECK(DisturbanceLevel::zero().is_valid());
  DisturbanceLevel bad{{0.1, -0.01, 0, 0}, 2};
  CHECK_FALSE(bad.is_valid());
}

TEST_CASE("label source selects the recorded action") {
  Step s;
  s.action_intended = {1, 2, 3, 0.5};
  s.action_executed = {1.1, 2, 3, 0.5};
  CHECK(label_action(s, LabelSource::kIntended) == s.action_intended);
  CHECK(label_action(s, LabelSource::kExecuted) == s.action_executed);
  CHECK(parse_label_source("executed") == LabelSource::kExecuted);
  CHECK(to_string(LabelSource::kIntended) == "intended");
  CHECK_THROWS(parse_label_source("noisy"));
}
