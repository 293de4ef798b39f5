#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "dipa/rng.hpp"

using namespace dipa;

namespace {

std::vector<std::uint64_t> draws(RngStream s, int n) {
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(s.next_u64());
  return out;
}

}  // namespace

TEST_CASE("same seed and path give identical sequences") {
  auto a = draws(derive_stream(7, {"k=1", "e=1", "noise"}), 100);
  auto b = draws(derive_stream(7, {"k=1", "e=1", "noise"}), 100);
  CHECK(a == b);
}

TEST_CASE("distinct paths give distinct first draws") {
  // 64-bit draws from independent streams collide with probability ~2^-64
  auto a = draws(derive_stream(7, {"k=1", "e=1", "noise"}), 100);
  auto b = draws(derive_stream(7, {"k=1", "e=2", "noise"}), 100);
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a[i] == b[i];
  CHECK(equal == 0);
}

TEST_CASE("seed sensitivity") {
  CHECK(draws(derive_stream(7, {"x"}), 10) != draws(derive_stream(8, {"x"}), 10));
}

TEST_CASE("path segmentation matters") {
  // {"ab"} and {"a","b"} must not alias
  CHECK(draws(derive_stream(1, {"ab"}), 4) != draws(derive_stream(1, {"a", "b"}), 4));
}

TEST_CASE("child equals the extended path") {
  RngStream parent = derive_stream(3, {"collect", "k=2"});
  CHECK(draws(parent.child("noise"), 20) == draws(derive_stream(3, {"collect", "k=2", "noise"}), 20));
}

TEST_CASE("empty path is rejected") {
  CHECK_THROWS_AS(derive_stream(1, {}), std::invalid_argument);
}

TEST_CASE("first draws over many paths never collide") {
  std::set<std::uint64_t> seen;
  for (int k = 0; k < 50; ++k)
    for (int e = 0; e < 50; ++e)
      seen.insert(derive_stream(42, {label("k", k), label("e", e)}).next_u64());
  CHECK(seen.size() == 2500);
}

TEST_CASE("standard normal moments") {
  RngStream s = derive_stream(5, {"moments"});
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = s.normal();
    sum += z;
    sq += z * z;
  }
  double mean = sum / n, var = sq / n - mean * mean;
  // 5 standard errors
  CHECK(std::abs(mean) < 5.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 5.0 * std::sqrt(2.0 / n));
}

TEST_CASE("uniform stays in range with the right mean") {
  RngStream s = derive_stream(9, {"uniform"});
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = s.uniform(-2.0, 2.0);
    REQUIRE(u >= -2.0);
    REQUIRE(u <= 2.0);
    sum += u;
  }
  CHECK(std::abs(sum / n) < 5.0 * (4.0 / std::sqrt(12.0)) / std::sqrt(n));
}

TEST_CASE("label helper") { CHECK(label("k", 3) == "k=3"); }
