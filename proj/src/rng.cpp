#include "dipa/rng.hpp"

#include <stdexcept>

namespace dipa {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t seed_for(std::uint64_t root, const std::vector<std::string>& path) {
  std::uint64_t h = splitmix64(root ^ 0x6a09e667f3bcc908ULL);
  for (const auto& p : path) {
    // length prefix keeps ("ab","c") and ("a","bc") apart
    h = splitmix64(h ^ splitmix64(p.size()));
    h = splitmix64(h ^ fnv1a(p));
  }
  return h;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t root_seed, std::vector<std::string> path)
    : root_seed_(root_seed),
      path_(std::move(path)),
      engine_(seed_for(root_seed_, path_)) {}

RngStream RngStream::child(const std::string& l) const {
  auto p = path_;
  p.push_back(l);
  return RngStream(root_seed_, std::move(p));
}

double RngStream::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

double RngStream::normal() {
  // A fresh distribution per draw: no cached second Box-Muller value survives
  // between calls, so copies of a stream stay in lockstep.
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

RngStream derive_stream(std::uint64_t root_seed, std::vector<std::string> path) {
  if (path.empty()) throw std::invalid_argument("derive_stream: empty path");
  return RngStream(root_seed, std::move(path));
}

std::string label(const std::string& key, long long value) {
  return key + "=" + std::to_string(value);
}

}  // namespace dipa
