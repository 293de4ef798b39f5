#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

namespace dipa {

// Deterministic random stream addressed by (root seed, label path). The
// engine seed is a hash-split of the root seed with every label, so streams
// for distinct paths are independent and reproducible across runs.
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::vector<std::string> path);

  std::uint64_t root_seed() const { return root_seed_; }
  const std::vector<std::string>& path() const { return path_; }

  // Stream for path + {label}.
  RngStream child(const std::string& label) const;

  double uniform(double lo, double hi);
  double normal();  // standard normal
  std::uint64_t next_u64() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

  bool operator==(const RngStream& o) const {
    return root_seed_ == o.root_seed_ && path_ == o.path_ &&
           engine_ == o.engine_;
  }

 private:
  std::uint64_t root_seed_;
  std::vector<std::string> path_;
  std::mt19937_64 engine_;
};

// Throws std::invalid_argument when `path` is empty.
RngStream derive_stream(std::uint64_t root_seed, std::vector<std::string> path);

// "k=3" style label helper.
std::string label(const std::string& key, long long value);

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dipa
