#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace birl {

// Deterministic random source. All draws are derived from the raw engine
// bits so results do not depend on libstdc++ distribution internals.
// Experiments derive named substreams from one root seed so that toggling a
// feature only perturbs its own stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  static Rng substream(uint64_t root_seed, const std::string& name);

  uint64_t next_u64() { return engine_(); }

  // Strictly inside (0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased draw from [0, n).
  uint64_t uniform_index(uint64_t n);
  // Inclusive range.
  int64_t uniform_int(int64_t lo, int64_t hi);

  double gaussian();
  double gumbel();

  // Inverse-CDF draw; probs need not be exactly normalized.
  size_t categorical(const std::vector<double>& probs);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace birl
