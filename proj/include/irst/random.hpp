#pragma once

#include <cstdint>
#include <random>

namespace irst {

// splitmix64, used to derive independent sub-seeds from (seed, stream ids)
// so that e.g. per-image channel draws do not depend on the SNR grid index.
inline uint64_t mix_seed(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream, uint64_t index = 0) {
  return mix_seed(mix_seed(seed ^ (stream * 0xd1342543de82ef95ULL)) + index);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(eng_);
  }
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(eng_);
  }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(eng_);
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace irst
