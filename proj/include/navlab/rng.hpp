#pragma once

#include <cstdint>
#include <string_view>

#include "navlab/util.hpp"

namespace navlab {

// SplitMix64 generator. Deliberately not std::mt19937: the stream must be
// bit-identical across standard library versions for the reproducibility
// contract, and the state is a single word we can put in a checkpoint.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n). Modulo bias is ~n/2^64, irrelevant at our sizes.
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  uint64_t state() const { return state_; }
  void set_state(uint64_t s) { state_ = s; }

 private:
  uint64_t state_;
};

// All randomness flows from one root seed through named substreams so that two
// runs sharing a seed also share e.g. parameter initialization even when their
// sampling streams diverge.
inline uint64_t substream_seed(uint64_t root, std::string_view name) {
  uint64_t h = fnv1a64(name);
  // one SplitMix scramble to decorrelate root/name
  uint64_t z = root ^ (h + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng substream(uint64_t root, std::string_view name) {
  return Rng(substream_seed(root, name));
}

// Per-item derivation (e.g. one stream per episode per iteration) so results
// do not depend on evaluation order or worker count.
inline Rng substream(uint64_t root, std::string_view name, uint64_t a, uint64_t b = 0) {
  uint64_t s = substream_seed(root, name);
  Rng mix(s ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xd1342543de82ef95ULL));
  mix.next_u64();
  return Rng(mix.next_u64());
}

}  // namespace navlab
