#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rfgml {

// Data / contract violations (bad files, shape mismatches, invalid arguments).
// The CLI maps these to exit code 2.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failures (non-finite values, divergence). CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent seed stream from a root seed, a purpose tag and an
// index. Every random consumer in the toolkit gets its own stream so that a
// single --seed fans out deterministically.
std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t index = 0);

// Deterministic PRNG (xoshiro256**) with hand-rolled distributions. The
// standard <random> distributions are implementation-defined, which would
// break byte-identical reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform();                         // open interval (0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);          // inclusive bounds
  double normal();                          // standard normal, Box-Muller
  double gamma(double alpha);               // shape alpha, unit scale

 private:
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace rfgml
