#include "rfgml/common.hpp"

#include <cmath>

namespace rfgml {

std::uint64_t derive_seed(std::uint64_t root, std::string_view tag,
                          std::uint64_t index) {
  // FNV-1a over the tag, then two splitmix rounds to decorrelate streams.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t state = root ^ h;
  splitmix64(state);
  state ^= index * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL;
  std::uint64_t out = splitmix64(state);
  return out ? out : 0x9e3779b97f4a7c15ULL;  // xoshiro must not be all-zero
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}
}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t sm = seed;
  for (auto& s : s_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  // 53-bit mantissa, offset by half an ulp so 0 and 1 are never returned.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw ContractError("uniform_int: hi < lo");
  const std::uint64_t range = static_cast<std::uint64_t>(hi) - lo + 1;
  // Lemire multiply-shift; bias is < 2^-64 * range, irrelevant here.
  const auto wide = static_cast<unsigned __int128>(next_u64()) * range;
  return lo + static_cast<int>(wide >> 64);
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

double Rng::gamma(double alpha) {
  if (!(alpha > 0.0)) throw ContractError("gamma: alpha must be > 0");
  if (alpha < 1.0) {
    // Boost by one and scale back (Marsaglia-Tsang section 6).
    const double g = gamma(alpha + 1.0);
    return g * std::pow(uniform(), 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace rfgml
