#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace statecnn {

// Error taxonomy shared by all modules. The CLI maps kinds onto exit codes
// (input-class errors -> 2, state -> 3, everything else -> 4).
enum class ErrorKind {
  shape,
  config,
  input,
  state,
  io,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

// --- Seeded randomness -------------------------------------------------
//
// All stochastic behavior in the library flows through these helpers.
// std::mt19937_64 has a standard-specified output stream, and the value
// mappings below are our own, so identical seeds give bit-identical
// results on every platform. The std <random> distributions are
// deliberately not used (their output is implementation-defined).

using Rng = std::mt19937_64;

// SplitMix64 finalizer; combines seeds/stream keys into fresh seeds.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull + b * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  return mix_seed(mix_seed(a, b), c);
}

// Uniform in [0, 1).
inline double unit_draw(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_draw(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * unit_draw(rng);
}

// Box-Muller; draws two uniforms per call.
inline double normal_draw(Rng& rng) {
  double u1 = 1.0 - unit_draw(rng);  // (0, 1]
  double u2 = unit_draw(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

inline bool bernoulli_draw(Rng& rng, double p) { return unit_draw(rng) < p; }

// Index in [0, n). Modulo bias is negligible for n << 2^64 and keeping the
// mapping fixed matters more here than perfect uniformity.
inline uint64_t index_draw(Rng& rng, uint64_t n) { return rng() % n; }

// Fisher-Yates with the draws above; deterministic per seed.
template <typename It>
void seeded_shuffle(It first, It last, uint64_t seed) {
  Rng rng(seed);
  auto n = static_cast<uint64_t>(last - first);
  for (uint64_t i = n; i > 1; --i) {
    uint64_t j = index_draw(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

// Thousands separators, e.g. 22420131 -> "22,420,131".
inline std::string with_commas(int64_t v) {
  std::string digits = std::to_string(v < 0 ? -v : v);
  std::string out;
  int count = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (count != 0 && count % 3 == 0) out.push_back(',');
    out.push_back(*it);
    ++count;
  }
  if (v < 0) out.push_back('-');
  return {out.rbegin(), out.rend()};
}

}  // namespace statecnn
