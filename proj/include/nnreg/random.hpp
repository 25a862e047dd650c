#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace nnreg {

// Recorded in report echoes so runs can be replayed on another machine.
inline constexpr const char* kRngAlgorithm = "mt19937_64+splitmix64";

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a(std::string_view bytes);

/// Seed of the child stream `tag` derived from a parent seed.
std::uint64_t child_seed(std::uint64_t seed, std::string_view tag);

/// Seeded generator. The distributions are written out by hand instead of
/// using std::uniform_real_distribution / std::normal_distribution, whose
/// output differs between standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  static Rng child(std::uint64_t seed, std::string_view tag);

  std::uint64_t next_u64() { return eng_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Standard normal (Box-Muller, spare value cached).
  double normal();

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace nnreg
