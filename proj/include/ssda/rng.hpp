#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace ssda {

/// splitmix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Data roles used when deriving per-trial sub-seeds.
enum class Role : std::uint64_t {
  Environment = 1,
  Labeled = 2,
  Unlabeled = 3,
  Validation = 4,
  Test = 5,
  Oracle = 6,
  MoreData = 7,
};

/// Hash an arbitrary list of words into one seed. Order matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(base);
  for (auto p : parts) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

/// Sub-seed for one (trial, domain, role) stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t trial, int domain_tag, Role role) {
  return derive_seed(base, {trial, static_cast<std::uint64_t>(domain_tag) + 1,
                            static_cast<std::uint64_t>(role)});
}

/// Engine plus a standard normal source. Not shared across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  double normal() { return normal_(engine_); }
  double normal(double variance) { return std::sqrt(variance) * normal_(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace ssda
