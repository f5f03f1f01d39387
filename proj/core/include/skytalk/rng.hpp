#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

namespace skytalk {

/// 64-bit finalizer from SplitMix64. Used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Combine a parent seed with a stream tag into a child seed.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept;

/// FNV-1a over the bytes of `text`.
std::uint64_t hash_tag(std::string_view text) noexcept;

/// Seeded random stream with portable uniform and Gaussian draws.
///
/// std::normal_distribution is implementation-defined, so Gaussians come from
/// Box-Muller over mt19937_64 output. Draws are bit-identical on every
/// platform with IEEE doubles and a conforming libm.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();

  /// Standard normal draw. Draws come in Box-Muller pairs; the second value
  /// of each pair is returned by the following call.
  double gaussian();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Uniform in [0, 1) computed statelessly from a key.
double keyed_uniform(std::uint64_t key) noexcept;

}  // namespace skytalk
