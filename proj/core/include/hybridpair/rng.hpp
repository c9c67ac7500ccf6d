#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace hybridpair {

/// Derives an independent 64-bit seed from a base seed, a component label and a
/// counter. Sub-seeds depend only on these three values, never on call order.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t counter);

/// Seeded generator with portable uniform / normal / categorical draws.
///
/// The standard library distributions are implementation-defined, so the
/// transforms here are written out against the raw 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal();

  double normal(double mean, double variance);

  /// Index drawn with probability proportional to `probs[i]`.
  std::size_t categorical(std::span<const double> probs);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hybridpair
