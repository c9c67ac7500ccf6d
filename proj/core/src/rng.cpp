#include "hybridpair/rng.hpp"

#include <cmath>
#include <numbers>

namespace hybridpair {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t counter) {
  std::uint64_t h = splitmix64(base);
  for (const char c : label) {
    h = splitmix64(h ^ static_cast<unsigned char>(c));
  }
  return splitmix64(h ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // 1 - u lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::normal(double mean, double variance) {
  return mean + std::sqrt(variance) * normal();
}

std::size_t Rng::categorical(std::span<const double> probs) {
  double total = 0.0;
  for (const double p : probs) total += p;
  const double target = uniform() * total;
  double running = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    running += probs[i];
    last_positive = i;
    if (target < running) return i;
  }
  // Rounding can leave target just above the final partial sum.
  return last_positive;
}

}  // namespace hybridpair
