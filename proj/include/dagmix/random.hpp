#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "dagmix/error.hpp"

namespace dagmix {

using Rng = std::mt19937_64;

/// Independent stream `stream` derived from `seed`.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x9e3779b9u};
  return Rng(seq);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) throw InvalidInput("uniform_index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return static_cast<std::size_t>(r % bound);
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

/// Gamma with the given shape and rate (mean shape / rate).
inline double gamma_draw(Rng& rng, double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

inline double beta_draw(Rng& rng, double a, double b) {
  const double x = gamma_draw(rng, a, 1.0);
  const double y = gamma_draw(rng, b, 1.0);
  return x / (x + y);
}

/// Writes a Dirichlet(concentration) draw into `out`.
inline void dirichlet_draw(Rng& rng, std::span<const double> concentration, std::span<double> out) {
  double total = 0.0;
  for (std::size_t m = 0; m < concentration.size(); ++m) {
    out[m] = gamma_draw(rng, concentration[m], 1.0);
    total += out[m];
  }
  if (total <= 0.0) {
    // Every component underflowed (tiny concentrations); fall back to a
    // vertex of the simplex chosen proportionally to the concentrations.
    double csum = 0.0;
    for (double c : concentration) csum += c;
    double u = uniform01(rng) * csum;
    std::size_t pick = concentration.size() - 1;
    for (std::size_t m = 0; m < concentration.size(); ++m) {
      if (u < concentration[m]) {
        pick = m;
        break;
      }
      u -= concentration[m];
    }
    for (std::size_t m = 0; m < out.size(); ++m) out[m] = (m == pick) ? 1.0 : 0.0;
    return;
  }
  for (double& v : out) v /= total;
}

inline double log_sum_exp(std::span<const double> values) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) hi = std::max(hi, v);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

/// Draws an index with probability proportional to exp(log_weights[k]).
inline std::size_t sample_log_categorical(Rng& rng, std::span<const double> log_weights) {
  const double norm = log_sum_exp(log_weights);
  if (!std::isfinite(norm)) throw InvariantError("sample_log_categorical: no finite weight");
  double u = uniform01(rng);
  std::size_t last_finite = 0;
  for (std::size_t k = 0; k < log_weights.size(); ++k) {
    if (!std::isfinite(log_weights[k])) continue;
    last_finite = k;
    const double p = std::exp(log_weights[k] - norm);
    if (u < p) return k;
    u -= p;
  }
  return last_finite;
}

} // namespace dagmix
