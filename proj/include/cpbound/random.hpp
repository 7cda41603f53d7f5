#pragma once

#include <cstdint>
#include <random>

namespace cpbound {

/// Generator used everywhere in the library. Samplers never own one; callers
/// pass a reference so that streams stay explicit and reproducible.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for replication `index` derived from a master seed. Streams for
/// different indices are decorrelated through two splitmix rounds.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Uniform on the open interval (0, 1), 53 bits of resolution.
double uniform01(Rng& rng) noexcept;

double sample_exponential(Rng& rng, double rate) noexcept;

/// Geometric on {1, 2, ...} with success probability p.
std::int64_t sample_geometric(Rng& rng, double p) noexcept;

double sample_standard_normal(Rng& rng) noexcept;

/// Gamma(shape, 1) by Marsaglia-Tsang; shape > 0.
double sample_gamma(Rng& rng, double shape) noexcept;

/// Binomial(n, p). Delegates to the standard library, so streams are only
/// reproducible for a fixed toolchain.
std::int64_t sample_binomial(Rng& rng, std::int64_t n, double p);

}  // namespace cpbound
