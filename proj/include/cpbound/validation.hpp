#pragma once

#include "cpbound/bounds.hpp"
#include "cpbound/compound_poisson.hpp"
#include "cpbound/embedding.hpp"
#include "cpbound/memoryless.hpp"
#include "cpbound/mrpp.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpbound {

struct TvEstimate {
  double tv = 0.0;  ///< plug-in d_TV(empirical, reference)
  double se = 0.0;  ///< bootstrap standard error
  /// Bootstrap mean of d_TV(resample, empirical): the plug-in estimate exceeds
  /// the true distance by at most about this much, even when that distance is 0.
  double sampling_noise = 0.0;
  std::size_t resamples = 0;
  std::uint64_t seed = 0;
};

struct SimulationResult {
  std::vector<std::int64_t> counts;  ///< counts[k] = replications with W = k
  std::vector<double> pmf;           ///< counts / replications
  std::size_t replications = 0;
  std::uint64_t seed = 0;
  double t = 0.0;
  std::vector<std::size_t> b;
  double mean = 0.0;
  double mean_se = 0.0;
  double wall_seconds = 0.0;
};

/// `reps` independent stationary runs; replication r uses derive_seed(seed, r).
/// threads = 0 picks the hardware concurrency. Results do not depend on threads.
SimulationResult empirical_distribution(const MrppModel& m, double t, const std::vector<std::size_t>& b,
                                        std::size_t reps, std::uint64_t seed, unsigned threads = 0);

/// Reference pmf of POIS(pi) on 0..n where the remaining mass is below 1e-13.
std::vector<double> reference_pmf(const CompoundPoissonSpec& spec, std::size_t at_least = 0);

/// Plug-in TV against `reference` with a multinomial bootstrap standard error.
TvEstimate empirical_tv(const SimulationResult& result, std::span<const double> reference,
                        std::size_t resamples = 500, std::uint64_t seed = 0);

/// Exact law of W by forward recursion over (time, state, count), started
/// from the stationary (length-biased) law of the first point after 0.
std::vector<double> exact_lattice_distribution(const MrppModel& m, double t, const std::vector<std::size_t>& b);

/// Kolmogorov survival function P(K > x) of the limiting KS statistic.
double kolmogorov_sf(double x);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

/// One-sample KS against the law d (handles atoms and lattice laws).
KsResult ks_one_sample(std::vector<double> sample, const InterarrivalDistribution& d);
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

struct ConditionalCheck {
  double t = 0.0;
  std::size_t events = 0;
  double p_hat = 0.0;
  double sigma = 0.0;
  double z_sigma = 0.0;
  double mean_excess = 0.0;
  double z_mean = 0.0;
  double second_excess = 0.0;
  double z_second = 0.0;
  bool insufficient = false;  ///< fewer than 200 conditioning events
  bool pass = true;
};

struct ConditionalTestReport {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double gamma = 0.0;
  std::vector<ConditionalCheck> checks;
  KsResult marginal;
  double ks_critical = 0.0;  ///< 1% asymptotic critical value of the statistic
  bool ks_pass = true;
  bool pass = true;
};

/// Draws n triples from the joint sampler and checks, per t, the probability of
/// {zeta_hat <= t < zeta} against sigma(t) and the residual zeta - t against the
/// reference law (z-tests at 3 SE), plus a KS test of the zeta marginal.
ConditionalTestReport memoryless_conditional_test(const MemorylessProfile& profile, const InterarrivalDistribution& d,
                                                  std::span<const double> t_grid, std::size_t n, std::uint64_t seed,
                                                  const NumericConfig& config = {});

struct PairKs {
  std::size_t from = 0;
  std::size_t to = 0;
  KsResult ks;
  bool pass = true;
};

struct RestrictionTestReport {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double epsilon = 0.0;
  double reset_multiplier = 1.0;
  double alpha = 0.01;
  double per_test_level = 0.01;  ///< Bonferroni-adjusted level
  std::vector<PairKs> pairs;
  double chi2 = 0.0;
  double chi2_df = 0.0;
  double chi2_p_value = 1.0;
  bool chi2_pass = true;
  bool pass = true;
};

/// Simulates the augmented chain, removes the memory-loss points and compares
/// n transitions with n transitions of the original model.
RestrictionTestReport restriction_equivalence_test(const MrppModel& m, const std::vector<MemorylessProfile>& profiles,
                                                   const std::vector<double>& mu, double epsilon, std::size_t n,
                                                   std::uint64_t seed, double reset_multiplier = 1.0,
                                                   const NumericConfig& config = {});

/// Monte Carlo moments of the embedded renewal reward cycle started at a memory-loss point.
struct CycleStatistics {
  std::size_t cycles = 0;
  double ex = 0.0, ex_se = 0.0;
  double ex2 = 0.0, ex2_se = 0.0;
  double ey = 0.0, ey_se = 0.0;
  double exy = 0.0, exy_se = 0.0;
  double eu = 0.0, eu_se = 0.0;
  std::vector<double> masses;  ///< empirical P(Y = i), i >= 1
};
CycleStatistics cycle_statistics(const EmbeddedModel& em, std::size_t cycles, std::uint64_t seed);

}  // namespace cpbound
