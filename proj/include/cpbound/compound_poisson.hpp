#pragma once

#include "cpbound/random.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cpbound {

/// POIS(pi): law of T_1 + ... + T_U with U ~ Po(||pi||) and T_i i.i.d. pi / ||pi||.
struct CompoundPoissonSpec {
  enum class Kind { Geometric, Finite };

  Kind kind = Kind::Finite;
  double norm = 0.0;  ///< ||pi||
  double c0 = 0.0;    ///< geometric case: pi_i = norm (1 - c0)^(i-1) c0
  std::vector<double> finite;  ///< finite case: pi_1 .. pi_K (index 0 holds pi_1)
  double lambda = 0.0;         ///< sum i pi_i
  double theta = 0.0;          ///< (1 / lambda) sum i (i - 1) pi_i
  double tail_bound = 0.0;     ///< mass dropped by truncation (finite case)

  /// pi_i for i >= 1; 0 beyond the finite support.
  double pi(std::size_t i) const;
  /// Largest index carried explicitly (finite case); 0 for geometric.
  std::size_t support() const noexcept { return finite.size(); }
};

std::string_view to_string(CompoundPoissonSpec::Kind kind) noexcept;

/// Geometric spec of a renewal count: ||pi|| = t c0 / mean.
CompoundPoissonSpec build_renewal_spec(double c0, double t, double mean);

/// Finite spec pi_i = t / ex * masses[i - 1]; trailing entries whose cumulative
/// share of ||pi|| is below 1e-12 are dropped and counted in tail_bound.
CompoundPoissonSpec build_mrpp_spec(double t, double ex, std::span<const double> masses);

/// Finite spec straight from pi_1 .. pi_K.
CompoundPoissonSpec build_finite_spec(std::vector<double> pi);

/// pmf over 0..n_max by the compound Poisson recursion
/// g_n = (1/n) sum_i i pi_i g_{n-i}, run on a rescaled range so large ||pi|| does not underflow.
std::vector<double> pmf_vector(const CompoundPoissonSpec& spec, std::size_t n_max);
double pmf(const CompoundPoissonSpec& spec, std::size_t n);

/// Direct draw, used by Monte Carlo cross-checks.
std::int64_t sample_compound(const CompoundPoissonSpec& spec, Rng& rng);

struct SteinConstant {
  double value = 0.0;
  std::string regime;  ///< "general", "monotone" or "theta"
  double general = 0.0;
  bool monotone_holds = false;
  double monotone = 0.0;  ///< meaningful only when monotone_holds
  bool theta_holds = false;
  double theta_value = 0.0;  ///< meaningful only when theta_holds
  /// Monotone condition i pi_i >= (i+1) pi_{i+1} was checked for i below this
  /// index; 0 means it holds structurally (geometric).
  std::size_t verified_range = 0;
};

/// Smallest applicable value among the three Stein constant bounds.
SteinConstant h1_bound(const CompoundPoissonSpec& spec);

/// Total variation distance between pmfs on {0, 1, ...}; mass missing from
/// either vector is treated as sitting beyond both supports.
double tv_distance(std::span<const double> p, std::span<const double> q);

}  // namespace cpbound
