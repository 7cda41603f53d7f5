#include "cpbound/validation.hpp"

#include "cpbound/error.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

namespace cpbound {
namespace {

struct MeanVar {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  double sd() const { return n > 1.0 ? std::sqrt(m2 / (n - 1.0)) : 0.0; }
  double se() const { return n > 0.0 ? sd() / std::sqrt(n) : 0.0; }
};

std::vector<double> normalized(const std::vector<std::int64_t>& counts, double total) {
  std::vector<double> p(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]) / total;
  return p;
}

}  // namespace

SimulationResult empirical_distribution(const MrppModel& m, double t, const std::vector<std::size_t>& b,
                                        std::size_t reps, std::uint64_t seed, unsigned threads) {
  require(reps >= 100, ErrorCode::InvalidArgument, "at least 100 replications are required");
  require(t > 0.0, ErrorCode::InvalidArgument, "horizon t must be positive");
  require_valid(m);
  for (std::size_t s : b) require(s < m.size(), ErrorCode::InvalidArgument, "counted state out of range");
  const auto started = std::chrono::steady_clock::now();
  std::vector<std::int64_t> w(reps, 0);
  auto run = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t r = lo; r < hi; ++r) {
      Rng rng(derive_seed(seed, r));
      const Trajectory tr = simulate(m, StationaryStart{}, t, rng);
      w[r] = count_in_window(tr, t, b);
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, reps));
  if (threads <= 1) {
    run(0, reps);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (reps + threads - 1) / threads;
    for (unsigned i = 0; i < threads; ++i) {
      const std::size_t lo = i * chunk, hi = std::min(reps, lo + chunk);
      if (lo < hi) pool.emplace_back(run, lo, hi);
    }
    for (auto& th : pool) th.join();
  }
  SimulationResult res;
  res.replications = reps;
  res.seed = seed;
  res.t = t;
  res.b = b;
  const std::int64_t top = *std::max_element(w.begin(), w.end());
  res.counts.assign(static_cast<std::size_t>(top) + 1, 0);
  MeanVar mv;
  for (std::int64_t k : w) {
    ++res.counts[static_cast<std::size_t>(k)];
    mv.add(static_cast<double>(k));
  }
  res.pmf = normalized(res.counts, static_cast<double>(reps));
  res.mean = mv.mean;
  res.mean_se = mv.se();
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return res;
}

std::vector<double> reference_pmf(const CompoundPoissonSpec& spec, std::size_t at_least) {
  double second = 0.0;
  if (spec.kind == CompoundPoissonSpec::Kind::Geometric) {
    second = spec.norm * (2.0 - spec.c0) / (spec.c0 * spec.c0);
  } else {
    for (std::size_t i = 1; i <= spec.support(); ++i) second += static_cast<double>(i * i) * spec.pi(i);
  }
  auto n = static_cast<std::size_t>(spec.lambda + 12.0 * std::sqrt(second) + 32.0);
  n = std::max(n, at_least);
  for (;;) {
    auto p = pmf_vector(spec, n);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (total >= 1.0 - 1e-13 || n > 50'000'000) return p;
    n *= 2;
  }
}

TvEstimate empirical_tv(const SimulationResult& result, std::span<const double> reference, std::size_t resamples,
                        std::uint64_t seed) {
  TvEstimate est;
  est.resamples = resamples;
  est.seed = seed;
  est.tv = tv_distance(result.pmf, reference);
  Rng rng(derive_seed(seed, 0xB0075742ULL));
  const auto n = static_cast<std::int64_t>(result.replications);
  MeanVar mv, noise;
  std::vector<std::int64_t> boot(result.counts.size());
  for (std::size_t r = 0; r < resamples; ++r) {
    std::int64_t left = n;
    double mass_left = 1.0;
    for (std::size_t k = 0; k < boot.size(); ++k) {
      const double p = result.pmf[k];
      if (left == 0 || p <= 0.0) {
        boot[k] = 0;
      } else if (k + 1 == boot.size() || p >= mass_left) {
        boot[k] = left;
      } else {
        boot[k] = sample_binomial(rng, left, std::min(1.0, p / mass_left));
      }
      left -= boot[k];
      mass_left -= p;
    }
    const auto resampled = normalized(boot, static_cast<double>(n));
    mv.add(tv_distance(resampled, reference));
    noise.add(tv_distance(resampled, result.pmf));
  }
  est.se = mv.sd();
  est.sampling_noise = noise.mean;
  return est;
}

std::vector<double> exact_lattice_distribution(const MrppModel& m, double t, const std::vector<std::size_t>& b) {
  require(m.mode() == TimeMode::Lattice, ErrorCode::ModeMismatch, "exact distribution needs a lattice model");
  require(t >= 0.0 && std::abs(t - std::round(t)) < 1e-9, ErrorCode::InvalidArgument,
          "horizon must be a nonnegative integer");
  if (m.is_restriction()) {
    std::vector<std::size_t> pb;
    for (std::size_t s : b) pb.push_back(m.parent_states().at(s));
    return exact_lattice_distribution(*m.parent(), t, pb);
  }
  require_valid(m);
  const auto horizon = static_cast<std::size_t>(std::llround(t));
  if (horizon == 0) return {1.0};
  const std::size_t n = m.size();
  std::vector<bool> counted(n, false);
  for (std::size_t s : b) counted.at(s) = true;
  const auto pi = stationary_distribution(m.transition());
  double mean = 0.0;
  for (std::size_t s = 0; s < n; ++s) mean += pi[s] * m.state_mean(s);

  auto prob = [&](std::size_t s, std::size_t j) {
    return m.transition()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
  };
  // pmf and survival tables per transition on 0..horizon.
  std::vector<std::vector<double>> pmf_tab(n * n), surv_tab(n * n);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto* law = m.sojourn(s, j);
      if (!law) continue;
      auto& pt = pmf_tab[s * n + j];
      auto& st = surv_tab[s * n + j];
      pt.resize(horizon + 1);
      st.resize(horizon + 1);
      for (std::size_t g = 0; g <= horizon; ++g) {
        pt[g] = law->pmf(static_cast<std::int64_t>(g));
        st[g] = law->survival(static_cast<double>(g));
      }
    }
  }

  // arrivals[tau][s][k]: a point at time tau in state s with k counted points before it.
  using Counts = std::vector<double>;
  std::vector<std::vector<Counts>> arrivals(horizon + 1, std::vector<Counts>(n));
  double first_in_window = 0.0;
  for (std::size_t u = 1; u <= horizon; ++u) {
    for (std::size_t j = 0; j < n; ++j) {
      double mass = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        if (prob(s, j) > 0.0) mass += pi[s] * prob(s, j) * surv_tab[s * n + j][u - 1];
      }
      mass /= mean;
      if (mass > 0.0) arrivals[u][j] = Counts{mass};
      first_in_window += mass;
    }
  }
  std::vector<double> law_w{std::max(0.0, 1.0 - first_in_window)};
  auto add_into = [](Counts& dst, const Counts& src, double w) {
    if (dst.size() < src.size()) dst.resize(src.size(), 0.0);
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] += w * src[k];
  };

  for (std::size_t tau = 1; tau <= horizon; ++tau) {
    std::vector<Counts> pending = std::move(arrivals[tau]);
    for (int round = 0; round < 100000; ++round) {
      std::vector<Counts> again(n);
      double again_mass = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        if (pending[s].empty()) continue;
        Counts after = pending[s];
        if (counted[s]) after.insert(after.begin(), 0.0);
        double stay = 0.0;  // P(next point after the horizon)
        for (std::size_t j = 0; j < n; ++j) {
          const double p = prob(s, j);
          if (p <= 0.0) continue;
          const auto& pt = pmf_tab[s * n + j];
          stay += p * surv_tab[s * n + j][horizon - tau];
          if (pt[0] > 0.0) {
            add_into(again[j], after, p * pt[0]);
            for (double v : after) again_mass += p * pt[0] * v;
          }
          for (std::size_t g = 1; tau + g <= horizon; ++g) {
            if (pt[g] > 0.0) add_into(arrivals[tau + g][j], after, p * pt[g]);
          }
        }
        if (law_w.size() < after.size()) law_w.resize(after.size(), 0.0);
        for (std::size_t k = 0; k < after.size(); ++k) law_w[k] += stay * after[k];
      }
      pending = std::move(again);
      if (again_mass < 1e-300) break;
    }
    arrivals[tau].clear();
  }
  return law_w;
}

double kolmogorov_sf(double x) {
  if (x <= 0.0) return 1.0;
  if (x < 1.18) {
    const double pi = std::numbers::pi;
    double cdf = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double a = 2.0 * k - 1.0;
      cdf += std::exp(-a * a * pi * pi / (8.0 * x * x));
    }
    cdf *= std::sqrt(2.0 * pi) / x;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sf = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sf += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(sf, 0.0, 1.0);
}

KsResult ks_one_sample(std::vector<double> sample, const InterarrivalDistribution& d) {
  require(!sample.empty(), ErrorCode::InvalidArgument, "KS test needs a nonempty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  const bool lattice = d.mode() == TimeMode::Lattice;
  double stat = 0.0;
  std::size_t i = 0;
  while (i < sample.size()) {
    const double x = sample[i];
    std::size_t j = i;
    while (j < sample.size() && sample[j] == x) ++j;
    const double f = d.cdf(x);
    double f_left;
    if (lattice) {
      f_left = d.cdf(x - 1.0);
    } else {
      double atom = 0.0;
      for (const Atom& a : d.atoms()) {
        if (a.location == x) atom += a.mass;
      }
      f_left = f - atom;
    }
    stat = std::max({stat, std::abs(static_cast<double>(j) / n - f), std::abs(static_cast<double>(i) / n - f_left)});
    i = j;
  }
  KsResult r;
  r.statistic = stat;
  r.n1 = sample.size();
  r.p_value = kolmogorov_sf(std::sqrt(n) * stat);
  return r;
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), ErrorCode::InvalidArgument, "KS test needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double stat = 0.0;
  while (i < a.size() || j < b.size()) {
    const double x = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    stat = std::max(stat, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double root = std::sqrt(ne);
  KsResult r;
  r.statistic = stat;
  r.n1 = a.size();
  r.n2 = b.size();
  r.p_value = kolmogorov_sf((root + 0.12 + 0.11 / root) * stat);
  return r;
}

ConditionalTestReport memoryless_conditional_test(const MemorylessProfile& profile, const InterarrivalDistribution& d,
                                                  std::span<const double> t_grid, std::size_t n, std::uint64_t seed,
                                                  const NumericConfig& config) {
  require(n >= 10000, ErrorCode::InvalidArgument, "the conditional test needs n >= 10^4");
  const JointSampler sampler(profile, d, config);
  Rng rng(derive_seed(seed, 0));
  std::vector<double> zeta_hat(n), zeta(n);
  for (std::size_t i = 0; i < n; ++i) {
    const JointDraw draw = sampler(rng);
    zeta_hat[i] = draw.zeta_hat;
    zeta[i] = draw.zeta;
  }
  ConditionalTestReport rep;
  rep.seed = seed;
  rep.n = n;
  rep.gamma = profile.gamma();
  const double g = profile.gamma();
  const bool lattice = profile.mode() == TimeMode::Lattice;
  const double mean_target = 1.0 / g;
  const double second_target = lattice ? (2.0 - g) / (g * g) : 2.0 / (g * g);
  const double nn = static_cast<double>(n);
  for (double t_raw : t_grid) {
    const double t = lattice ? std::floor(t_raw) : t_raw;
    ConditionalCheck c;
    c.t = t_raw;
    MeanVar r1, r2;
    for (std::size_t i = 0; i < n; ++i) {
      if (zeta_hat[i] <= t && zeta[i] > t) {
        const double r = zeta[i] - t;
        r1.add(r);
        r2.add(r * r);
      }
    }
    c.events = static_cast<std::size_t>(r1.n);
    c.p_hat = r1.n / nn;
    c.sigma = profile.sigma(t);
    const double se = std::sqrt(c.sigma * (1.0 - c.sigma) / nn);
    c.z_sigma = se > 0.0 ? (c.p_hat - c.sigma) / se : (c.p_hat == c.sigma ? 0.0 : INFINITY);
    c.pass = std::abs(c.z_sigma) <= 3.0;
    c.insufficient = c.events < 200;
    if (!c.insufficient) {
      c.mean_excess = r1.mean;
      c.second_excess = r2.mean;
      c.z_mean = (r1.mean - mean_target) / r1.se();
      c.z_second = (r2.mean - second_target) / r2.se();
      c.pass = c.pass && std::abs(c.z_mean) <= 3.0 && std::abs(c.z_second) <= 3.0;
    }
    rep.pass = rep.pass && c.pass;
    rep.checks.push_back(c);
  }
  rep.marginal = ks_one_sample(zeta, d);
  rep.ks_critical = 1.6276 / std::sqrt(nn);
  rep.ks_pass = rep.marginal.statistic <= rep.ks_critical;
  rep.pass = rep.pass && rep.ks_pass;
  return rep;
}

RestrictionTestReport restriction_equivalence_test(const MrppModel& m, const std::vector<MemorylessProfile>& profiles,
                                                   const std::vector<double>& mu, double epsilon, std::size_t n,
                                                   std::uint64_t seed, double reset_multiplier,
                                                   const NumericConfig& config) {
  require(n >= 100, ErrorCode::InvalidArgument, "the restriction test needs n >= 100");
  const auto em = build_embedding(m, profiles, mu, epsilon, config, reset_multiplier);
  const std::size_t k = m.size();
  const std::size_t zero = em->zero_state();
  std::vector<std::vector<double>> emb_gaps(k * k), orig_gaps(k * k);
  std::vector<double> emb_counts(k * k, 0.0);

  // Augmented chain from a memory-loss point; gaps between consecutive original points.
  Rng rng_e(derive_seed(seed, 1));
  std::size_t state = zero;
  double time = 0.0, last_time = 0.0;
  std::size_t last_state = zero;
  std::size_t taken = 0;
  while (taken < n) {
    const auto [gap, next] = em->step(state, rng_e);
    time += gap;
    state = next;
    if (state == zero) continue;
    if (last_state != zero) {
      emb_gaps[last_state * k + state].push_back(time - last_time);
      emb_counts[last_state * k + state] += 1.0;
      ++taken;
    }
    last_state = state;
    last_time = time;
  }

  Rng rng_o(derive_seed(seed, 2));
  const auto pi = stationary_distribution(m.transition());
  std::size_t cur = 0;
  for (double u = uniform01(rng_o), acc = 0.0; cur < k; ++cur) {
    acc += pi[cur];
    if (u <= acc) break;
  }
  cur = std::min(cur, k - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [gap, next] = m.step(cur, rng_o);
    orig_gaps[cur * k + next].push_back(gap);
    cur = next;
  }

  RestrictionTestReport rep;
  rep.seed = seed;
  rep.n = n;
  rep.epsilon = epsilon;
  rep.reset_multiplier = reset_multiplier;
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t j = 0; j < k; ++j) {
      const auto& a = emb_gaps[s * k + j];
      const auto& b = orig_gaps[s * k + j];
      if (a.size() < 20 || b.size() < 20) continue;
      rep.pairs.push_back({s, j, ks_two_sample(a, b), true});
    }
  }
  // Transition frequencies of the augmented run against the exact kernel.
  double chi2 = 0.0, df = 0.0;
  bool impossible = false;
  for (std::size_t s = 0; s < k; ++s) {
    double row = 0.0;
    int support = 0;
    for (std::size_t j = 0; j < k; ++j) row += emb_counts[s * k + j];
    if (row <= 0.0) continue;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = m.transition()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(j));
      const double obs = emb_counts[s * k + j];
      if (p <= 0.0) {
        impossible = impossible || obs > 0.0;
        continue;
      }
      ++support;
      const double expct = row * p;
      chi2 += (obs - expct) * (obs - expct) / expct;
    }
    df += support - 1;
  }
  rep.chi2 = impossible ? INFINITY : chi2;
  rep.chi2_df = df;
  const std::size_t tests = rep.pairs.size() + (df > 0.0 || impossible ? 1 : 0);
  rep.per_test_level = rep.alpha / static_cast<double>(std::max<std::size_t>(tests, 1));
  if (impossible) {
    rep.chi2_p_value = 0.0;
  } else if (df > 0.0) {
    rep.chi2_p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), chi2));
  }
  rep.chi2_pass = rep.chi2_p_value >= rep.per_test_level;
  rep.pass = rep.chi2_pass;
  for (auto& p : rep.pairs) {
    p.pass = p.ks.p_value >= rep.per_test_level;
    rep.pass = rep.pass && p.pass;
  }
  return rep;
}

CycleStatistics cycle_statistics(const EmbeddedModel& em, std::size_t cycles, std::uint64_t seed) {
  require(cycles > 1, ErrorCode::InvalidArgument, "need at least two cycles");
  Rng rng(derive_seed(seed, 0));
  const std::size_t zero = em.zero_state();
  MeanVar x1, x2, y1, xy, u1;
  std::vector<double> hist;
  for (std::size_t c = 0; c < cycles; ++c) {
    double x = 0.0, u = 0.0;
    std::size_t y = 0;
    std::size_t state = zero;
    do {
      const auto [gap, next] = em.step(state, rng);
      x += gap;
      state = next;
      if (state != zero) {
        ++y;
        u = x;
      }
    } while (state != zero);
    x1.add(x);
    x2.add(x * x);
    y1.add(static_cast<double>(y));
    xy.add(x * static_cast<double>(y));
    u1.add(u);
    if (y > 0) {
      if (hist.size() < y) hist.resize(y, 0.0);
      hist[y - 1] += 1.0;
    }
  }
  CycleStatistics s;
  s.cycles = cycles;
  s.ex = x1.mean;
  s.ex_se = x1.se();
  s.ex2 = x2.mean;
  s.ex2_se = x2.se();
  s.ey = y1.mean;
  s.ey_se = y1.se();
  s.exy = xy.mean;
  s.exy_se = xy.se();
  s.eu = u1.mean;
  s.eu_se = u1.se();
  for (double h : hist) s.masses.push_back(h / static_cast<double>(cycles));
  return s;
}

}  // namespace cpbound
