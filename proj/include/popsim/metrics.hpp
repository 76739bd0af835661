#pragma once

#include <optional>
#include <utility>

#include "popsim/measure.hpp"

namespace popsim {

// Exact 1-Wasserstein distance: the integral of |F1 - F2| over the merged
// breakpoint grid, with each cell split at the (unique) sign crossing so the
// piecewise-linear integrand is integrated exactly.  With normalize set, both
// measures are first scaled to total mass 1; without it, total masses must
// agree within 1e-12 (absolute), else
// std::domain_error("W1 undefined for unequal masses").  Both inputs must
// have positive mass.
double w1(const PiecewiseCdf& a, const PiecewiseCdf& b, bool normalize = false);

template <class M1, class M2>
double w1(const M1& a, const M2& b, bool normalize = false) {
  return w1(a.cdf(), b.cdf(), normalize);
}

// rho(mu1, mu2) = min(M1, M2) * W1(normalized pair) + |M1 - M2|, extended by
// continuity to zero-mass arguments: rho(mu, 0) = total_mass(mu).
template <class M1, class M2>
double rho(const M1& a, const M2& b) {
  const double ma = total_mass(a), mb = total_mass(b);
  const double gap = ma > mb ? ma - mb : mb - ma;
  if (ma == 0.0 || mb == 0.0) return gap;
  return std::min(ma, mb) * w1(a, b, /*normalize=*/true) + gap;
}

inline constexpr Index flat_default_support_cap = 200;

// Exact flat (bounded-Lipschitz) distance between two atomic measures via the
// finite linear program over test-function values at the merged support:
// maximize sum phi_i * d_i subject to |phi_i| <= 1 and
// |phi_{i+1} - phi_i| <= x_{i+1} - x_i (adjacent Lipschitz constraints
// suffice on the line).  A validation tool for small instances; throws
// std::domain_error("flat_exact restricted to small instances") when the
// merged support exceeds the cap.
double flat_exact(const AtomicMeasure& a, const AtomicMeasure& b,
                  Index support_cap = flat_default_support_cap);

// Sandwich constant C_K = (1/3) min(1, 2/|K|); |K| = 0 counts as min 1, an
// unbounded K gives 0.
double flat_sandwich_constant(double interval_length);

/** The distances the engine reports between two measures: the computable rho
 *  together with the flat-metric sandwich C_K * rho <= rho_F <= rho over the
 *  smallest interval K containing both supports.
 */
struct MetricReport {
  double w1_normalized = 0.0;
  double mass_gap = 0.0;
  double rho = 0.0;
  double flat_lower = 0.0;  // c_K * rho
  double flat_upper = 0.0;  // rho
  double c_K = 0.0;
  std::optional<std::pair<double, double>> interval_K;  // nullopt marks unbounded
};

// Smallest closed interval containing all atoms with positive mass (resp. all
// growth of the CDF); throws std::domain_error on zero-mass measures.
std::pair<double, double> support_interval(const AtomicMeasure& mu);
std::pair<double, double> support_interval(const ReferenceMeasure& mu);

template <class M1, class M2>
MetricReport metric_report(const M1& a, const M2& b) {
  const double ma = total_mass(a), mb = total_mass(b);
  if (!(ma > 0.0) || !(mb > 0.0))
    throw std::domain_error("metric report requires positive total masses");
  const auto sa = support_interval(a);
  const auto sb = support_interval(b);
  MetricReport r;
  r.interval_K = {std::min(sa.first, sb.first), std::max(sa.second, sb.second)};
  r.c_K = flat_sandwich_constant(r.interval_K->second - r.interval_K->first);
  r.w1_normalized = w1(a, b, /*normalize=*/true);
  r.mass_gap = ma > mb ? ma - mb : mb - ma;
  r.rho = std::min(ma, mb) * r.w1_normalized + r.mass_gap;
  r.flat_lower = r.c_K * r.rho;
  r.flat_upper = r.rho;
  return r;
}

}  // namespace popsim
