#pragma once

#include <Eigen/Dense>

#include <functional>
#include <utility>

namespace popsim {

using Eigen::ArrayXd;
using Eigen::Index;

/** Right-continuous CDF of a finite nonnegative measure on the line.
 *
 *  Breakpoints x are strictly increasing; f_lo[i] and f_hi[i] are the left
 *  limit F(x[i]-) and the value F(x[i]).  A gap f_hi > f_lo is an atom, and
 *  between breakpoints the CDF ramps linearly from f_hi[i] to f_lo[i+1]
 *  (equal values give a flat stretch, i.e. no mass).  Left of the first
 *  breakpoint the CDF is 0, right of the last it is the total mass.
 *
 *  Pure atomic measures give staircases, densities give ramps, and mixtures
 *  of both are legal; this is the common currency of the metric code.
 */
struct PiecewiseCdf {
  ArrayXd x;
  ArrayXd f_lo;
  ArrayXd f_hi;

  Index size() const { return x.size(); }
  double total() const { return x.size() > 0 ? f_hi[x.size() - 1] : 0.0; }

  // F(s) and the left limit F(s-).
  double value(double s) const;
  double value_left(double s) const;

  // Generalized inverse sup{x : F(x) <= s}, right-continuous on plateaus:
  // s = 0 gives the left end of the support, s = total the right end.
  // Requires total() > 0 and s in [0, total()].
  double quantile(double s) const;
};

/** Finite nonnegative atomic measure sum_i m_i delta_{x_i}.
 *
 *  Atoms are stored sorted with strictly increasing positions; equal
 *  positions are merged on construction by summing masses left to right.
 *  Zero-mass atoms are allowed (the solver creates states that have not
 *  received mass yet) and never affect distances or integrals.
 *
 *  Instances are immutable after construction and safe to share across
 *  threads.  total_mass() is the left-to-right sum of the masses, fixed at
 *  construction for reproducibility.
 */
class AtomicMeasure {
 public:
  AtomicMeasure() = default;

  // Sorts, merges equal positions, validates: positions finite, masses >= 0.
  AtomicMeasure(ArrayXd positions, ArrayXd masses);

  // Fast path for callers that guarantee strictly increasing positions and
  // nonnegative masses (checked only by debug assertions).
  static AtomicMeasure from_sorted_unchecked(ArrayXd positions, ArrayXd masses);

  static AtomicMeasure dirac(double position, double mass);

  Index size() const { return positions_.size(); }
  bool empty() const { return positions_.size() == 0; }
  const ArrayXd& positions() const { return positions_; }
  const ArrayXd& masses() const { return masses_; }
  double total_mass() const { return total_mass_; }

  // Measure scaled to total mass 1; throws std::domain_error on zero mass.
  AtomicMeasure normalized() const;
  // Measure with all masses multiplied by factor >= 0.
  AtomicMeasure scaled(double factor) const;
  // Copy without zero-mass atoms.
  AtomicMeasure without_zero_atoms() const;

  PiecewiseCdf cdf() const;

 private:
  ArrayXd positions_;
  ArrayXd masses_;
  double total_mass_ = 0.0;
};

/** Measure given by a piecewise-linear CDF: atoms plus uniform-density
 *  pieces.  Used for exact solutions and continuum initial data.
 */
class ReferenceMeasure {
 public:
  ReferenceMeasure() = default;

  // Breakpoints (position, cumulative mass), both nondecreasing.  A repeated
  // position encodes a jump (an atom); the CDF is 0 before the first
  // breakpoint and linear in between.
  ReferenceMeasure(ArrayXd positions, ArrayXd cumulative);

  // Uniform density of the given mass on [a, b], a < b.
  static ReferenceMeasure uniform(double a, double b, double mass);

  static ReferenceMeasure from_atoms(const AtomicMeasure& mu);

  // Piecewise-linear interpolant of F on n+1 equispaced samples over [a, b],
  // shifted so the measure starts at 0 (mass of F below a is discarded).
  static ReferenceMeasure from_cdf(const std::function<double(double)>& F,
                                   double a, double b, Index n);

  double total_mass() const { return cdf_.total(); }
  bool empty() const { return cdf_.size() == 0; }
  double cdf_value(double x) const { return cdf_.value(x); }
  double cdf_value_left(double x) const { return cdf_.value_left(x); }
  const PiecewiseCdf& cdf() const { return cdf_; }

 private:
  explicit ReferenceMeasure(PiecewiseCdf cdf) : cdf_(std::move(cdf)) {}

  PiecewiseCdf cdf_;
};

// Total mass of a measure (sum of atom masses, resp. final CDF value).
inline double total_mass(const AtomicMeasure& mu) { return mu.total_mass(); }
inline double total_mass(const ReferenceMeasure& mu) { return mu.total_mass(); }

// Generalized inverse CDF at level s in [0, total mass]; throws
// std::domain_error("empty measure has no quantile") on zero-mass input.
double quantile(const AtomicMeasure& mu, double s);
double quantile(const ReferenceMeasure& mu, double s);

// Atoms within tol of each other merged into the earlier atom's position
// (masses summed); the solver's dedup primitive.
AtomicMeasure merge_close_atoms(const AtomicMeasure& mu, double tol);

}  // namespace popsim
