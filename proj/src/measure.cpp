#include "popsim/measure.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace popsim {

namespace {

bool strictly_increasing(const ArrayXd& v) {
  for (Index i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

}  // namespace

AtomicMeasure::AtomicMeasure(ArrayXd positions, ArrayXd masses) {
  if (positions.size() != masses.size())
    throw std::invalid_argument("positions and masses must have equal length");
  if (!positions.allFinite())
    throw std::invalid_argument("atom positions must be finite");
  for (Index i = 0; i < masses.size(); ++i)
    if (!(masses[i] >= 0.0))
      throw std::invalid_argument("atom masses must be nonnegative");

  const Index n = positions.size();
  if (n > 0 && !strictly_increasing(positions)) {
    // Stable sort keeps the original relative order of equal positions, so
    // the left-to-right merge below reproduces the input's summation order.
    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return positions[a] < positions[b]; });
    ArrayXd ps(n), ms(n);
    for (Index i = 0; i < n; ++i) {
      ps[i] = positions[order[static_cast<size_t>(i)]];
      ms[i] = masses[order[static_cast<size_t>(i)]];
    }
    positions.swap(ps);
    masses.swap(ms);
  }

  // Merge exact duplicates.
  Index out = 0;
  for (Index i = 0; i < n; ++i) {
    if (out > 0 && positions[i] == positions[out - 1]) {
      masses[out - 1] += masses[i];
    } else {
      positions[out] = positions[i];
      masses[out] = masses[i];
      ++out;
    }
  }
  positions_ = positions.head(out);
  masses_ = masses.head(out);
  total_mass_ = 0.0;
  for (Index i = 0; i < out; ++i) total_mass_ += masses_[i];
}

AtomicMeasure AtomicMeasure::from_sorted_unchecked(ArrayXd positions, ArrayXd masses) {
  assert(positions.size() == masses.size());
  assert(strictly_increasing(positions));
  AtomicMeasure mu;
  mu.positions_ = std::move(positions);
  mu.masses_ = std::move(masses);
  mu.total_mass_ = 0.0;
  for (Index i = 0; i < mu.masses_.size(); ++i) {
    assert(mu.masses_[i] >= 0.0);
    mu.total_mass_ += mu.masses_[i];
  }
  return mu;
}

AtomicMeasure AtomicMeasure::dirac(double position, double mass) {
  return AtomicMeasure(ArrayXd::Constant(1, position), ArrayXd::Constant(1, mass));
}

AtomicMeasure AtomicMeasure::normalized() const {
  if (!(total_mass_ > 0.0))
    throw std::domain_error("cannot normalize a zero-mass measure");
  return from_sorted_unchecked(positions_, masses_ / total_mass_);
}

AtomicMeasure AtomicMeasure::scaled(double factor) const {
  if (!(factor >= 0.0))
    throw std::invalid_argument("scale factor must be nonnegative");
  return from_sorted_unchecked(positions_, masses_ * factor);
}

AtomicMeasure AtomicMeasure::without_zero_atoms() const {
  const Index n = size();
  ArrayXd ps(n), ms(n);
  Index out = 0;
  for (Index i = 0; i < n; ++i) {
    if (masses_[i] > 0.0) {
      ps[out] = positions_[i];
      ms[out] = masses_[i];
      ++out;
    }
  }
  return from_sorted_unchecked(ps.head(out), ms.head(out));
}

PiecewiseCdf AtomicMeasure::cdf() const {
  const Index n = size();
  PiecewiseCdf c;
  c.x = positions_;
  c.f_lo.resize(n);
  c.f_hi.resize(n);
  double run = 0.0;
  for (Index i = 0; i < n; ++i) {
    c.f_lo[i] = run;
    run += masses_[i];
    c.f_hi[i] = run;
  }
  return c;
}

double PiecewiseCdf::value(double s) const {
  const Index n = size();
  if (n == 0 || s < x[0]) return 0.0;
  if (s >= x[n - 1]) return f_hi[n - 1];
  // Last breakpoint with x[i] <= s.
  const double* begin = x.data();
  Index i = static_cast<Index>(std::upper_bound(begin, begin + n, s) - begin) - 1;
  if (s == x[i]) return f_hi[i];
  const double w = (s - x[i]) / (x[i + 1] - x[i]);
  return f_hi[i] + w * (f_lo[i + 1] - f_hi[i]);
}

double PiecewiseCdf::value_left(double s) const {
  const Index n = size();
  if (n == 0 || s <= x[0]) return 0.0;
  if (s > x[n - 1]) return f_hi[n - 1];
  const double* begin = x.data();
  Index i = static_cast<Index>(std::lower_bound(begin, begin + n, s) - begin);
  if (i < n && s == x[i]) return f_lo[i];
  --i;
  const double w = (s - x[i]) / (x[i + 1] - x[i]);
  return f_hi[i] + w * (f_lo[i + 1] - f_hi[i]);
}

double PiecewiseCdf::quantile(double s) const {
  const double m = total();
  if (!(m > 0.0)) throw std::domain_error("empty measure has no quantile");
  if (!(s >= 0.0) || !(s <= m))
    throw std::domain_error("quantile level outside [0, total mass]");
  const Index n = size();
  // First breakpoint whose value exceeds s; the level is crossed there or on
  // the ramp leading into it.
  for (Index i = 0; i < n; ++i) {
    if (f_hi[i] > s) {
      const double prev = i > 0 ? f_hi[i - 1] : 0.0;
      if (f_lo[i] > s && f_lo[i] > prev) {
        const double w = (s - prev) / (f_lo[i] - prev);
        return x[i - 1] + w * (x[i] - x[i - 1]);
      }
      return x[i];
    }
  }
  return x[n - 1];  // s equals the total mass
}

double quantile(const AtomicMeasure& mu, double s) { return mu.cdf().quantile(s); }
double quantile(const ReferenceMeasure& mu, double s) { return mu.cdf().quantile(s); }

ReferenceMeasure::ReferenceMeasure(ArrayXd positions, ArrayXd cumulative) {
  if (positions.size() != cumulative.size())
    throw std::invalid_argument("positions and cumulative values must have equal length");
  if (!positions.allFinite() || !cumulative.allFinite())
    throw std::invalid_argument("CDF breakpoints must be finite");
  const Index n = positions.size();
  for (Index i = 0; i < n; ++i) {
    if (i > 0 && positions[i] < positions[i - 1])
      throw std::invalid_argument("CDF breakpoint positions must be nondecreasing");
    if (cumulative[i] < (i > 0 ? cumulative[i - 1] : 0.0))
      throw std::invalid_argument("CDF values must be nondecreasing and start at >= 0");
  }

  PiecewiseCdf c;
  c.x.resize(n);
  c.f_lo.resize(n);
  c.f_hi.resize(n);
  Index out = 0;
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && positions[j + 1] == positions[i]) ++j;
    const bool repeated = j > i;
    c.x[out] = positions[i];
    c.f_hi[out] = cumulative[j];
    if (out == 0) {
      // The CDF is 0 left of the first breakpoint, so its left limit must be
      // 0; a single row with positive value is read as a jump from 0.
      if (repeated && cumulative[i] != 0.0)
        throw std::invalid_argument("first CDF breakpoint must rise from 0");
      c.f_lo[0] = 0.0;
    } else {
      // A repeated position states the left limit explicitly; a single row is
      // the ramp's arrival value (no jump).
      c.f_lo[out] = cumulative[i];
      if (c.f_lo[out] < c.f_hi[out - 1])
        throw std::invalid_argument("CDF values must be nondecreasing and start at >= 0");
    }
    ++out;
    i = j + 1;
  }
  c.x.conservativeResize(out);
  c.f_lo.conservativeResize(out);
  c.f_hi.conservativeResize(out);
  cdf_ = std::move(c);
}

ReferenceMeasure ReferenceMeasure::uniform(double a, double b, double mass) {
  if (!(a < b)) throw std::invalid_argument("uniform measure needs a < b");
  if (!(mass >= 0.0)) throw std::invalid_argument("uniform measure needs mass >= 0");
  ArrayXd xs(2), fs(2);
  xs << a, b;
  fs << 0.0, mass;
  return ReferenceMeasure(xs, fs);
}

ReferenceMeasure ReferenceMeasure::from_atoms(const AtomicMeasure& mu) {
  return ReferenceMeasure(mu.cdf());
}

ReferenceMeasure ReferenceMeasure::from_cdf(const std::function<double(double)>& F,
                                            double a, double b, Index n) {
  if (!(a < b)) throw std::invalid_argument("from_cdf needs a < b");
  if (n < 1) throw std::invalid_argument("from_cdf needs at least one sample interval");
  ArrayXd xs(n + 1), fs(n + 1);
  const double f0 = F(a);
  double prev = 0.0;
  for (Index i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n);
    xs[i] = a + t * (b - a);
    double v = F(xs[i]) - f0;
    if (!(v >= prev)) v = prev;  // absorb rounding wiggles of the sampled CDF
    fs[i] = v;
    prev = v;
  }
  return ReferenceMeasure(xs, fs);
}

AtomicMeasure merge_close_atoms(const AtomicMeasure& mu, double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("merge tolerance must be nonnegative");
  const Index n = mu.size();
  if (n < 2 || tol == 0.0) return mu;
  const ArrayXd& xs = mu.positions();
  const ArrayXd& ms = mu.masses();
  ArrayXd ps(n), out_ms(n);
  Index out = 0;
  for (Index i = 0; i < n; ++i) {
    if (out > 0 && xs[i] - ps[out - 1] <= tol) {
      out_ms[out - 1] += ms[i];
    } else {
      ps[out] = xs[i];
      out_ms[out] = ms[i];
      ++out;
    }
  }
  return AtomicMeasure::from_sorted_unchecked(ps.head(out), out_ms.head(out));
}

}  // namespace popsim
