#include "popsim/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "popsim/errors.hpp"

namespace popsim {

namespace {

// Merged, strictly increasing breakpoint grid of two CDFs.
std::vector<double> merged_grid(const PiecewiseCdf& a, const PiecewiseCdf& b) {
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(a.size() + b.size()));
  g.insert(g.end(), a.x.data(), a.x.data() + a.size());
  g.insert(g.end(), b.x.data(), b.x.data() + b.size());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

PiecewiseCdf scaled_cdf(const PiecewiseCdf& f, double factor) {
  PiecewiseCdf out;
  out.x = f.x;
  out.f_lo = f.f_lo * factor;
  out.f_hi = f.f_hi * factor;
  return out;
}

}  // namespace

double w1(const PiecewiseCdf& a, const PiecewiseCdf& b, bool normalize) {
  const double ma = a.total(), mb = b.total();
  if (!(ma > 0.0) || !(mb > 0.0))
    throw std::domain_error("W1 requires positive total masses");
  if (!normalize && std::abs(ma - mb) > 1e-12)
    throw std::domain_error("W1 undefined for unequal masses");

  const PiecewiseCdf* pa = &a;
  const PiecewiseCdf* pb = &b;
  PiecewiseCdf na, nb;
  if (normalize) {
    na = scaled_cdf(a, 1.0 / ma);
    nb = scaled_cdf(b, 1.0 / mb);
    pa = &na;
    pb = &nb;
  }

  const std::vector<double> grid = merged_grid(*pa, *pb);
  double acc = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double u = grid[i - 1], v = grid[i];
    const double len = v - u;
    // Both CDFs are linear on (u, v); the difference g is linear from da to db.
    const double da = pa->value(u) - pb->value(u);
    const double db = pa->value_left(v) - pb->value_left(v);
    if (da * db >= 0.0) {
      acc += len * (std::abs(da) + std::abs(db)) * 0.5;
    } else {
      // g crosses zero inside the cell: two triangles.
      acc += len * (da * da + db * db) / (2.0 * std::abs(da - db));
    }
  }
  return acc;
}

double flat_sandwich_constant(double interval_length) {
  if (std::isnan(interval_length) || interval_length < 0.0)
    throw std::invalid_argument("interval length must be nonnegative");
  if (interval_length == 0.0) return 1.0 / 3.0;
  return (1.0 / 3.0) * std::min(1.0, 2.0 / interval_length);
}

std::pair<double, double> support_interval(const AtomicMeasure& mu) {
  double lo = 0.0, hi = 0.0;
  bool seen = false;
  for (Index i = 0; i < mu.size(); ++i) {
    if (mu.masses()[i] > 0.0) {
      const double x = mu.positions()[i];
      if (!seen) {
        lo = hi = x;
        seen = true;
      } else {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
  }
  if (!seen) throw std::domain_error("support of a zero-mass measure is empty");
  return {lo, hi};
}

std::pair<double, double> support_interval(const ReferenceMeasure& mu) {
  const PiecewiseCdf& f = mu.cdf();
  double lo = 0.0, hi = 0.0;
  bool seen = false;
  auto grow = [&](double a, double b) {
    if (!seen) {
      lo = a;
      hi = b;
      seen = true;
    } else {
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    }
  };
  for (Index i = 0; i < f.size(); ++i) {
    if (f.f_hi[i] > f.f_lo[i]) grow(f.x[i], f.x[i]);          // jump at x_i
    if (i > 0 && f.f_lo[i] > f.f_hi[i - 1]) grow(f.x[i - 1], f.x[i]);  // ramp
  }
  if (!seen) throw std::domain_error("support of a zero-mass measure is empty");
  return {lo, hi};
}

namespace {

// Dense primal simplex with Bland's pivoting rule, for
//   max c^T y   s.t.  A y <= rhs,  y >= 0,
// with rhs >= 0 so the slack basis is feasible.  Returns the optimum.
double simplex_max(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs,
                   const Eigen::VectorXd& c) {
  const Eigen::Index m = A.rows(), n = A.cols();
  Eigen::MatrixXd t(m + 1, n + m + 1);
  t.setZero();
  t.topLeftCorner(m, n) = A;
  t.block(0, n, m, m).setIdentity();
  t.col(n + m).head(m) = rhs;
  t.row(m).head(n) = -c.transpose();

  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) basis[static_cast<std::size_t>(i)] = n + i;

  const double eps = 1e-11;
  const long max_iter = 400L * static_cast<long>(n + m) + 10000L;
  for (long iter = 0; iter < max_iter; ++iter) {
    // Bland: entering variable = lowest column index with a negative
    // reduced cost.
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + m; ++j) {
      if (t(m, j) < -eps) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return t(m, n + m);  // optimal

    // Ratio test; ties broken by the lowest basis index (Bland).
    Eigen::Index leave = -1;
    double best = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double aij = t(i, enter);
      if (aij > eps) {
        const double ratio = t(i, n + m) / aij;
        if (leave < 0 || ratio < best - eps ||
            (ratio < best + eps &&
             basis[static_cast<std::size_t>(i)] <
                 basis[static_cast<std::size_t>(leave)])) {
          leave = i;
          best = ratio;
        }
      }
    }
    if (leave < 0)
      throw NumericalError("flat metric LP failed to converge");

    const Eigen::RowVectorXd pivot_row = t.row(leave) / t(leave, enter);
    t.row(leave) = pivot_row;
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = t(i, enter);
      if (f != 0.0) t.row(i) -= f * pivot_row;
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }
  throw NumericalError("flat metric LP failed to converge");
}

}  // namespace

double flat_exact(const AtomicMeasure& a, const AtomicMeasure& b,
                  Index support_cap) {
  const AtomicMeasure pa = a.without_zero_atoms();
  const AtomicMeasure pb = b.without_zero_atoms();

  // Signed mass difference on the merged support.
  std::vector<std::pair<double, double>> diff;
  diff.reserve(static_cast<std::size_t>(pa.size() + pb.size()));
  Index i = 0, j = 0;
  while (i < pa.size() || j < pb.size()) {
    if (j >= pb.size() ||
        (i < pa.size() && pa.positions()[i] < pb.positions()[j])) {
      diff.emplace_back(pa.positions()[i], pa.masses()[i]);
      ++i;
    } else if (i >= pa.size() || pb.positions()[j] < pa.positions()[i]) {
      diff.emplace_back(pb.positions()[j], -pb.masses()[j]);
      ++j;
    } else {
      diff.emplace_back(pa.positions()[i], pa.masses()[i] - pb.masses()[j]);
      ++i;
      ++j;
    }
  }

  const Index n = static_cast<Index>(diff.size());
  if (n == 0) return 0.0;  // both measures are zero
  if (n > support_cap)
    throw std::domain_error("flat_exact restricted to small instances");
  if (n == 1) return std::abs(diff[0].second);  // |phi| <= 1 saturates

  // Test function values phi_i in [-1, 1] with |phi_{i+1} - phi_i| <= dx_i.
  // Substituting y_i = phi_i + 1 in [0, 2] makes every right-hand side
  // nonnegative, so the slack basis starts feasible.
  const Eigen::Index m = 3 * n - 2;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
  Eigen::VectorXd rhs(m);
  Eigen::VectorXd c(n);
  double dsum = 0.0;
  for (Index k = 0; k < n; ++k) {
    A(k, k) = 1.0;
    rhs(k) = 2.0;
    c(k) = diff[static_cast<std::size_t>(k)].second;
    dsum += c(k);
  }
  for (Index k = 0; k + 1 < n; ++k) {
    const double dx = diff[static_cast<std::size_t>(k) + 1].first -
                      diff[static_cast<std::size_t>(k)].first;
    A(n + 2 * k, k) = -1.0;
    A(n + 2 * k, k + 1) = 1.0;
    rhs(n + 2 * k) = dx;
    A(n + 2 * k + 1, k) = 1.0;
    A(n + 2 * k + 1, k + 1) = -1.0;
    rhs(n + 2 * k + 1) = dx;
  }

  return simplex_max(A, rhs, c) - dsum;
}

}  // namespace popsim
