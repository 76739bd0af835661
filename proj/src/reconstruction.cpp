#include "popsim/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "popsim/errors.hpp"
#include "popsim/metrics.hpp"

namespace popsim {

namespace {

void validate_spec(const ReconstructionSpec& spec) {
  if (spec.target_count < 1)
    throw ConfigError("reconstruction target count must be at least 1");
  if (spec.fixed_interval && spec.fixed_interval->first > spec.fixed_interval->second)
    throw ConfigError("reconstruction interval is empty");
}

std::pair<double, double> choose_interval(
    const std::pair<double, double>& support, const ReconstructionSpec& spec) {
  if (!spec.fixed_interval) return support;
  const auto& k = *spec.fixed_interval;
  if (support.first < k.first || support.second > k.second)
    throw ConfigError("measure has mass outside the fixed reconstruction interval");
  return k;
}

ReconstructionResult empty_result(const ReconstructionSpec& spec) {
  ReconstructionResult r;
  if (spec.fixed_interval) r.interval_used = *spec.fixed_interval;
  return r;
}

// Adjust cell j until the left-to-right floating-point total of `cells`
// lands exactly on `target`.  The running total is monotone in the cell
// value and the cell's ulp is never coarser than the total's rounding
// granule (the cell is at most the whole sum), so bracketing the target and
// bisecting in the cell value always reaches it — unless nonnegativity
// blocks the bracket, in which case the closest endpoint stays and the
// caller may steer a different cell.
bool steer_cell(ArrayXd& cells, Index j, double target) {
  const Index n = cells.size();
  const auto sum_with = [&](double v) {
    cells[j] = v;
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += cells[i];
    return s;
  };
  const double v0 = cells[j];
  const double s0 = sum_with(v0);
  if (s0 == target) return true;

  constexpr double inf = std::numeric_limits<double>::infinity();
  double lo, hi;
  if (s0 < target) {
    lo = v0;
    hi = v0;
    double step = target - s0;
    for (int k = 0; k < 2000 && sum_with(hi) < target; ++k) {
      if (hi > 9e307) {  // totals this size are broken upstream anyway
        cells[j] = v0;
        return false;
      }
      double next = hi + step;
      if (next == hi) next = std::nextafter(hi, inf);
      hi = next;
      step *= 2.0;
    }
    if (sum_with(hi) < target) {
      cells[j] = v0;
      return false;
    }
  } else {
    hi = v0;
    lo = v0;
    double step = s0 - target;
    for (int k = 0; k < 2000 && sum_with(lo) > target; ++k) {
      if (lo == 0.0) break;
      double next = std::max(0.0, lo - step);
      if (next == lo) next = std::nextafter(lo, 0.0);
      lo = next;
      step *= 2.0;
    }
    if (sum_with(lo) > target) {  // even an empty cell overshoots
      cells[j] = v0;
      return false;
    }
  }

  // Invariant: sum(lo) <= target <= sum(hi).  Bisect to adjacent values.
  for (int k = 0; k < 200; ++k) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (sum_with(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  if (sum_with(hi) == target) return true;
  if (sum_with(lo) == target) return true;
  // The chain total skipped the target; keep the closer endpoint.
  const double err_lo = std::abs(sum_with(lo) - target);
  const double err_hi = std::abs(sum_with(hi) - target);
  sum_with(err_hi < err_lo ? hi : lo);
  return false;
}

// Nudge the floating-point cell masses so their running sum reproduces
// `target` bitwise.  The last cell absorbs the rounding residue as a rule,
// but a single cell cannot always reach the target: when the cell and the
// total share a binade, every candidate sum can land on a round-half-even
// tie and a target with an odd mantissa stays unreachable.  A cell from a
// lower binade has a finer ulp and resolves the tie, so fall back through
// the remaining cells until one lands.
void distribute_total(ArrayXd& cells, double target) {
  const Index n = cells.size();
  if (n == 0) return;
  if (steer_cell(cells, n - 1, target)) return;
  for (Index j = 0; j + 1 < n; ++j)
    if (steer_cell(cells, j, target)) return;
}

AtomicMeasure gather_cells(const ArrayXd& cells, double k1, double dx) {
  Index nz = 0;
  for (Index j = 0; j < cells.size(); ++j)
    if (cells[j] != 0.0) ++nz;
  ArrayXd pos(nz), mass(nz);
  Index out = 0;
  for (Index j = 0; j < cells.size(); ++j) {
    if (cells[j] != 0.0) {
      pos[out] = k1 + (static_cast<double>(j) + 0.5) * dx;
      mass[out] = cells[j];
      ++out;
    }
  }
  return AtomicMeasure::from_sorted_unchecked(std::move(pos), std::move(mass));
}

// One maximal interval of CDF growth, parameterized by mass level.
struct LevelPiece {
  double lvl_lo, lvl_hi;
  double x_lo, x_hi;  // equal for a jump
};

std::vector<LevelPiece> level_pieces(const PiecewiseCdf& f) {
  std::vector<LevelPiece> out;
  for (Index i = 0; i < f.size(); ++i) {
    if (i > 0 && f.f_lo[i] > f.f_hi[i - 1])
      out.push_back({f.f_hi[i - 1], f.f_lo[i], f.x[i - 1], f.x[i]});
    if (f.f_hi[i] > f.f_lo[i])
      out.push_back({f.f_lo[i], f.f_hi[i], f.x[i], f.x[i]});
  }
  return out;
}

// Equal-mass chunking shared by both input kinds: the mass axis [0, T] is cut
// into `mbar` chunks and each chunk is placed at its barycenter.  Pieces must
// tile [0, T] in increasing level order.
AtomicMeasure equal_mass_atoms(const std::vector<LevelPiece>& pieces,
                               double total, Index mbar) {
  ArrayXd pos(mbar), mass(mbar);
  const double q = total / static_cast<double>(mbar);
  // Chunk targets that graze an existing growth level by mere roundoff are
  // snapped onto it, so a measure already carrying the target masses chunks
  // into whole atoms and reproduces itself.
  std::vector<double> levels;
  levels.reserve(2 * pieces.size());
  for (const LevelPiece& p : pieces) {
    levels.push_back(p.lvl_lo);
    levels.push_back(p.lvl_hi);
  }
  const double snap_tol =
      16.0 * std::numeric_limits<double>::epsilon() * total;
  std::size_t i = 0;
  double lo = 0.0;
  for (Index j = 0; j < mbar; ++j) {
    double hi =
        total * (static_cast<double>(j + 1) / static_cast<double>(mbar));
    if (j + 1 < mbar) {
      const auto it = std::lower_bound(levels.begin(), levels.end(), hi);
      double slack = snap_tol;
      if (it != levels.end() && *it - hi <= slack) {
        slack = *it - hi;
        hi = *it;
      }
      if (it != levels.begin() && hi - *(it - 1) <= slack) hi = *(it - 1);
      hi = std::max(hi, lo);
    }
    double num = 0.0, den = 0.0;
    double shared_x = 0.0;
    bool any = false, single_point = false;
    while (i < pieces.size()) {
      const LevelPiece& p = pieces[i];
      const double a = std::max(lo, p.lvl_lo);
      const double b = std::min(hi, p.lvl_hi);
      if (b > a) {
        if (!any) {
          any = true;
          single_point = p.x_hi == p.x_lo;
          shared_x = p.x_lo;
        } else if (p.x_hi != p.x_lo || p.x_lo != shared_x) {
          single_point = false;
        }
        if (p.x_hi == p.x_lo) {
          num += (b - a) * p.x_lo;
        } else {
          const double span = p.lvl_hi - p.lvl_lo;
          const double xa = p.x_lo + (a - p.lvl_lo) / span * (p.x_hi - p.x_lo);
          const double xb = p.x_lo + (b - p.lvl_lo) / span * (p.x_hi - p.x_lo);
          num += (b - a) * 0.5 * (xa + xb);
        }
        den += b - a;
      }
      if (p.lvl_hi <= hi)
        ++i;
      else
        break;
    }
    if (den > 0.0) {
      // A chunk drawn from one location must land exactly there; dividing the
      // accumulated products back out can drift by an ulp.
      pos[j] = single_point ? shared_x : num / den;
    } else {
      // Degenerate chunk (possible only through extreme rounding): fall back
      // to the nearest growth point.
      pos[j] = i < pieces.size() ? pieces[i].x_lo : pieces.back().x_hi;
    }
    mass[j] = q;
    lo = hi;
  }
  distribute_total(mass, total);
  // Barycenters are nondecreasing; duplicates merge in the constructor.  The
  // merge regroups the mass sum, so rebalance once more on the merged atoms.
  const AtomicMeasure merged(std::move(pos), std::move(mass));
  ArrayXd mpos = merged.positions();
  ArrayXd mmass = merged.masses();
  distribute_total(mmass, total);
  return AtomicMeasure::from_sorted_unchecked(std::move(mpos), std::move(mmass));
}

}  // namespace

ReconstructionResult reconstruct(const AtomicMeasure& mu,
                                 const ReconstructionSpec& spec) {
  validate_spec(spec);
  const AtomicMeasure pm = mu.without_zero_atoms();
  if (pm.empty()) return empty_result(spec);

  const auto interval = choose_interval(support_interval(pm), spec);
  const double k1 = interval.first, k2 = interval.second;
  const double width = k2 - k1;
  const Index mbar = spec.target_count;

  ReconstructionResult r;
  r.interval_used = interval;

  if (spec.kind == ReconstructionKind::fixed_location) {
    r.error_bound = width / (2.0 * static_cast<double>(mbar));
    if (width == 0.0) {
      r.measure = AtomicMeasure::dirac(pm.positions()[0], pm.total_mass());
      r.error_bound = 0.0;
      return r;
    }
    const double dx = width / static_cast<double>(mbar);
    ArrayXd cells = ArrayXd::Zero(mbar);
    for (Index i = 0; i < pm.size(); ++i) {
      auto j = static_cast<Index>(std::floor((pm.positions()[i] - k1) / dx));
      j = std::clamp<Index>(j, 0, mbar - 1);
      cells[j] += pm.masses()[i];
    }
    distribute_total(cells, pm.total_mass());
    r.measure = gather_cells(cells, k1, dx);
    return r;
  }

  // fixed_equal_mass: every atom is one jump piece on the mass axis.
  std::vector<LevelPiece> pieces;
  pieces.reserve(static_cast<std::size_t>(pm.size()));
  double level = 0.0;
  for (Index i = 0; i < pm.size(); ++i) {
    const double next = level + pm.masses()[i];
    pieces.push_back({level, next, pm.positions()[i], pm.positions()[i]});
    level = next;
  }
  r.measure = equal_mass_atoms(pieces, pm.total_mass(), mbar);
  r.error_bound = width / static_cast<double>(mbar);
  return r;
}

ReconstructionResult reconstruct(const ReferenceMeasure& mu,
                                 const ReconstructionSpec& spec) {
  validate_spec(spec);
  const double total = mu.total_mass();
  if (total == 0.0) return empty_result(spec);

  const auto interval = choose_interval(support_interval(mu), spec);
  const double k1 = interval.first, k2 = interval.second;
  const double width = k2 - k1;
  const Index mbar = spec.target_count;

  ReconstructionResult r;
  r.interval_used = interval;

  if (spec.kind == ReconstructionKind::fixed_location) {
    r.error_bound = width / (2.0 * static_cast<double>(mbar));
    if (width == 0.0) {
      r.measure = AtomicMeasure::dirac(k1, total);
      r.error_bound = 0.0;
      return r;
    }
    const double dx = width / static_cast<double>(mbar);
    ArrayXd cells(mbar);
    double prev = mu.cdf_value_left(k1);
    for (Index j = 0; j + 1 < mbar; ++j) {
      const double edge = k1 + static_cast<double>(j + 1) * dx;
      const double next = mu.cdf_value_left(edge);
      cells[j] = next - prev;
      prev = next;
    }
    cells[mbar - 1] = total - prev;  // the last cell keeps its right endpoint
    distribute_total(cells, total);
    r.measure = gather_cells(cells, k1, dx);
    return r;
  }

  r.measure = equal_mass_atoms(level_pieces(mu.cdf()), total, mbar);
  r.error_bound = width / static_cast<double>(mbar);
  return r;
}

}  // namespace popsim
