#include "popsim/model.hpp"

#include <cmath>

#include "popsim/errors.hpp"

namespace popsim {

FrozenCoefficients freeze_coefficients(const ModelSpec& model, double t,
                                       const AtomicMeasure& mu_ref,
                                       FreezeSelection which) {
  FrozenCoefficients out;
  // One shared snapshot for every closure produced by this call.
  auto snap = std::make_shared<const AtomicMeasure>(mu_ref);

  if (which == FreezeSelection::transport_speed) {
    if (model.b) {
      out.b = [fn = model.b, t, snap](const ArrayXd& x) {
        return fn(t, *snap, x);
      };
    }
    return out;
  }

  if (model.c) {
    out.c = [fn = model.c, t, snap](const ArrayXd& x) {
      return fn(t, *snap, x);
    };
  }
  out.branch_rates.reserve(model.kernel.branches.size());
  for (const auto& branch : model.kernel.branches) {
    out.branch_rates.push_back(
        [fn = branch.rate, t, snap](const ArrayXd& x) {
          return fn(t, *snap, x);
        });
  }
  return out;
}

BirthKernel discretize_kernel(KernelDensityFn kernel, Index cell_count,
                              std::pair<double, double> support) {
  if (!kernel) throw ConfigError("kernel discretization needs a kernel");
  if (cell_count < 1)
    throw ConfigError("kernel discretization needs at least one cell");
  const double k1 = support.first, k2 = support.second;
  if (!(k1 <= k2) || !std::isfinite(k1) || !std::isfinite(k2))
    throw ConfigError("kernel support interval is invalid");
  if (k1 == k2 && cell_count > 1)
    throw ConfigError("degenerate kernel support admits only one cell");

  const double dx = (k2 - k1) / static_cast<double>(cell_count);

  BirthKernel out;
  out.branches.reserve(static_cast<std::size_t>(cell_count));
  for (Index p = 0; p < cell_count; ++p) {
    const double center = k1 + (static_cast<double>(p) + 0.5) * dx;
    KernelBranch branch;
    branch.constant_target = k1 == k2 ? k1 : center;
    branch.target = [c = *branch.constant_target](const ArrayXd& y) {
      return ArrayXd::Constant(y.size(), c).eval();
    };
    branch.rate = [kernel, p, cell_count, k1, k2, dx](
                      double t, const AtomicMeasure& mu, const ArrayXd& y) {
      ArrayXd r(y.size());
      for (Index i = 0; i < y.size(); ++i) {
        const ReferenceMeasure nu = kernel(t, mu, y[i]);
        const double total = nu.total_mass();
        if (total == 0.0) {
          r[i] = 0.0;
          continue;
        }
        const double outside =
            nu.cdf_value_left(k1) + (total - nu.cdf_value(k2));
        if (outside > 1e-12 * total)
          throw ConfigError(
              "birth kernel mass outside its declared support interval");
        // Cell masses from left-limit CDF differences; the first and last
        // cells absorb the within-tolerance mass beyond the edges.
        const double lo =
            p == 0 ? 0.0 : nu.cdf_value_left(k1 + static_cast<double>(p) * dx);
        const double hi =
            p + 1 == cell_count
                ? total
                : nu.cdf_value_left(k1 + static_cast<double>(p + 1) * dx);
        r[i] = hi - lo;
      }
      return r;
    };
    out.branches.push_back(std::move(branch));
  }
  return out;
}

}  // namespace popsim
