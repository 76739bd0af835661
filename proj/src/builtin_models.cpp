#include "popsim/builtin_models.hpp"

#include <array>
#include <cmath>

#include "popsim/errors.hpp"

namespace popsim {

namespace model_detail {

double mckendrick_birth_rate(double y) {
  return 2.4 * std::max(0.0, y * y - y * y * y);
}

// Fragmentation size profile: a cubic ramp glued C^1 to a quartic tail,
// normalized so its integral over [1/4, 1] is exactly 1.
double equal_fission_phi(double y) {
  if (y < 0.25 || y > 1.0) return 0.0;
  if (y <= 0.625) {
    const double u = (8.0 * y - 2.0) / 3.0;
    return (160.0 / 117.0) * u * u * u;
  }
  const double v = y - 0.625;
  return (32.0 / 117.0) *
         (5.0 + 40.0 * v + (320.0 / 3.0) * v * v -
          (10240.0 / 9.0) * v * v * v + (40960.0 / 27.0) * v * v * v * v);
}

double equal_fission_phi_integral(double y) {
  if (y <= 0.25) return 0.0;
  if (y >= 1.0) return 1.0;
  if (y <= 0.625) {
    const double u = (8.0 * y - 2.0) / 3.0;
    return (5.0 / 39.0) * u * u * u * u;
  }
  const double v = y - 0.625;
  return 5.0 / 39.0 +
         (32.0 / 117.0) *
             (5.0 * v + 20.0 * v * v + (320.0 / 9.0) * v * v * v -
              (2560.0 / 9.0) * v * v * v * v +
              (8192.0 / 27.0) * v * v * v * v * v);
}

double equal_fission_beta(double y) {
  if (y < 0.25 || y > 1.0) return 0.0;
  const double remaining = 1.0 - equal_fission_phi_integral(y);
  const double growth = 0.1 * (1.0 - y);
  // Near y = 1 both factors vanish; the ratio tends to the finite division
  // rate 0.1, which caps the formula once the denominator degenerates.
  if (remaining < 1e-12) return 0.1;
  return growth * equal_fission_phi(y) / remaining;
}

double equal_fission_initial_cdf(double y) {
  if (y <= 0.125) return 0.0;
  const double w = std::min(y, 1.0) - 0.125;
  return (7.0 / 32.0) * w * w * w * w - 0.2 * w * w * w * w * w;
}

}  // namespace model_detail

BuiltinModel mckendrick_model() {
  BuiltinModel m;
  m.spec.name = "mckendrick";
  m.spec.domain = Domain::interval(0.0, 1.0);
  m.spec.b = [](double, const AtomicMeasure&, const ArrayXd& x) {
    return (0.2 * (1.0 - x)).eval();
  };
  m.spec.c = [](double, const AtomicMeasure&, const ArrayXd& x) {
    return ArrayXd::Constant(x.size(), 0.2).eval();
  };
  KernelBranch birth;
  birth.constant_target = 0.0;
  birth.target = [](const ArrayXd& y) {
    return ArrayXd::Zero(y.size()).eval();
  };
  birth.rate = [](double, const AtomicMeasure&, const ArrayXd& y) {
    return (2.4 * (y.square() - y.cube()).max(0.0)).eval();
  };
  m.spec.kernel.branches.push_back(std::move(birth));
  m.initial_density = ReferenceMeasure::uniform(0.0, 1.0, 1.0);
  m.exact_solution = [](double) { return ReferenceMeasure::uniform(0.0, 1.0, 1.0); };
  m.invariant_interval = {0.0, 1.0};
  return m;
}

BuiltinModel selection_growth_model(double A) {
  if (!(A >= 0.0 && A <= 3.0))
    throw ConfigError("selection strength A must lie in [0, 3]");
  BuiltinModel m;
  m.spec.name = "selection_growth";
  m.spec.domain = Domain::whole_line();
  // No transport: trait values are fixed, only masses evolve.
  m.spec.c = [A](double, const AtomicMeasure& mu, const ArrayXd& x) {
    const ArrayXd& y = mu.positions();
    const ArrayXd& w = mu.masses();
    ArrayXd out(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      const double competition = (w / (1.0 + (x[i] - y).square())).sum();
      out[i] = competition - (A - x[i] * x[i]);
    }
    return out;
  };
  m.initial_atoms = [](Index count) {
    if (count < 1) throw ConfigError("initial atom count must be positive");
    const double dx = 4.0 / static_cast<double>(count);
    ArrayXd pos(count), mass(count);
    for (Index i = 0; i < count; ++i) {
      pos[i] = -2.0 + (static_cast<double>(i) + 0.5) * dx;
      mass[i] = 1.0 / static_cast<double>(count);
    }
    return AtomicMeasure::from_sorted_unchecked(std::move(pos), std::move(mass));
  };
  return m;
}

BuiltinModel equal_fission_model() {
  using namespace model_detail;
  BuiltinModel m;
  m.spec.name = "equal_fission";
  m.spec.domain = Domain::interval(0.0, 1.0);
  m.spec.b = [](double, const AtomicMeasure&, const ArrayXd& x) {
    return (0.1 * (1.0 - x)).eval();
  };
  m.spec.c = [](double, const AtomicMeasure&, const ArrayXd& x) {
    ArrayXd out(x.size());
    for (Index i = 0; i < x.size(); ++i) out[i] = equal_fission_beta(x[i]);
    return out;
  };
  KernelBranch split;
  split.target = [](const ArrayXd& y) { return (0.5 * y).eval(); };
  split.rate = [](double, const AtomicMeasure&, const ArrayXd& y) {
    ArrayXd out(y.size());
    for (Index i = 0; i < y.size(); ++i) out[i] = 2.0 * equal_fission_beta(y[i]);
    return out;
  };
  m.spec.kernel.branches.push_back(std::move(split));
  m.initial_density = ReferenceMeasure::from_cdf(
      [](double y) { return equal_fission_initial_cdf(y); }, 0.125, 1.0, 2048);
  m.invariant_interval = {0.125, 1.0};
  return m;
}

BuiltinModel selection_mutation_model(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ConfigError("mutation fraction epsilon must lie in (0, 1)");
  constexpr int r = 10;
  constexpr double a = 0.4;
  BuiltinModel m;
  m.spec.name = "selection_mutation";
  m.spec.domain = Domain::interval(0.0, 1.0);
  m.spec.c = [epsilon](double, const AtomicMeasure& mu, const ArrayXd& x) {
    const double saturation = 1.0 - std::exp(-mu.total_mass());
    return (saturation - (1.0 - epsilon) * x * (1.0 - x)).eval();
  };

  // Mutation stencil: offsets d_p with mollifier weights, renormalized over
  // the offsets that keep the child inside [0, 1].
  std::array<double, r> offsets{}, weights{};
  for (int p = 0; p < r; ++p) {
    const double d = a * static_cast<double>(2 * (p + 1) - 1 - r) / r;
    offsets[static_cast<std::size_t>(p)] = d;
    weights[static_cast<std::size_t>(p)] = std::exp(-a * a / (a * a - d * d));
  }
  for (int p = 0; p < r; ++p) {
    const double d = offsets[static_cast<std::size_t>(p)];
    const double w = weights[static_cast<std::size_t>(p)];
    KernelBranch branch;
    branch.target = [d](const ArrayXd& y) { return (y + d).eval(); };
    branch.rate = [epsilon, d, w, offsets, weights](
                      double, const AtomicMeasure&, const ArrayXd& y) {
      ArrayXd den = ArrayXd::Zero(y.size());
      for (int q = 0; q < r; ++q) {
        const double dq = offsets[static_cast<std::size_t>(q)];
        const double wq = weights[static_cast<std::size_t>(q)];
        den += wq * ((y + dq >= 0.0).cast<double>() *
                     (y + dq <= 1.0).cast<double>());
      }
      const ArrayXd in_range =
          (y + d >= 0.0).cast<double>() * (y + d <= 1.0).cast<double>();
      const ArrayXd births = epsilon * (y * (1.0 - y)).max(0.0) * w * in_range;
      return (den > 0.0).select(births / den.max(1e-300), 0.0).eval();
    };
    m.spec.kernel.branches.push_back(std::move(branch));
  }

  m.initial_atoms = [](Index count) {
    if (count < 1) throw ConfigError("initial atom count must be positive");
    ArrayXd pos(count), mass(count);
    for (Index i = 0; i < count; ++i) {
      pos[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(count);
      mass[i] = 1.0 / static_cast<double>(count);
    }
    return AtomicMeasure::from_sorted_unchecked(std::move(pos), std::move(mass));
  };
  return m;
}

BuiltinModel builtin_model(const std::string& name,
                           const BuiltinParams& params) {
  if (name == "mckendrick") return mckendrick_model();
  if (name == "selection_growth") {
    if (!params.A)
      throw ConfigError("model selection_growth requires parameter A");
    return selection_growth_model(*params.A);
  }
  if (name == "equal_fission") return equal_fission_model();
  if (name == "selection_mutation") {
    if (!params.epsilon)
      throw ConfigError("model selection_mutation requires parameter epsilon");
    return selection_mutation_model(*params.epsilon);
  }
  throw ConfigError("unknown model: " + name);
}

}  // namespace popsim
