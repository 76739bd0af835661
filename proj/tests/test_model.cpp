#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "popsim/errors.hpp"
#include "popsim/measure.hpp"
#include "popsim/metrics.hpp"
#include "popsim/model.hpp"

using namespace popsim;

namespace {

ArrayXd arr(std::initializer_list<double> xs) {
  ArrayXd a(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) a[i++] = x;
  return a;
}

// A model whose every coefficient depends on the population: b and c scale
// with the total mass, the birth rate with the atom count.
ModelSpec mass_sensitive_model() {
  ModelSpec m;
  m.name = "mass_sensitive";
  m.b = [](double, const AtomicMeasure& mu, const ArrayXd& x) -> ArrayXd {
    return ArrayXd::Constant(x.size(), mu.total_mass());
  };
  m.c = [](double t, const AtomicMeasure& mu, const ArrayXd& x) -> ArrayXd {
    return ArrayXd::Constant(x.size(), mu.total_mass() + t);
  };
  KernelBranch branch;
  branch.constant_target = 0.0;
  branch.target = [](const ArrayXd& y) -> ArrayXd {
    return ArrayXd::Zero(y.size());
  };
  branch.rate = [](double, const AtomicMeasure& mu,
                   const ArrayXd& y) -> ArrayXd {
    return ArrayXd::Constant(y.size(), static_cast<double>(mu.size()));
  };
  m.kernel.branches.push_back(std::move(branch));
  return m;
}

}  // namespace

TEST_CASE("frozen coefficients keep answering against the snapshot") {
  const ModelSpec model = mass_sensitive_model();
  const AtomicMeasure snapshot(arr({0.0, 1.0}), arr({1.0, 2.0}));  // mass 3
  const FrozenCoefficients fc = freeze_coefficients(
      model, 0.5, snapshot, FreezeSelection::reaction_rates);
  REQUIRE(fc.c);
  REQUIRE(fc.branch_rates.size() == 1);
  CHECK(!fc.b);  // not part of the reaction-rate selection
  const ArrayXd probe = arr({0.25});
  CHECK(fc.c(probe)[0] == doctest::Approx(3.5).epsilon(1e-15));
  CHECK(fc.branch_rates[0](probe)[0] == 2.0);
  // The live model sees a different population; the frozen view must not.
  const ArrayXd live = model.c(0.5, AtomicMeasure::dirac(0.0, 10.0), probe);
  CHECK(live[0] == doctest::Approx(10.5).epsilon(1e-15));
  CHECK(fc.c(probe)[0] == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("transport freeze binds only the speed") {
  const ModelSpec model = mass_sensitive_model();
  const AtomicMeasure snapshot = AtomicMeasure::dirac(0.0, 4.0);
  const FrozenCoefficients fc = freeze_coefficients(
      model, 0.0, snapshot, FreezeSelection::transport_speed);
  REQUIRE(fc.b);
  CHECK(!fc.c);
  CHECK(fc.branch_rates.empty());
  CHECK(fc.b(arr({7.0}))[0] == 4.0);
}

TEST_CASE("domain helpers clamp and test membership") {
  const Domain d = Domain::interval(0.0, 1.0);
  CHECK(d.contains(0.0));
  CHECK(d.contains(1.0));
  CHECK(!d.contains(1.0 + 1e-12));
  CHECK(d.clamp(-3.0) == 0.0);
  CHECK(d.clamp(0.4) == 0.4);
  CHECK(d.clamp(2.0) == 1.0);
  const Domain h = Domain::half_line(0.0);
  CHECK(h.contains(1e300));
  CHECK(h.clamp(-1.0) == 0.0);
}

TEST_CASE("kernel discretization spreads a flat kernel evenly") {
  // Offspring uniformly distributed on [0, 1] with total rate 2.
  const KernelDensityFn kernel = [](double, const AtomicMeasure&,
                                    double) -> ReferenceMeasure {
    return ReferenceMeasure::uniform(0.0, 1.0, 2.0);
  };
  const Index r = 5;
  const BirthKernel bk = discretize_kernel(kernel, r, {0.0, 1.0});
  REQUIRE(bk.branches.size() == static_cast<std::size_t>(r));
  const AtomicMeasure mu = AtomicMeasure::dirac(0.3, 1.0);
  const ArrayXd y = arr({0.3});
  for (Index p = 0; p < r; ++p) {
    const auto& branch = bk.branches[static_cast<std::size_t>(p)];
    REQUIRE(branch.constant_target.has_value());
    CHECK(*branch.constant_target ==
          doctest::Approx((static_cast<double>(p) + 0.5) / 5.0).epsilon(1e-15));
    CHECK(branch.target(y)[0] == *branch.constant_target);
    CHECK(branch.rate(0.0, mu, y)[0] == doctest::Approx(0.4).epsilon(1e-13));
  }
}

TEST_CASE("kernel discretization conserves the kernel mass") {
  // A parent-dependent kernel: triangular-ish mass T(y) = 1 + y on [0, 2].
  const KernelDensityFn kernel = [](double, const AtomicMeasure&,
                                    double y) -> ReferenceMeasure {
    return ReferenceMeasure::from_cdf(
        [y](double x) { return (1.0 + y) * x * x / 4.0; }, 0.0, 2.0, 64);
  };
  const BirthKernel bk = discretize_kernel(kernel, 7, {0.0, 2.0});
  const AtomicMeasure mu = AtomicMeasure::dirac(0.5, 1.0);
  const ArrayXd y = arr({0.0, 0.5, 1.3});
  ArrayXd sum = ArrayXd::Zero(y.size());
  for (const auto& branch : bk.branches) sum += branch.rate(0.0, mu, y);
  for (Index i = 0; i < y.size(); ++i)
    CHECK(sum[i] == doctest::Approx(1.0 + y[i]).epsilon(1e-13));
}

TEST_CASE("halving the cell width halves the discretization error bound") {
  const KernelDensityFn kernel = [](double, const AtomicMeasure&,
                                    double) -> ReferenceMeasure {
    return ReferenceMeasure::from_cdf(
        [](double x) { return x * x; }, 0.0, 1.0, 256);
  };
  const AtomicMeasure mu = AtomicMeasure::dirac(0.0, 1.0);
  const ArrayXd y = arr({0.0});
  const ReferenceMeasure exact = kernel(0.0, mu, 0.0);
  for (const Index r : {4, 8, 16, 32}) {
    const BirthKernel bk = discretize_kernel(kernel, r, {0.0, 1.0});
    ArrayXd pos(r), m(r);
    for (Index p = 0; p < r; ++p) {
      pos[p] = *bk.branches[static_cast<std::size_t>(p)].constant_target;
      m[p] = bk.branches[static_cast<std::size_t>(p)].rate(0.0, mu, y)[0];
    }
    const AtomicMeasure disc{std::move(pos), std::move(m)};
    const double err = w1(exact, disc, /*normalize=*/true);
    CHECK(err <= 1.0 / (2.0 * static_cast<double>(r)) + 1e-12);
  }
}

TEST_CASE("kernel mass outside the declared support is rejected") {
  const KernelDensityFn kernel = [](double, const AtomicMeasure&,
                                    double) -> ReferenceMeasure {
    return ReferenceMeasure::uniform(0.0, 2.0, 1.0);
  };
  const BirthKernel bk = discretize_kernel(kernel, 4, {0.0, 1.0});
  const AtomicMeasure mu = AtomicMeasure::dirac(0.0, 1.0);
  CHECK_THROWS_WITH_AS(
      bk.branches[0].rate(0.0, mu, arr({0.0})),
      "birth kernel mass outside its declared support interval", ConfigError);
}

TEST_CASE("boundary cells absorb roundoff-level outside mass") {
  // Roundoff slivers of mass just outside the support fold into edge cells.
  const KernelDensityFn kernel = [](double, const AtomicMeasure&,
                                    double) -> ReferenceMeasure {
    ArrayXd x(3), m(3);
    x << -1e-14, 0.25, 1.0 + 1e-14;
    m << 1e-13, 1.0, 1e-13;
    return ReferenceMeasure::from_atoms(AtomicMeasure{std::move(x), std::move(m)});
  };
  const BirthKernel bk = discretize_kernel(kernel, 2, {0.0, 1.0});
  const AtomicMeasure mu = AtomicMeasure::dirac(0.0, 1.0);
  const ArrayXd y = arr({0.0});
  const double lower = bk.branches[0].rate(0.0, mu, y)[0];
  const double upper = bk.branches[1].rate(0.0, mu, y)[0];
  CHECK(lower == doctest::Approx(1.0 + 1e-13).epsilon(1e-14));
  CHECK(upper == doctest::Approx(1e-13).epsilon(1e-3));
  CHECK(lower + upper == doctest::Approx(1.0 + 2e-13).epsilon(1e-14));
}

TEST_CASE("kernel discretization validates its configuration") {
  const KernelDensityFn kernel = [](double, const AtomicMeasure&,
                                    double) -> ReferenceMeasure {
    return ReferenceMeasure::uniform(0.0, 1.0, 1.0);
  };
  CHECK_THROWS_AS(discretize_kernel(nullptr, 4, {0.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(discretize_kernel(kernel, 0, {0.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(discretize_kernel(kernel, 4, {1.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(discretize_kernel(kernel, 2, {1.0, 1.0}), ConfigError);
  CHECK_NOTHROW(discretize_kernel(kernel, 1, {1.0, 1.0}));
}
