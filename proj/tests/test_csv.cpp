#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "popsim/csv.hpp"
#include "popsim/errors.hpp"
#include "popsim/measure.hpp"

using namespace popsim;

namespace {

ArrayXd arr(std::initializer_list<double> xs) {
  ArrayXd a(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) a[i++] = x;
  return a;
}

}  // namespace

TEST_CASE("atom lists survive a write/read round trip bitwise") {
  std::mt19937 rng(5150);
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  std::uniform_real_distribution<double> mass(1e-12, 3.0);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 1 + static_cast<Index>(rng() % 30);
    ArrayXd x(n), m(n);
    for (Index i = 0; i < n; ++i) {
      x[i] = pos(rng);
      m[i] = mass(rng);
    }
    const AtomicMeasure mu{std::move(x), std::move(m)};
    std::stringstream ss;
    write_atoms_csv(ss, mu);
    const MeasureVariant v = read_measure_csv(ss);
    REQUIRE(std::holds_alternative<AtomicMeasure>(v));
    const AtomicMeasure& back = std::get<AtomicMeasure>(v);
    REQUIRE(back.size() == mu.size());
    for (Index i = 0; i < mu.size(); ++i) {
      CHECK(back.positions()[i] == mu.positions()[i]);
      CHECK(back.masses()[i] == mu.masses()[i]);
    }
  }
}

TEST_CASE("distribution functions round trip with jumps intact") {
  // Ramp to 0.2, jump to 0.7 at x = 1, ramp to 1.0: the jump needs two rows.
  const ReferenceMeasure nu(arr({0.0, 1.0, 1.0, 2.0}),
                            arr({0.0, 0.2, 0.7, 1.0}));
  std::stringstream ss;
  write_cdf_csv(ss, nu.cdf());
  const std::string text = ss.str();
  CHECK(text.rfind("x,F\n", 0) == 0);
  // The duplicated breakpoint appears on two consecutive rows.
  CHECK(text.find("\n1,0.2") != std::string::npos);
  CHECK(text.find("\n1,0.69999999999999996") != std::string::npos);
  std::stringstream in(text);
  const MeasureVariant v = read_measure_csv(in);
  REQUIRE(std::holds_alternative<ReferenceMeasure>(v));
  const ReferenceMeasure& back = std::get<ReferenceMeasure>(v);
  CHECK(back.cdf_value(0.5) == nu.cdf_value(0.5));
  CHECK(back.cdf_value_left(1.0) == 0.2);
  CHECK(back.cdf_value(1.0) == 0.7);
  CHECK(back.cdf().total() == 1.0);
}

TEST_CASE("csv reader rejects malformed input") {
  {
    std::stringstream ss("");
    CHECK_THROWS_WITH_AS(read_measure_csv(ss), "measure CSV is empty",
                         ConfigError);
  }
  {
    std::stringstream ss("a,b\n1,2\n");
    CHECK_THROWS_WITH_AS(read_measure_csv(ss),
                         "unrecognized measure CSV header: expected 'x,m' or "
                         "'x,F'",
                         ConfigError);
  }
  {
    std::stringstream ss("x,m\n1,banana\n");
    CHECK_THROWS_AS(read_measure_csv(ss), ConfigError);
  }
  {
    std::stringstream ss("x,m\n1\n");
    CHECK_THROWS_AS(read_measure_csv(ss), ConfigError);
  }
  {
    // Unsorted atom positions are a data error the measure type reports.
    std::stringstream ss("x,F\n1,0.5\n0,1\n");
    CHECK_THROWS_AS(read_measure_csv(ss), ConfigError);
  }
}

TEST_CASE("parse errors carry the offending line number") {
  std::stringstream ss("x,m\n0,1\nbad,row\n");
  try {
    read_measure_csv(ss);
    FAIL("expected a parse failure");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("diagnostics table uses the pinned header") {
  std::vector<StepDiagnostics> steps(1);
  steps[0].step = 1;
  steps[0].time = 0.5;
  steps[0].atoms_pre = 3;
  steps[0].atoms_post = 4;
  steps[0].atoms_final = 4;
  steps[0].mass = 1.25;
  steps[0].max_dt_c = 0.01;
  std::stringstream ss;
  write_diagnostics_csv(ss, steps);
  const std::string text = ss.str();
  CHECK(text.rfind("step,time,atoms_pre,atoms_post,mass,max_dt_c\n", 0) == 0);
  CHECK(text.find("1,0.5,3,4,1.25,0.01") != std::string::npos);
}

TEST_CASE("error report table leaves missing order estimates blank") {
  ErrorReport report;
  report.rows.resize(2);
  report.rows[0] = {0.1, 0.05, 10, 1e-2, std::nullopt};
  report.rows[1] = {0.05, 0.025, 20, 5e-3, 1.0};
  std::stringstream ss;
  write_error_report_csv(ss, report);
  const std::string text = ss.str();
  CHECK(text.rfind("dt,dx,atoms,err,q\n", 0) == 0);
  CHECK(text.find("0.10000000000000001,0.050000000000000003,10,0.01,\n") !=
        std::string::npos);
  CHECK(text.find("0.050000000000000003,0.025000000000000001,20,"
                  "0.0050000000000000001,1\n") != std::string::npos);
}

TEST_CASE("sweep table lists parameter and atoms, skipping failures") {
  std::vector<SweepPoint> points(2);
  points[0].parameter = 0.5;
  points[0].final_measure = AtomicMeasure::dirac(1.0, 2.0);
  points[1].parameter = 1.5;
  points[1].error = "boom";
  std::stringstream ss;
  write_sweep_csv(ss, points);
  const std::string text = ss.str();
  CHECK(text.rfind("param,x,m\n", 0) == 0);
  CHECK(text.find("0.5,1,2\n") != std::string::npos);
  CHECK(text.find("1.5") == std::string::npos);
}

TEST_CASE("value formatting is shortest-exact") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.5) == "-2.5");
  const double v = 1.0 / 3.0;
  CHECK(std::stod(format_double(v)) == v);
}
