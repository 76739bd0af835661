#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "popsim/measure.hpp"

namespace popsim {

// Batched coefficient evaluator: the coefficient's value at every query
// position, given the time and the current population measure.  Evaluators
// must accept arbitrary finite positions (the scheme also probes freshly
// transported states).
using CoefficientFn =
    std::function<ArrayXd(double t, const AtomicMeasure& mu, const ArrayXd& x)>;

/** One branch of a structured birth kernel: every parent at state y produces
 *  offspring at target(y) with rate `rate`.  When the target does not depend
 *  on the parent, constant_target carries that value so the stepper can place
 *  a single shared atom instead of one per parent.
 */
struct KernelBranch {
  std::function<ArrayXd(const ArrayXd&)> target;
  CoefficientFn rate;
  std::optional<double> constant_target;
};

struct BirthKernel {
  std::vector<KernelBranch> branches;
  bool empty() const { return branches.empty(); }
};

/** State space of the model: an interval, possibly unbounded.  Transported
 *  states are clamped to it; offspring outside it follow the solver's
 *  offspring policy.
 */
struct Domain {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  static Domain whole_line() { return {}; }
  static Domain half_line(double lo) {
    return {lo, std::numeric_limits<double>::infinity()};
  }
  static Domain interval(double lo, double hi) { return {lo, hi}; }

  bool contains(double x) const { return x >= lower && x <= upper; }
  double clamp(double x) const { return std::min(std::max(x, lower), upper); }
};

/** A structured population model with transport speed b, loss rate c and a
 *  birth kernel.  A null b means the states do not move; an empty kernel
 *  means no births.  hoelder_alpha records the spatial regularity the
 *  coefficients are trusted to have (it scales no computation, but callers
 *  may report it).
 */
struct ModelSpec {
  std::string name;
  CoefficientFn b;
  CoefficientFn c;
  BirthKernel kernel;
  Domain domain;
  double hoelder_alpha = 1.0;
};

// Which coefficients to bind to a (time, measure) snapshot: the transport
// speed is frozen before states move, the reaction rates after.
enum class FreezeSelection { transport_speed, reaction_rates };

/** Coefficients bound to one (t, mu) snapshot.  The closures own a copy of
 *  the measure, so they keep answering against the snapshot even after the
 *  caller's population changes.  Members not covered by the selection are
 *  left null/empty.
 */
struct FrozenCoefficients {
  std::function<ArrayXd(const ArrayXd&)> b;
  std::function<ArrayXd(const ArrayXd&)> c;
  std::vector<std::function<ArrayXd(const ArrayXd&)>> branch_rates;
};

FrozenCoefficients freeze_coefficients(const ModelSpec& model, double t,
                                       const AtomicMeasure& mu_ref,
                                       FreezeSelection which);

// A birth kernel given as a full offspring distribution per parent state.
using KernelDensityFn = std::function<ReferenceMeasure(
    double t, const AtomicMeasure& mu, double y)>;

// Collapse an offspring-distribution kernel onto `cell_count` equal cells of
// `support`: branch p sends every parent to the center of cell p with rate
// equal to the kernel mass on that cell (boundary cells also absorb rounding
// mass just outside).  Kernel mass beyond a 1e-12 relative tolerance outside
// the support raises ConfigError.  Each branch re-evaluates the kernel per
// parent, so this is meant for model setup and validation, not inner loops.
BirthKernel discretize_kernel(KernelDensityFn kernel, Index cell_count,
                              std::pair<double, double> support);

}  // namespace popsim
