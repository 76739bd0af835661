#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "popsim/model.hpp"

namespace popsim {

/** A ready-to-run model: the dynamics plus whatever initial data and ground
 *  truth it comes with.  initial_density is set for models whose starting
 *  population is a density (discretize it with a reconstruction operator);
 *  initial_atoms builds the model's own equispaced atom grid of a requested
 *  size.  exact_solution, when present, gives the measure the population
 *  converges to (or equals) at time t.
 */
struct BuiltinModel {
  ModelSpec spec;
  std::optional<ReferenceMeasure> initial_density;
  std::function<AtomicMeasure(Index)> initial_atoms;
  std::function<ReferenceMeasure(double)> exact_solution;
  std::optional<std::pair<double, double>> invariant_interval;
};

struct BuiltinParams {
  std::optional<double> A;        // selection strength, in [0, 3]
  std::optional<double> epsilon;  // mutation fraction, in (0, 1)
};

// Age-structured renewal model on [0, 1] with a uniform stationary state.
BuiltinModel mckendrick_model();

// Pure selection on the line: no transport, no births, competition-driven
// mass exchange between trait values.  A in [0, 3].
BuiltinModel selection_growth_model(double A);

// Size-structured growth-fragmentation: cells grow toward size 1 and split
// into two equal halves.
BuiltinModel equal_fission_model();

// Selection with mutation on [0, 1]: a fraction epsilon of births lands on a
// 10-point offset stencil around the parent trait.  epsilon in (0, 1).
BuiltinModel selection_mutation_model(double epsilon);

// Dispatch by name ("mckendrick", "selection_growth", "equal_fission",
// "selection_mutation"); missing/out-of-range parameters raise ConfigError.
BuiltinModel builtin_model(const std::string& name,
                           const BuiltinParams& params = {});

// Scalar pieces of the builtin models, exposed for validation.
namespace model_detail {
double equal_fission_phi(double y);           // fragmentation size profile
double equal_fission_phi_integral(double y);  // its integral from 1/4
double equal_fission_beta(double y);          // resulting division rate
double equal_fission_initial_cdf(double y);   // initial density CDF on [1/8, 1]
double mckendrick_birth_rate(double y);
}  // namespace model_detail

}  // namespace popsim
