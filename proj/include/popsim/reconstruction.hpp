#pragma once

#include <optional>
#include <utility>

#include "popsim/measure.hpp"

namespace popsim {

enum class ReconstructionKind {
  fixed_location,   // equispaced cell centers, masses gathered per cell
  fixed_equal_mass  // equal-mass chunks placed at their barycenters
};

/** How to rebuild a measure on at most target_count atoms.  The working
 *  interval is the support hull of the input unless fixed_interval pins it;
 *  with a pinned interval, input mass outside it is a configuration error
 *  rather than something to clamp silently.
 */
struct ReconstructionSpec {
  ReconstructionKind kind = ReconstructionKind::fixed_location;
  Index target_count = 1;
  std::optional<std::pair<double, double>> fixed_interval;
};

struct ReconstructionResult {
  AtomicMeasure measure;    // at most target_count atoms, same total mass
  double error_bound = 0.0; // W1 bound between normalized input and output
  std::pair<double, double> interval_used{0.0, 0.0};
};

// The error_bound fields are |K|/(2*target_count) for fixed_location and
// |K|/target_count for fixed_equal_mass; multiply by the total mass for the
// bound on the unnormalized measures.
ReconstructionResult reconstruct(const AtomicMeasure& mu,
                                 const ReconstructionSpec& spec);
ReconstructionResult reconstruct(const ReferenceMeasure& mu,
                                 const ReconstructionSpec& spec);

}  // namespace popsim
