#pragma once

#include <optional>
#include <string>
#include <vector>

#include "popsim/measure.hpp"
#include "popsim/model.hpp"
#include "popsim/reconstruction.hpp"

namespace popsim {

enum class TransportIntegrator { rk4, euler };

enum class MassUpdate {
  explicit_euler,  // m <- m (1 - dt c) + dt * inflow
  boundary_ode     // exact exponential decay + closed-form boundary inflow
};

// What to do with offspring whose state leaves the domain.
enum class OffspringPolicy { drop, clamp };

// Reaction to dt * c exceeding 1 somewhere (the explicit Euler factor would
// turn negative): refuse to continue, or clamp the factor at 0 and count it.
enum class StabilityGuard { strict, clamp };

struct SolverConfig {
  double horizon = 1.0;  // final time T
  Index steps = 1;       // N; the step is horizon / steps
  TransportIntegrator transport = TransportIntegrator::rk4;
  MassUpdate mass_update = MassUpdate::explicit_euler;

  // Applied after the mass update on every step whose 1-based index is a
  // multiple of reconstruction_every.
  std::optional<ReconstructionSpec> reconstruction;
  Index reconstruction_every = 1;

  // Applied to the initial data before stepping; required when the initial
  // data is a density rather than atoms.
  std::optional<ReconstructionSpec> initial_reconstruction;

  // Times at which to keep a copy of the population; rounded to the step
  // grid (with a warning when the rounding is not exact).
  std::vector<double> snapshot_times;

  double position_merge_tol = 1e-12;
  OffspringPolicy offspring_policy = OffspringPolicy::drop;
  StabilityGuard guard = StabilityGuard::strict;
};

struct StepDiagnostics {
  Index step = 0;      // 1-based
  double time = 0.0;   // at the end of the step
  Index atoms_pre = 0;     // after transport, before birth states attach
  Index atoms_post = 0;    // with birth states, before reconstruction
  Index atoms_final = 0;   // carried into the next step
  double mass = 0.0;
  double max_dt_c = 0.0;   // max |dt * c| over the extended states
  Index dropped_offspring = 0;
  Index clamped_masses = 0;
};

struct Snapshot {
  double time = 0.0;
  AtomicMeasure measure;
};

struct SimulationTrace {
  AtomicMeasure final_measure;
  std::vector<Snapshot> snapshots;
  std::vector<StepDiagnostics> steps;
  std::vector<std::string> warnings;
};

// One explicit integrator step of the frozen flow dx/dt = b(x), every atom
// at once.
ArrayXd transport_positions(const ArrayXd& x,
                            const std::function<ArrayXd(const ArrayXd&)>& b,
                            double dt, TransportIntegrator kind);

/** Birth states attached to a transported population.  positions holds the
 *  parents' states and every distinct offspring state, sorted and
 *  deduplicated within tol; parent_slot maps parent j to its place there,
 *  and branch_child[p][j] to where branch p's offspring of parent j landed
 *  (-1 when it was dropped).  With full_child_map = false, a constant-target
 *  branch stores a single entry standing for every parent — cheaper when the
 *  caller only reads that one slot.
 */
struct SpawnResult {
  ArrayXd positions;
  std::vector<Index> parent_slot;
  std::vector<std::vector<Index>> branch_child;
  Index dropped = 0;
};

SpawnResult spawn_offspring_states(const ArrayXd& transported,
                                   const BirthKernel& kernel,
                                   const Domain& domain, OffspringPolicy policy,
                                   double tol, bool full_child_map = true);

SimulationTrace simulate(const ModelSpec& model, const AtomicMeasure& initial,
                         const SolverConfig& config);
SimulationTrace simulate(const ModelSpec& model, const ReferenceMeasure& initial,
                         const SolverConfig& config);

}  // namespace popsim
