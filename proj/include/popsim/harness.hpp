#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "popsim/builtin_models.hpp"
#include "popsim/solver.hpp"

namespace popsim {

// Error of the trace's snapshot at `time` against a reference: the
// Wasserstein distance of the normalized profiles scaled by the smaller
// total, plus twice the mass imbalance.  The doubled imbalance term charges
// a mass defect both for its weight and for the profile shift it induces;
// this is the measure the convergence tables are stated in.  Raises
// ConfigError when no snapshot was kept at that time.
double compute_error(const SimulationTrace& trace, double time,
                     const ReferenceMeasure& reference);
double compute_error(const SimulationTrace& trace, double time,
                     const AtomicMeasure& reference);

enum class ReferenceKind {
  exact,        // compare against the model's exact_solution
  finest_level  // compare against the run one level finer than the finest row
};

/** A sequence of refinement levels: level l runs with step dt0 / 2^l and
 *  atom budget atoms0 * 2^l (initial and reconstruction budgets alike).
 *  reconstruction_period is in time units and rounds to whole steps; when
 *  absent, the only reconstruction is the initial one.
 *  reconstruction_interval pins every reconstruction grid to a fixed
 *  interval instead of the running support hull — the right choice when the
 *  model's domain is fixed and the tables should not wobble with the hull.
 */
struct ConvergenceConfig {
  Index levels = 11;
  double dt0 = 0.1;
  Index atoms0 = 10;
  double horizon = 10.0;
  std::optional<double> reconstruction_period;
  ReconstructionKind kind = ReconstructionKind::fixed_location;
  std::optional<std::pair<double, double>> reconstruction_interval;
  ReferenceKind reference = ReferenceKind::exact;
  TransportIntegrator transport = TransportIntegrator::rk4;
  MassUpdate mass_update = MassUpdate::explicit_euler;
};

struct ErrorRow {
  double dt = 0.0;
  double dx = 0.0;
  Index atoms = 0;
  double error = 0.0;
  std::optional<double> q;  // log2 of consecutive stored error ratio
};

struct ErrorReport {
  std::string model_name;
  double horizon = 0.0;
  std::string reconstruction;
  std::vector<ErrorRow> rows;
};

// Run every level and assemble the error table.  The environment variable
// POPSIM_THREADS (default 1) sets how many levels run concurrently.  With a
// finest-level reference the order estimates only start at the fourth row;
// the coarsest ratios are too contaminated by the shared reference.
ErrorReport convergence_study(const BuiltinModel& model,
                              const ConvergenceConfig& cfg);

struct LongtimeResult {
  SimulationTrace trace;
  std::vector<double> checkpoint_mass;
  // Distance between consecutive checkpoints (normalized first when asked);
  // entry i compares snapshot i with snapshot i+1.
  std::vector<double> rho_consecutive;
};

LongtimeResult longtime_run(const ModelSpec& model, const AtomicMeasure& initial,
                            const SolverConfig& config,
                            bool normalize_checkpoints);

struct MassCluster {
  double lo = 0.0, hi = 0.0;
  double mass = 0.0;
  double barycenter = 0.0;
};

// Group the surviving atoms — those holding more than min_fraction of the
// total mass each — into runs whose consecutive gaps stay within `gap`.
// Atoms at or below the threshold count as extinct: they neither join a
// cluster, bridge a gap, nor contribute to cluster mass, so decayed
// stragglers cannot chain separated concentrations together.
std::vector<MassCluster> mass_clusters(const AtomicMeasure& mu, double gap,
                                       double min_fraction);

struct SweepCase {
  ModelSpec model;
  AtomicMeasure initial;
};

struct SweepPoint {
  double parameter = 0.0;
  AtomicMeasure final_measure;
  std::string error;  // empty on success
};

// Independent runs over parameter values; a failing point records its error
// and the sweep continues.
std::vector<SweepPoint> parameter_sweep(
    const std::function<SweepCase(double)>& make_case,
    const SolverConfig& config, const std::vector<double>& values);

}  // namespace popsim
