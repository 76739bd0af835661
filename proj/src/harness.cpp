#include "popsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "popsim/errors.hpp"
#include "popsim/metrics.hpp"

namespace popsim {

namespace {

const AtomicMeasure& snapshot_at(const SimulationTrace& trace, double time) {
  for (const Snapshot& s : trace.snapshots) {
    if (std::abs(s.time - time) <= 1e-9 * std::max(1.0, std::abs(time)))
      return s.measure;
  }
  std::ostringstream os;
  os << "no snapshot was kept at time " << time;
  throw ConfigError(os.str());
}

int thread_budget() {
  const char* env = std::getenv("POPSIM_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

// Table error: min(M1, M2) * W1(normalized) + 2 |M1 - M2|.  Compared with
// rho, the imbalance is charged twice — once for the missing weight itself
// and once for the profile shift it induces — which is the accounting the
// convergence tables use.  Zero-mass arguments degrade to the pure charge.
template <class M1, class M2>
double table_error(const M1& a, const M2& b) {
  const double ma = a.total_mass(), mb = b.total_mass();
  const double gap = ma > mb ? ma - mb : mb - ma;
  if (ma == 0.0 || mb == 0.0) return 2.0 * gap;
  return std::min(ma, mb) * w1(a, b, /*normalize=*/true) + 2.0 * gap;
}

}  // namespace

double compute_error(const SimulationTrace& trace, double time,
                     const ReferenceMeasure& reference) {
  return table_error(snapshot_at(trace, time), reference);
}

double compute_error(const SimulationTrace& trace, double time,
                     const AtomicMeasure& reference) {
  return table_error(snapshot_at(trace, time), reference);
}

ErrorReport convergence_study(const BuiltinModel& model,
                              const ConvergenceConfig& cfg) {
  if (cfg.levels < 1) throw ConfigError("convergence study needs a level");
  if (!(cfg.dt0 > 0.0)) throw ConfigError("coarsest step must be positive");
  if (cfg.atoms0 < 1) throw ConfigError("coarsest atom budget must be positive");
  if (cfg.reference == ReferenceKind::exact && !model.exact_solution)
    throw ConfigError(
        "model has no exact solution; use the finest-level reference");

  // With a finest-level reference, one extra (hidden) level provides the
  // comparison measure.
  const Index runs =
      cfg.reference == ReferenceKind::exact ? cfg.levels : cfg.levels + 1;

  std::vector<AtomicMeasure> finals(static_cast<std::size_t>(runs));
  std::vector<double> dts(static_cast<std::size_t>(runs));
  std::vector<Index> budgets(static_cast<std::size_t>(runs));

  auto run_level = [&](Index l) {
    const double dt = cfg.dt0 / std::pow(2.0, static_cast<double>(l));
    const Index atoms = cfg.atoms0 * (Index{1} << l);
    const auto steps = static_cast<Index>(std::llround(cfg.horizon / dt));
    SolverConfig sc;
    sc.horizon = cfg.horizon;
    sc.steps = std::max<Index>(steps, 1);
    sc.transport = cfg.transport;
    sc.mass_update = cfg.mass_update;
    if (cfg.reconstruction_period) {
      ReconstructionSpec spec;
      spec.kind = cfg.kind;
      spec.target_count = atoms;
      spec.fixed_interval = cfg.reconstruction_interval;
      sc.reconstruction = spec;
      const double per_steps = *cfg.reconstruction_period / (cfg.horizon / static_cast<double>(sc.steps));
      sc.reconstruction_every = std::max<Index>(static_cast<Index>(std::llround(per_steps)), 1);
    }
    SimulationTrace trace;
    if (model.initial_density) {
      ReconstructionSpec init;
      init.kind = cfg.kind;
      init.target_count = atoms;
      init.fixed_interval = cfg.reconstruction_interval;
      sc.initial_reconstruction = init;
      trace = simulate(model.spec, *model.initial_density, sc);
    } else if (model.initial_atoms) {
      trace = simulate(model.spec, model.initial_atoms(atoms), sc);
    } else {
      throw ConfigError("model provides no initial data");
    }
    finals[static_cast<std::size_t>(l)] = std::move(trace.final_measure);
    dts[static_cast<std::size_t>(l)] = cfg.horizon / static_cast<double>(sc.steps);
    budgets[static_cast<std::size_t>(l)] = atoms;
  };

  const int threads = std::min<int>(thread_budget(), static_cast<int>(runs));
  if (threads <= 1) {
    for (Index l = 0; l < runs; ++l) run_level(l);
  } else {
    std::atomic<Index> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (Index l = next.fetch_add(1); l < runs; l = next.fetch_add(1))
          run_level(l);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Interval that sizes dx: the support of the initial measure.
  double width = 0.0;
  if (model.initial_density) {
    const auto s = support_interval(*model.initial_density);
    width = s.second - s.first;
  } else {
    const auto s = support_interval(model.initial_atoms(cfg.atoms0));
    width = s.second - s.first;
  }

  ErrorReport report;
  report.model_name = model.spec.name;
  report.horizon = cfg.horizon;
  {
    std::ostringstream os;
    if (cfg.reconstruction_period) {
      os << (cfg.kind == ReconstructionKind::fixed_location
                 ? "fixed_location"
                 : "fixed_equal_mass")
         << " every " << *cfg.reconstruction_period << " time units";
    } else {
      os << "initial only";
    }
    report.reconstruction = os.str();
  }

  report.rows.resize(static_cast<std::size_t>(cfg.levels));
  for (Index l = 0; l < cfg.levels; ++l) {
    auto& row = report.rows[static_cast<std::size_t>(l)];
    row.dt = dts[static_cast<std::size_t>(l)];
    row.atoms = budgets[static_cast<std::size_t>(l)];
    row.dx = width / static_cast<double>(row.atoms);
    if (cfg.reference == ReferenceKind::exact) {
      row.error = table_error(finals[static_cast<std::size_t>(l)],
                              model.exact_solution(cfg.horizon));
    } else {
      row.error = table_error(finals[static_cast<std::size_t>(l)], finals.back());
    }
  }
  const Index first_q = cfg.reference == ReferenceKind::exact ? 1 : 3;
  for (Index l = first_q; l < cfg.levels; ++l) {
    const double prev = report.rows[static_cast<std::size_t>(l) - 1].error;
    const double cur = report.rows[static_cast<std::size_t>(l)].error;
    if (prev > 0.0 && cur > 0.0)
      report.rows[static_cast<std::size_t>(l)].q = std::log2(prev / cur);
  }
  return report;
}

LongtimeResult longtime_run(const ModelSpec& model, const AtomicMeasure& initial,
                            const SolverConfig& config,
                            bool normalize_checkpoints) {
  LongtimeResult out;
  out.trace = simulate(model, initial, config);
  const auto& snaps = out.trace.snapshots;
  out.checkpoint_mass.reserve(snaps.size());
  for (const Snapshot& s : snaps)
    out.checkpoint_mass.push_back(s.measure.total_mass());
  for (std::size_t i = 0; i + 1 < snaps.size(); ++i) {
    const AtomicMeasure& a = snaps[i].measure;
    const AtomicMeasure& b = snaps[i + 1].measure;
    if (normalize_checkpoints) {
      const double ma = a.total_mass(), mb = b.total_mass();
      if (ma > 0.0 && mb > 0.0)
        out.rho_consecutive.push_back(w1(a, b, /*normalize=*/true));
      else
        out.rho_consecutive.push_back(ma > 0.0 || mb > 0.0 ? 1.0 : 0.0);
    } else {
      out.rho_consecutive.push_back(rho(a, b));
    }
  }
  return out;
}

std::vector<MassCluster> mass_clusters(const AtomicMeasure& mu, double gap,
                                       double min_fraction) {
  std::vector<MassCluster> all;
  const AtomicMeasure pm = mu.without_zero_atoms();
  const double total = pm.total_mass();
  if (pm.empty() || total <= 0.0) return all;
  // Atoms at or below the significance threshold count as extinct.  Long
  // runs leave decayed stragglers behind that carry no real population but
  // would otherwise chain separated concentrations into one group, so they
  // neither join a cluster, bridge a gap, nor contribute mass.
  const double floor = min_fraction * total;

  MassCluster cur{0.0, 0.0, 0.0, 0.0};
  double weighted = 0.0;
  bool open = false;
  auto flush = [&] {
    cur.barycenter = weighted / cur.mass;
    all.push_back(cur);
  };
  for (Index i = 0; i < pm.size(); ++i) {
    const double x = pm.positions()[i], m = pm.masses()[i];
    if (m <= floor) continue;
    if (!open) {
      cur = {x, x, 0.0, 0.0};
      open = true;
    } else if (x - cur.hi > gap) {
      flush();
      cur = {x, x, 0.0, 0.0};
      weighted = 0.0;
    }
    cur.hi = x;
    cur.mass += m;
    weighted += m * x;
  }
  if (open) flush();
  return all;
}

std::vector<SweepPoint> parameter_sweep(
    const std::function<SweepCase(double)>& make_case,
    const SolverConfig& config, const std::vector<double>& values) {
  std::vector<SweepPoint> out;
  out.reserve(values.size());
  for (double v : values) {
    SweepPoint point;
    point.parameter = v;
    try {
      SweepCase c = make_case(v);
      point.final_measure = simulate(c.model, c.initial, config).final_measure;
    } catch (const std::exception& e) {
      point.error = e.what();
    }
    out.push_back(std::move(point));
  }
  return out;
}

}  // namespace popsim
