#include "popsim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

#include "popsim/errors.hpp"

namespace popsim {

namespace {

void validate_config(const SolverConfig& cfg) {
  if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon))
    throw ConfigError("simulation horizon must be positive and finite");
  if (cfg.steps < 1) throw ConfigError("step count must be at least 1");
  if (cfg.reconstruction_every < 1)
    throw ConfigError("reconstruction period must be at least 1 step");
  if (!(cfg.position_merge_tol >= 0.0))
    throw ConfigError("position merge tolerance must be nonnegative");
  for (double t : cfg.snapshot_times)
    if (!(t >= 0.0 && t <= cfg.horizon))
      throw ConfigError("snapshot time outside the simulation horizon");
}

std::string step_context(Index step, double t) {
  std::ostringstream os;
  os << " (step " << step << ", t = " << t << ")";
  return os.str();
}

// Finite iff multiplying by zero annihilates every entry: NaN and infinity
// both turn into NaN and poison the sum.  Stays in SIMD, unlike isFinite()
// whose boolean reduction falls back to per-coefficient evaluation.
bool all_finite(const ArrayXd& v) { return (v * 0.0).sum() == 0.0; }

// In-place sort and within-tolerance merge; each atom folds into the leftmost
// representative it reaches (representatives keep their position).
void sort_and_merge(ArrayXd& x, ArrayXd& m, double tol) {
  const Index n = x.size();
  if (n < 2) return;
  // One vectorized sweep settles the common case: all adjacent gaps positive
  // and above tol means the array is sorted with nothing to fold.
  const double min_gap = (x.tail(n - 1) - x.head(n - 1)).minCoeff();
  if (min_gap > tol) return;
  if (min_gap < 0.0) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](Index a, Index b) { return x[a] < x[b]; });
    ArrayXd xs(n), ms(n);
    for (Index i = 0; i < n; ++i) {
      xs[i] = x[idx[static_cast<std::size_t>(i)]];
      ms[i] = m[idx[static_cast<std::size_t>(i)]];
    }
    x = std::move(xs);
    m = std::move(ms);
  }
  Index out = 0;
  for (Index i = 0; i < n; ++i) {
    if (out > 0 && x[i] - x[out - 1] <= tol) {
      m[out - 1] += m[i];
    } else {
      x[out] = x[i];
      m[out] = m[i];
      ++out;
    }
  }
  if (out < n) {
    x.conservativeResize(out);
    m.conservativeResize(out);
  }
}

}  // namespace

ArrayXd transport_positions(const ArrayXd& x,
                            const std::function<ArrayXd(const ArrayXd&)>& b,
                            double dt, TransportIntegrator kind) {
  if (!b || x.size() == 0) return x;
  if (kind == TransportIntegrator::euler) return x + dt * b(x);
  const ArrayXd k1 = b(x);
  const ArrayXd k2 = b((x + 0.5 * dt * k1).eval());
  const ArrayXd k3 = b((x + 0.5 * dt * k2).eval());
  const ArrayXd k4 = b((x + dt * k3).eval());
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

SpawnResult spawn_offspring_states(const ArrayXd& transported,
                                   const BirthKernel& kernel,
                                   const Domain& domain, OffspringPolicy policy,
                                   double tol, bool full_child_map) {
  const Index M = transported.size();
  const std::size_t B = kernel.branches.size();

  struct Cand {
    double x;
    Index branch;
    Index parent;  // -1: stands for every parent of the branch
  };
  std::vector<Cand> cands;

  SpawnResult out;
  out.branch_child.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    const bool compact =
        !full_child_map && kernel.branches[b].constant_target.has_value();
    out.branch_child[b].assign(
        compact ? static_cast<std::size_t>(M > 0 ? 1 : 0)
                : static_cast<std::size_t>(M),
        -1);
  }

  for (std::size_t b = 0; b < B; ++b) {
    const KernelBranch& branch = kernel.branches[b];
    if (branch.constant_target) {
      double s = *branch.constant_target;
      if (!std::isfinite(s))
        throw NumericalError("birth kernel produced a non-finite state");
      if (!domain.contains(s)) {
        if (policy == OffspringPolicy::drop) {
          out.dropped += M;
          continue;
        }
        s = domain.clamp(s);
      }
      if (M > 0) cands.push_back({s, static_cast<Index>(b), -1});
      continue;
    }
    if (!branch.target) continue;
    const ArrayXd targets = branch.target(transported);
    if (!targets.isFinite().all())
      throw NumericalError("birth kernel produced a non-finite state");
    for (Index j = 0; j < M; ++j) {
      double s = targets[j];
      if (!domain.contains(s)) {
        if (policy == OffspringPolicy::drop) {
          ++out.dropped;
          continue;
        }
        s = domain.clamp(s);
      }
      cands.push_back({s, static_cast<Index>(b), j});
    }
  }

  std::sort(cands.begin(), cands.end(),
            [](const Cand& a, const Cand& b) { return a.x < b.x; });

  // Match candidates against existing states, then group the rest: the first
  // state of a group is its representative, and later candidates join while
  // they stay within tol of it.
  std::vector<double> reps;
  struct Placed {
    Index branch, parent;
    bool existing;
    Index idx;  // existing slot or group number
  };
  std::vector<Placed> placed;
  placed.reserve(cands.size());
  const double* xb = transported.data();
  for (const Cand& c : cands) {
    const Index k =
        static_cast<Index>(std::lower_bound(xb, xb + M, c.x) - xb);
    Index hit = -1;
    const bool right_ok = k < M && xb[k] - c.x <= tol;
    const bool left_ok = k > 0 && c.x - xb[k - 1] <= tol;
    if (right_ok && left_ok)
      hit = xb[k] - c.x < c.x - xb[k - 1] ? k : k - 1;
    else if (right_ok)
      hit = k;
    else if (left_ok)
      hit = k - 1;
    if (hit >= 0) {
      placed.push_back({c.branch, c.parent, true, hit});
    } else if (!reps.empty() && c.x - reps.back() <= tol) {
      placed.push_back({c.branch, c.parent, false,
                        static_cast<Index>(reps.size()) - 1});
    } else {
      reps.push_back(c.x);
      placed.push_back({c.branch, c.parent, false,
                        static_cast<Index>(reps.size()) - 1});
    }
  }

  // Interleave existing states and new representatives (all pairwise farther
  // than tol apart, so the order is strict).  The runs of existing states
  // between consecutive insertion points are bulk-copied.
  const Index G = static_cast<Index>(reps.size());
  out.positions.resize(M + G);
  out.parent_slot.resize(static_cast<std::size_t>(M));
  std::vector<Index> group_slot(static_cast<std::size_t>(G));
  Index src = 0;
  for (Index g = 0; g < G; ++g) {
    const double r = reps[static_cast<std::size_t>(g)];
    const Index ins =
        static_cast<Index>(std::lower_bound(xb + src, xb + M, r) - xb);
    if (ins > src)
      out.positions.segment(src + g, ins - src) =
          Eigen::Map<const ArrayXd>(xb + src, ins - src);
    for (Index j = src; j < ins; ++j)
      out.parent_slot[static_cast<std::size_t>(j)] = j + g;
    out.positions[ins + g] = r;
    group_slot[static_cast<std::size_t>(g)] = ins + g;
    src = ins;
  }
  if (src < M) {
    out.positions.segment(src + G, M - src) =
        Eigen::Map<const ArrayXd>(xb + src, M - src);
    for (Index j = src; j < M; ++j)
      out.parent_slot[static_cast<std::size_t>(j)] = j + G;
  }

  for (const Placed& p : placed) {
    const Index s = p.existing ? out.parent_slot[static_cast<std::size_t>(p.idx)]
                               : group_slot[static_cast<std::size_t>(p.idx)];
    auto& child = out.branch_child[static_cast<std::size_t>(p.branch)];
    if (p.parent < 0) {
      std::fill(child.begin(), child.end(), s);
    } else {
      child[static_cast<std::size_t>(p.parent)] = s;
    }
  }
  return out;
}

namespace {

ArrayXd branch_rates_at(const KernelBranch& branch, double t,
                        const AtomicMeasure& mu1, const ArrayXd& parents,
                        Index step, double tk) {
  ArrayXd rates = branch.rate ? branch.rate(t, mu1, parents)
                              : ArrayXd::Zero(parents.size()).eval();
  if (rates.size() != parents.size())
    throw NumericalError("birth rate evaluator returned the wrong size" +
                         step_context(step, tk));
  if (!all_finite(rates))
    throw NumericalError("birth rate evaluated to a non-finite value" +
                         step_context(step, tk));
  if (rates.size() > 0 && rates.minCoeff() < 0.0)
    throw NumericalError("birth rate evaluated negative" +
                         step_context(step, tk));
  return rates;
}

}  // namespace

SimulationTrace simulate(const ModelSpec& model, const AtomicMeasure& initial,
                         const SolverConfig& config) {
  validate_config(config);

  SimulationTrace trace;
  AtomicMeasure mu = config.initial_reconstruction
                         ? reconstruct(initial, *config.initial_reconstruction).measure
                         : initial;

  const Index N = config.steps;
  const double dt = config.horizon / static_cast<double>(N);

  // Snapshot schedule on the step grid.
  std::vector<std::pair<Index, double>> snaps;
  for (double t : config.snapshot_times) {
    Index k = static_cast<Index>(std::llround(t / dt));
    k = std::clamp<Index>(k, 0, N);
    const double grid_t = dt * static_cast<double>(k);
    if (std::abs(grid_t - t) > 1e-9 * std::max(1.0, std::abs(t))) {
      std::ostringstream os;
      os << "snapshot time " << t << " moved to grid time " << grid_t;
      trace.warnings.push_back(os.str());
    }
    snaps.emplace_back(k, grid_t);
  }
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end(),
                          [](const auto& a, const auto& b) {
                            return a.first == b.first;
                          }),
              snaps.end());
  std::size_t next_snap = 0;
  while (next_snap < snaps.size() && snaps[next_snap].first == 0) {
    trace.snapshots.push_back({0.0, mu});
    ++next_snap;
  }

  trace.steps.reserve(static_cast<std::size_t>(N));

  const bool full_child_map = config.mass_update == MassUpdate::explicit_euler;

  for (Index k = 0; k < N; ++k) {
    const double tk = dt * static_cast<double>(k);

    // Step 1: move states along the transport field frozen at (tk, mu).
    ArrayXd x;
    ArrayXd m = mu.masses();
    if (model.b) {
      auto field = [&](const ArrayXd& q) { return model.b(tk, mu, q); };
      x = transport_positions(mu.positions(), field, dt, config.transport);
      if (!all_finite(x))
        throw NumericalError("transport produced a non-finite state" +
                             step_context(k + 1, tk));
      x = x.max(model.domain.lower).min(model.domain.upper);
      sort_and_merge(x, m, config.position_merge_tol);
    } else {
      x = mu.positions();
    }
    const Index atoms_pre = x.size();

    // Step 2a: attach birth states, then freeze the reaction coefficients at
    // the transported population.  The attached states carry no mass yet, so
    // as a measure the transported population already equals the extended one.
    SpawnResult sp =
        spawn_offspring_states(x, model.kernel, model.domain,
                               config.offspring_policy,
                               config.position_merge_tol, full_child_map);
    const Index ext_n = sp.positions.size();
    const AtomicMeasure mu1 =
        AtomicMeasure::from_sorted_unchecked(std::move(x), std::move(m));
    const ArrayXd& xp = mu1.positions();  // parents, sorted
    const ArrayXd& mp = mu1.masses();

    ArrayXd c_ext = model.c ? model.c(tk, mu1, sp.positions)
                            : ArrayXd::Zero(ext_n).eval();
    if (c_ext.size() != ext_n)
      throw NumericalError("loss rate evaluator returned the wrong size" +
                           step_context(k + 1, tk));
    if (!all_finite(c_ext))
      throw NumericalError("loss rate evaluated to a non-finite value" +
                           step_context(k + 1, tk));
    const double max_dtc =
        ext_n > 0 ? (dt * c_ext).abs().maxCoeff() : 0.0;

    // Step 2b: update masses (survivor decay into parent slots, offspring
    // inflow into child slots; untouched slots keep zero mass).
    Index clamped = 0;
    ArrayXd m_new = ArrayXd::Zero(ext_n);
    if (config.mass_update == MassUpdate::explicit_euler) {
      ArrayXd decay = 1.0 - dt * c_ext;
      if (ext_n > 0 && decay.minCoeff() < 0.0) {
        if (config.guard == StabilityGuard::strict)
          throw NumericalError(
              "explicit Euler stability bound exceeded; reduce dt" +
              step_context(k + 1, tk));
        for (Index j = 0; j < atoms_pre; ++j) {
          if (decay[sp.parent_slot[static_cast<std::size_t>(j)]] < 0.0 &&
              mp[j] > 0.0)
            ++clamped;
        }
        decay = decay.max(0.0);
      }
      for (Index j = 0; j < atoms_pre; ++j) {
        const Index s = sp.parent_slot[static_cast<std::size_t>(j)];
        m_new[s] = mp[j] * decay[s];
      }
      for (std::size_t b = 0; b < model.kernel.branches.size(); ++b) {
        const auto& child = sp.branch_child[b];
        if (child.empty()) continue;
        const ArrayXd rates = branch_rates_at(model.kernel.branches[b], tk,
                                              mu1, xp, k + 1, tk);
        for (Index j = 0; j < atoms_pre; ++j) {
          const Index s = child[static_cast<std::size_t>(j)];
          if (s >= 0) m_new[s] += dt * rates[j] * mp[j];
        }
      }
    } else {
      // Closed-form update: exact exponential decay per state plus the
      // integrated inflow at the single constant birth target.
      if (model.kernel.branches.size() > 1 ||
          (model.kernel.branches.size() == 1 &&
           !model.kernel.branches[0].constant_target))
        throw ConfigError(
            "closed-form boundary update needs a single constant-target birth branch");
      // A state-independent loss rate (the common case for constant
      // mortality) shares one decay factor; otherwise tabulate per state.
      const bool uniform_c =
          ext_n == 0 || (c_ext - c_ext[0]).abs().maxCoeff() == 0.0;
      ArrayXd decay;
      double decay0 = 1.0;
      if (uniform_c) {
        decay0 = ext_n > 0 ? std::exp(-c_ext[0] * dt) : 1.0;
        for (Index j = 0; j < atoms_pre; ++j)
          m_new[sp.parent_slot[static_cast<std::size_t>(j)]] = mp[j] * decay0;
      } else {
        decay = (-dt * c_ext).exp();
        for (Index j = 0; j < atoms_pre; ++j) {
          const Index s = sp.parent_slot[static_cast<std::size_t>(j)];
          m_new[s] = mp[j] * decay[s];
        }
      }
      if (!model.kernel.branches.empty() && atoms_pre > 0) {
        const auto& child = sp.branch_child[0];
        const Index bs = child[0];
        if (bs >= 0) {
          const ArrayXd rates = branch_rates_at(model.kernel.branches[0], tk,
                                                mu1, xp, k + 1, tk);
          double inflow = 0.0;
          if (uniform_c) {
            // Equal rates collapse the cohort weight to dt * decay0.
            inflow = dt * decay0 * (rates * mp).sum();
          } else {
            const double cb = c_ext[bs];
            const double eb = decay[bs];
            for (Index j = 0; j < atoms_pre; ++j) {
              const Index pj = sp.parent_slot[static_cast<std::size_t>(j)];
              const double cj = c_ext[pj];
              const double phi = std::abs(cb - cj) * dt < 1e-12
                                     ? dt * eb
                                     : (decay[pj] - eb) / (cb - cj);
              inflow += rates[j] * mp[j] * phi;
            }
          }
          m_new[bs] += inflow;
        }
      }
    }

    // Step 3: drop emptied states; rebuild on the coarse grid when due.
    const bool has_zero = ext_n > 0 && m_new.minCoeff() <= 0.0;
    AtomicMeasure mu_next = AtomicMeasure::from_sorted_unchecked(
        std::move(sp.positions), std::move(m_new));
    if (has_zero) mu_next = mu_next.without_zero_atoms();
    if (config.reconstruction && (k + 1) % config.reconstruction_every == 0)
      mu_next = reconstruct(mu_next, *config.reconstruction).measure;
    mu = std::move(mu_next);

    StepDiagnostics d;
    d.step = k + 1;
    d.time = dt * static_cast<double>(k + 1);
    d.atoms_pre = atoms_pre;
    d.atoms_post = ext_n;
    d.atoms_final = mu.size();
    d.mass = mu.total_mass();
    d.max_dt_c = max_dtc;
    d.dropped_offspring = sp.dropped;
    d.clamped_masses = clamped;
    trace.steps.push_back(d);

    while (next_snap < snaps.size() && snaps[next_snap].first == k + 1) {
      trace.snapshots.push_back({snaps[next_snap].second, mu});
      ++next_snap;
    }
  }

  trace.final_measure = std::move(mu);
  return trace;
}

SimulationTrace simulate(const ModelSpec& model, const ReferenceMeasure& initial,
                         const SolverConfig& config) {
  if (!config.initial_reconstruction)
    throw ConfigError(
        "density initial data needs an initial reconstruction to become atoms");
  SolverConfig inner = config;
  inner.initial_reconstruction.reset();
  const AtomicMeasure mu0 =
      reconstruct(initial, *config.initial_reconstruction).measure;
  return simulate(model, mu0, inner);
}

}  // namespace popsim
