#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "popsim/builtin_models.hpp"
#include "popsim/csv.hpp"
#include "popsim/errors.hpp"
#include "popsim/harness.hpp"
#include "popsim/metrics.hpp"
#include "popsim/reconstruction.hpp"
#include "popsim/solver.hpp"

namespace {

using nlohmann::json;
using namespace popsim;

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

BuiltinModel model_from(const json& cfg) {
  if (!cfg.contains("model") || !cfg["model"].contains("name"))
    throw ConfigError("config needs a model section with a name");
  const json& m = cfg["model"];
  BuiltinParams params;
  if (m.contains("A")) params.A = m["A"].get<double>();
  if (m.contains("epsilon")) params.epsilon = m["epsilon"].get<double>();
  return builtin_model(m["name"].get<std::string>(), params);
}

ReconstructionKind kind_from(const std::string& name) {
  if (name == "fixed_location") return ReconstructionKind::fixed_location;
  if (name == "fixed_equal_mass") return ReconstructionKind::fixed_equal_mass;
  throw ConfigError("unknown reconstruction kind: " + name);
}

std::optional<ReconstructionSpec> reconstruction_from(const json& cfg) {
  if (!cfg.contains("reconstruction")) return std::nullopt;
  const json& r = cfg["reconstruction"];
  ReconstructionSpec spec;
  spec.kind = kind_from(r.value("kind", std::string("fixed_location")));
  if (!r.contains("target_count"))
    throw ConfigError("reconstruction section needs target_count");
  spec.target_count = r["target_count"].get<Index>();
  if (r.contains("interval")) {
    const auto iv = r["interval"].get<std::vector<double>>();
    if (iv.size() != 2)
      throw ConfigError("reconstruction interval must be [lo, hi]");
    spec.fixed_interval = {iv[0], iv[1]};
  }
  return spec;
}

SolverConfig solver_from(const json& cfg) {
  SolverConfig sc;
  const json s = cfg.value("solver", json::object());
  sc.horizon = s.value("horizon", 1.0);
  if (s.contains("steps")) {
    sc.steps = s["steps"].get<Index>();
  } else if (s.contains("dt")) {
    const double dt = s["dt"].get<double>();
    if (!(dt > 0.0)) throw ConfigError("solver.dt must be positive");
    sc.steps = std::max<Index>(1, static_cast<Index>(std::llround(sc.horizon / dt)));
  } else {
    throw ConfigError("solver section needs steps or dt");
  }
  const std::string integ = s.value("transport", std::string("rk4"));
  if (integ == "rk4")
    sc.transport = TransportIntegrator::rk4;
  else if (integ == "euler")
    sc.transport = TransportIntegrator::euler;
  else
    throw ConfigError("unknown transport integrator: " + integ);
  const std::string mass = s.value("mass_update", std::string("explicit_euler"));
  if (mass == "explicit_euler")
    sc.mass_update = MassUpdate::explicit_euler;
  else if (mass == "boundary_ode")
    sc.mass_update = MassUpdate::boundary_ode;
  else
    throw ConfigError("unknown mass update: " + mass);
  const std::string policy = s.value("offspring_policy", std::string("drop"));
  if (policy == "drop")
    sc.offspring_policy = OffspringPolicy::drop;
  else if (policy == "clamp")
    sc.offspring_policy = OffspringPolicy::clamp;
  else
    throw ConfigError("unknown offspring policy: " + policy);
  const std::string guard = s.value("guard", std::string("strict"));
  if (guard == "strict")
    sc.guard = StabilityGuard::strict;
  else if (guard == "clamp")
    sc.guard = StabilityGuard::clamp;
  else
    throw ConfigError("unknown stability guard: " + guard);
  sc.position_merge_tol = s.value("position_merge_tol", 1e-12);
  if (s.contains("snapshot_times"))
    sc.snapshot_times = s["snapshot_times"].get<std::vector<double>>();

  if (cfg.contains("reconstruction")) {
    const json& r = cfg["reconstruction"];
    sc.reconstruction = reconstruction_from(cfg);
    sc.reconstruction_every = r.value("every_steps", Index{1});
  }
  return sc;
}

AtomicMeasure build_initial(const BuiltinModel& bm, const json& cfg,
                            const std::optional<ReconstructionSpec>& runtime) {
  const json s = cfg.value("solver", json::object());
  std::optional<Index> n;
  if (s.contains("initial_atoms")) n = s["initial_atoms"].get<Index>();

  if (bm.initial_atoms) {
    if (!n)
      throw ConfigError("solver.initial_atoms is required for this model");
    return bm.initial_atoms(*n);
  }
  if (bm.initial_density) {
    ReconstructionSpec spec;
    spec.kind = runtime ? runtime->kind : ReconstructionKind::fixed_location;
    if (n)
      spec.target_count = *n;
    else if (runtime)
      spec.target_count = runtime->target_count;
    else
      throw ConfigError(
          "solver.initial_atoms (or a reconstruction section) is needed to "
          "discretize the initial density");
    return reconstruct(*bm.initial_density, spec).measure;
  }
  throw ConfigError("model provides no initial data");
}

std::string snapshot_filename(std::size_t idx, double time) {
  std::ostringstream os;
  os << "snapshot_" << idx << "_t" << time << ".csv";
  return os.str();
}

int run_simulate(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_json(config_path);
  const BuiltinModel bm = model_from(cfg);
  const SolverConfig sc = solver_from(cfg);
  const AtomicMeasure initial = build_initial(bm, cfg, sc.reconstruction);

  const SimulationTrace trace = simulate(bm.spec, initial, sc);

  for (const std::string& w : trace.warnings)
    std::cerr << "warning: " << w << "\n";

  std::filesystem::create_directories(out_dir);
  write_atoms_csv_file(out_dir + "/final.csv", trace.final_measure);
  {
    std::ofstream os(out_dir + "/diagnostics.csv");
    if (!os) throw ConfigError("cannot write to output directory: " + out_dir);
    write_diagnostics_csv(os, trace.steps);
  }
  for (std::size_t i = 0; i < trace.snapshots.size(); ++i)
    write_atoms_csv_file(
        out_dir + "/" + snapshot_filename(i, trace.snapshots[i].time),
        trace.snapshots[i].measure);

  std::cout << "final time " << format_double(sc.horizon) << ": "
            << trace.final_measure.size() << " atoms, total mass "
            << format_double(trace.final_measure.total_mass()) << "\n"
            << "wrote " << out_dir << "/final.csv, diagnostics.csv and "
            << trace.snapshots.size() << " snapshot file(s)\n";
  return 0;
}

int run_converge(const std::string& config_path, const std::string& out_dir) {
  const json cfg = load_json(config_path);
  const BuiltinModel bm = model_from(cfg);
  const json e = cfg.value("experiment", json::object());

  ConvergenceConfig cc;
  cc.levels = e.value("levels", Index{11});
  cc.dt0 = e.value("dt0", 0.1);
  cc.atoms0 = e.value("atoms0", Index{10});
  cc.horizon = e.value("horizon", 10.0);
  if (e.contains("period")) cc.reconstruction_period = e["period"].get<double>();
  cc.kind = kind_from(e.value("kind", std::string("fixed_location")));
  if (e.contains("interval")) {
    const auto iv = e["interval"].get<std::vector<double>>();
    if (iv.size() != 2)
      throw ConfigError("experiment interval must be a two-element array");
    cc.reconstruction_interval = std::make_pair(iv[0], iv[1]);
  }
  {
    const std::string mass = e.value("mass_update", std::string("explicit_euler"));
    if (mass == "explicit_euler")
      cc.mass_update = MassUpdate::explicit_euler;
    else if (mass == "boundary_ode")
      cc.mass_update = MassUpdate::boundary_ode;
    else
      throw ConfigError("unknown mass update: " + mass);
  }
  const std::string ref = e.value("reference", std::string("exact"));
  if (ref == "exact")
    cc.reference = ReferenceKind::exact;
  else if (ref == "finest")
    cc.reference = ReferenceKind::finest_level;
  else
    throw ConfigError("unknown reference kind: " + ref);

  const ErrorReport report = convergence_study(bm, cc);

  std::cout << "model " << report.model_name << ", horizon "
            << format_double(report.horizon) << ", reconstruction "
            << report.reconstruction << "\n";
  std::cout << "dt,dx,atoms,err,q\n";
  for (const ErrorRow& r : report.rows) {
    std::cout << format_double(r.dt) << ',' << format_double(r.dx) << ','
              << r.atoms << ',' << format_double(r.error) << ',';
    if (r.q) std::cout << format_double(*r.q);
    std::cout << "\n";
  }

  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/error_report.csv");
  if (!os) throw ConfigError("cannot write to output directory: " + out_dir);
  write_error_report_csv(os, report);
  std::cout << "wrote " << out_dir << "/error_report.csv\n";
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& param, double from, double to, Index points) {
  if (points < 1) throw ConfigError("sweep needs at least one point");
  if (param != "A" && param != "epsilon")
    throw ConfigError("sweep parameter must be A or epsilon");

  const json cfg = load_json(config_path);
  if (!cfg.contains("model") || !cfg["model"].contains("name"))
    throw ConfigError("config needs a model section with a name");
  const std::string model_name = cfg["model"]["name"].get<std::string>();
  const SolverConfig sc = solver_from(cfg);

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(points));
  for (Index i = 0; i < points; ++i) {
    const double s = points == 1 ? 0.0
                                 : static_cast<double>(i) /
                                       static_cast<double>(points - 1);
    values.push_back(from + s * (to - from));
  }

  auto make_case = [&](double v) {
    BuiltinParams params;
    if (cfg["model"].contains("A")) params.A = cfg["model"]["A"].get<double>();
    if (cfg["model"].contains("epsilon"))
      params.epsilon = cfg["model"]["epsilon"].get<double>();
    if (param == "A")
      params.A = v;
    else
      params.epsilon = v;
    BuiltinModel bm = builtin_model(model_name, params);
    AtomicMeasure initial = build_initial(bm, cfg, sc.reconstruction);
    return SweepCase{std::move(bm.spec), std::move(initial)};
  };

  const std::vector<SweepPoint> sweep = parameter_sweep(make_case, sc, values);

  Index failures = 0;
  for (const SweepPoint& p : sweep) {
    if (p.error.empty()) {
      std::cout << param << " = " << format_double(p.parameter) << ": "
                << p.final_measure.size() << " atoms, mass "
                << format_double(p.final_measure.total_mass()) << "\n";
    } else {
      ++failures;
      std::cout << param << " = " << format_double(p.parameter)
                << ": failed (" << p.error << ")\n";
    }
  }

  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir + "/sweep.csv");
  if (!os) throw ConfigError("cannot write to output directory: " + out_dir);
  write_sweep_csv(os, sweep);
  std::cout << "wrote " << out_dir << "/sweep.csv";
  if (failures > 0) std::cout << " (" << failures << " point(s) failed)";
  std::cout << "\n";
  return 0;
}

int run_metrics(const std::string& path_a, const std::string& path_b) {
  const MeasureVariant a = read_measure_csv_file(path_a);
  const MeasureVariant b = read_measure_csv_file(path_b);
  const MetricReport r = std::visit(
      [](const auto& ma, const auto& mb) { return metric_report(ma, mb); }, a,
      b);
  std::cout << "w1_normalized = " << format_double(r.w1_normalized) << "\n"
            << "mass_gap = " << format_double(r.mass_gap) << "\n"
            << "rho = " << format_double(r.rho) << "\n"
            << "flat_lower = " << format_double(r.flat_lower) << "\n"
            << "flat_upper = " << format_double(r.flat_upper) << "\n"
            << "c_K = " << format_double(r.c_K) << "\n";
  if (r.interval_K)
    std::cout << "interval_K = [" << format_double(r.interval_K->first) << ", "
              << format_double(r.interval_K->second) << "]\n";
  else
    std::cout << "interval_K = unbounded\n";
  return 0;
}

constexpr const char* config_help = R"(JSON config sections and defaults:
  model:          name (required: mckendrick | selection_growth | equal_fission
                  | selection_mutation), A (selection strength), epsilon
                  (mutation fraction)
  solver:         horizon (1.0), steps or dt (required), transport (rk4|euler,
                  default rk4), mass_update (explicit_euler|boundary_ode,
                  default explicit_euler), offspring_policy (drop|clamp,
                  default drop), guard (strict|clamp, default strict),
                  position_merge_tol (1e-12), snapshot_times ([]),
                  initial_atoms (initial population size)
  reconstruction: kind (fixed_location|fixed_equal_mass, default
                  fixed_location), target_count (required), every_steps (1),
                  interval ([lo, hi], optional)
  experiment:     levels (11), dt0 (0.1), atoms0 (10), horizon (10.0),
                  period (time units between reconstructions; omit for an
                  initial reconstruction only), kind (fixed_location),
                  interval ([lo, hi] reconstruction grid anchor, optional),
                  mass_update (explicit_euler|boundary_ode, default
                  explicit_euler), reference (exact|finest, default exact)

Exit codes: 0 success, 2 configuration error, 3 numerical failure.)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-based solver for nonlocal structured population models"};
  app.footer(config_help);
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::string path_a, path_b;
  std::string param = "A";
  double from = 0.0, to = 1.0;
  Index points = 2;

  CLI::App* sim = app.add_subcommand("simulate", "Run one simulation");
  sim->add_option("config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--out", out_dir, "output directory")
      ->capture_default_str();

  CLI::App* conv =
      app.add_subcommand("converge", "Run a refinement study and print the error table");
  conv->add_option("config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  conv->add_option("--out", out_dir, "output directory")
      ->capture_default_str();

  CLI::App* sw = app.add_subcommand("sweep", "Scan a model parameter");
  sw->add_option("config", config_path, "JSON config file")
      ->required()
      ->check(CLI::ExistingFile);
  sw->add_option("--param", param, "parameter to scan (A or epsilon)")
      ->capture_default_str();
  sw->add_option("--from", from, "first parameter value")->required();
  sw->add_option("--to", to, "last parameter value")->required();
  sw->add_option("--points", points, "number of points")->required();
  sw->add_option("--out", out_dir, "output directory")
      ->capture_default_str();

  CLI::App* met = app.add_subcommand(
      "metrics", "Distances between two measures stored as CSV");
  met->add_option("measureA", path_a, "first measure (x,m or x,F CSV)")
      ->required()
      ->check(CLI::ExistingFile);
  met->add_option("measureB", path_b, "second measure (x,m or x,F CSV)")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return run_simulate(config_path, out_dir);
    if (conv->parsed()) return run_converge(config_path, out_dir);
    if (sw->parsed())
      return run_sweep(config_path, out_dir, param, from, to, points);
    if (met->parsed()) return run_metrics(path_a, path_b);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
