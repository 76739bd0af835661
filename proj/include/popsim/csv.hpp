#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "popsim/harness.hpp"
#include "popsim/measure.hpp"
#include "popsim/solver.hpp"

namespace popsim {

// Measures travel as two-column CSV.  Atom lists use the header "x,m", one
// atom per row.  CDFs use the header "x,F" with breakpoints in order; a jump
// is written as two rows sharing the x value (left limit first).  Values are
// printed with 17 significant digits, so a write/read round trip is exact.

void write_atoms_csv(std::ostream& os, const AtomicMeasure& mu);
void write_cdf_csv(std::ostream& os, const PiecewiseCdf& cdf);

using MeasureVariant = std::variant<AtomicMeasure, ReferenceMeasure>;

// Reads either measure kind, dispatching on the header row.
MeasureVariant read_measure_csv(std::istream& is);

void write_atoms_csv_file(const std::string& path, const AtomicMeasure& mu);
void write_cdf_csv_file(const std::string& path, const PiecewiseCdf& cdf);
MeasureVariant read_measure_csv_file(const std::string& path);

// step,time,atoms_pre,atoms_post,mass,max_dt_c
void write_diagnostics_csv(std::ostream& os,
                           const std::vector<StepDiagnostics>& steps);

// dt,dx,atoms,err,q (q left blank where no estimate exists)
void write_error_report_csv(std::ostream& os, const ErrorReport& report);

// param,x,m triples; failed points are skipped (they have no measure)
void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points);

// Exact formatting used throughout (17 significant digits).
std::string format_double(double v);

}  // namespace popsim
