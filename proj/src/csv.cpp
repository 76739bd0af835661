#include "popsim/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "popsim/errors.hpp"

namespace popsim {

std::string format_double(double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& field, std::size_t line_no) {
  const std::string t = trim(field);
  double v = 0.0;
  const auto* begin = t.data();
  const auto* end = t.data() + t.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    std::ostringstream os;
    os << "measure CSV line " << line_no << ": cannot parse number '" << t
       << "'";
    throw ConfigError(os.str());
  }
  return v;
}

}  // namespace

void write_atoms_csv(std::ostream& os, const AtomicMeasure& mu) {
  os << "x,m\n";
  for (Index i = 0; i < mu.size(); ++i)
    os << format_double(mu.positions()[i]) << ','
       << format_double(mu.masses()[i]) << '\n';
}

void write_cdf_csv(std::ostream& os, const PiecewiseCdf& cdf) {
  os << "x,F\n";
  for (Index i = 0; i < cdf.size(); ++i) {
    if (cdf.f_lo[i] != cdf.f_hi[i])
      os << format_double(cdf.x[i]) << ',' << format_double(cdf.f_lo[i])
         << '\n';
    os << format_double(cdf.x[i]) << ',' << format_double(cdf.f_hi[i]) << '\n';
  }
}

MeasureVariant read_measure_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw ConfigError("measure CSV is empty");
  const std::string header = trim(line);

  std::vector<double> first, second;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      std::ostringstream os;
      os << "measure CSV line " << line_no << ": expected two comma-separated columns";
      throw ConfigError(os.str());
    }
    first.push_back(parse_double(line.substr(0, comma), line_no));
    second.push_back(parse_double(line.substr(comma + 1), line_no));
  }

  const Index n = static_cast<Index>(first.size());
  ArrayXd a(n), b(n);
  for (Index i = 0; i < n; ++i) {
    a[i] = first[static_cast<std::size_t>(i)];
    b[i] = second[static_cast<std::size_t>(i)];
  }

  try {
    if (header == "x,m") return AtomicMeasure(std::move(a), std::move(b));
    if (header == "x,F") return ReferenceMeasure(std::move(a), std::move(b));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid measure CSV: ") + e.what());
  }
  throw ConfigError("unrecognized measure CSV header: expected 'x,m' or 'x,F'");
}

void write_atoms_csv_file(const std::string& path, const AtomicMeasure& mu) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  write_atoms_csv(os, mu);
}

void write_cdf_csv_file(const std::string& path, const PiecewiseCdf& cdf) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open for writing: " + path);
  write_cdf_csv(os, cdf);
}

MeasureVariant read_measure_csv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open measure CSV: " + path);
  return read_measure_csv(is);
}

void write_diagnostics_csv(std::ostream& os,
                           const std::vector<StepDiagnostics>& steps) {
  os << "step,time,atoms_pre,atoms_post,mass,max_dt_c\n";
  for (const StepDiagnostics& d : steps)
    os << d.step << ',' << format_double(d.time) << ',' << d.atoms_pre << ','
       << d.atoms_post << ',' << format_double(d.mass) << ','
       << format_double(d.max_dt_c) << '\n';
}

void write_error_report_csv(std::ostream& os, const ErrorReport& report) {
  os << "dt,dx,atoms,err,q\n";
  for (const ErrorRow& r : report.rows) {
    os << format_double(r.dt) << ',' << format_double(r.dx) << ',' << r.atoms
       << ',' << format_double(r.error) << ',';
    if (r.q) os << format_double(*r.q);
    os << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
  os << "param,x,m\n";
  for (const SweepPoint& p : points) {
    if (!p.error.empty()) continue;
    const auto& mu = p.final_measure;
    for (Index i = 0; i < mu.size(); ++i)
      os << format_double(p.parameter) << ','
         << format_double(mu.positions()[i]) << ','
         << format_double(mu.masses()[i]) << '\n';
  }
}

}  // namespace popsim
