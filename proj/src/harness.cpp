#include "pbe/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <thread>

#include "pbe/error.hpp"

namespace pbe {

namespace {

constexpr double kPi = std::numbers::pi;

double growth_rate(double l) { return 0.5 + 2.0 * (1.0 - l) * l; }

}  // namespace

double MmsProblem::exact(double t, double l, Point2 x) const {
  return std::exp(-decay * t) * std::sin(kPi * l) * std::sin(kPi * x.x) * std::sin(kPi * x.y);
}

Vec2 MmsProblem::exact_gradient(double t, double l, Point2 x) const {
  const double s = std::exp(-decay * t) * std::sin(kPi * l) * kPi;
  return {s * std::cos(kPi * x.x) * std::sin(kPi * x.y), s * std::sin(kPi * x.x) * std::cos(kPi * x.y)};
}

ScalarField MmsProblem::exact_field(double t, double l) const {
  return {[this, t, l](Point2 x) { return exact(t, l, x); },
          [this, t, l](Point2 x) { return exact_gradient(t, l, x); }};
}

MmsProblem mms_problem() {
  MmsProblem mms;
  const double a = mms.decay;
  ProblemSpec& s = mms.spec;
  s.domain = {0.0, 1.0, 0.0, 1.0};
  s.l_min = 0.0;
  s.l_max = 1.0;
  s.final_time = 1.0;
  s.epsilon = 1.0;
  s.b = {1.0, 1.0};
  s.growth = growth_rate;

  const double eps = s.epsilon;
  const Vec2 b = s.b;
  // f = z_t + G z_l - eps Lap z + b . grad z
  s.source = [a, eps, b](double t, double l, Point2 x) {
    const double e = std::exp(-a * t);
    const double sx = std::sin(kPi * x.x);
    const double sy = std::sin(kPi * x.y);
    const double sl = std::sin(kPi * l);
    const double z = e * sl * sx * sy;
    const double z_l = e * kPi * std::cos(kPi * l) * sx * sy;
    const double conv =
        e * sl * kPi * (b.x * std::cos(kPi * x.x) * sy + b.y * sx * std::cos(kPi * x.y));
    return -a * z + growth_rate(l) * z_l + 2.0 * eps * kPi * kPi * z + conv;
  };
  // Plain-function form so the closures do not depend on mms's address.
  auto exact = [a](double t, double l, Point2 x) {
    return std::exp(-a * t) * std::sin(kPi * l) * std::sin(kPi * x.x) * std::sin(kPi * x.y);
  };
  auto gradient = [a](double t, double l, Point2 x) {
    const double c = std::exp(-a * t) * std::sin(kPi * l) * kPi;
    return Vec2{c * std::cos(kPi * x.x) * std::sin(kPi * x.y),
                c * std::sin(kPi * x.x) * std::cos(kPi * x.y)};
  };
  const double l_min = s.l_min;
  s.z_init = [exact](double l, Point2 x) { return exact(0.0, l, x); };
  s.z_init_grad = [gradient](double l, Point2 x) { return gradient(0.0, l, x); };
  s.z_bdry = [exact, l_min](double t, Point2 x) { return exact(t, l_min, x); };
  s.z_bdry_grad = [gradient, l_min](double t, Point2 x) { return gradient(t, l_min, x); };
  return mms;
}

double coupled_step(double h, Coupling coupling) {
  switch (coupling) {
    case Coupling::H2:
      return h * h;
    case Coupling::H3:
      return h * h * h;
    case Coupling::Equal:
      return h;
  }
  return h;
}

void StudyConfig::validate() const {
  solver.validate();
  if (!(final_time > 0.0)) throw InvalidArgument("final time must be positive");
  if (kind == StudyKind::Convergence || kind == StudyKind::Characteristics) {
    if (levels.empty()) throw InvalidArgument("study needs at least one mesh level");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (!(levels[i] > 0.0)) throw InvalidArgument("mesh levels must be positive");
      if (i > 0 && !(levels[i] < levels[i - 1])) {
        throw InvalidArgument("mesh levels must be strictly decreasing in h");
      }
    }
  }
  for (int p : workers) {
    if (p < 1) throw InvalidArgument("worker counts must be >= 1");
  }
  if (kind == StudyKind::Scaling) {
    if (workers.empty()) throw InvalidArgument("scaling study needs --workers");
    if (scaling_mode == ScalingMode::Weak && (block < 1 || steps < 1)) {
      throw InvalidArgument("weak scaling needs block >= 1 and steps >= 1");
    }
  }
}

LevelResult surface_errors(const MmsProblem& mms, const SpatialMesh& mesh, const BasisSet& basis,
                           const LGrid& lgrid, double t, const SolutionSurface& surface) {
  const QuadratureCache cache(mesh, basis, load_quadrature_degree(basis.order()));
  LevelResult r;
  for (int m = 1; m <= lgrid.cells(); ++m) {
    const ErrorNorms e = error_norms(cache, surface.slices[static_cast<std::size_t>(m)].values,
                                     mms.exact_field(t, lgrid.node(m)));
    r.l2 = std::max(r.l2, e.l2);
    r.h1 = std::max(r.h1, e.h1);
  }
  return r;
}

namespace {

struct LevelSetup {
  double h, tau, iota;
  LGrid lgrid;
  TimeGrid tgrid;
};

LevelSetup setup_level(const ProblemSpec& spec, double h, double tau, double iota, double T) {
  LevelSetup s{h, tau, iota, LGrid::with_spacing(spec.l_min, spec.l_max, iota),
               TimeGrid::with_step(T, tau)};
  require_cfl(tau, s.lgrid, spec.growth);
  return s;
}

LevelResult run_level(const MmsProblem& mms, ElementOrder order, const LevelSetup& level,
                      int workers, const SolverConfig& solver) {
  const SpatialMesh mesh = build_structured_mesh(mms.spec.domain, level.h, order);
  const BasisSet basis(order);
  SolutionSurface surface;
  if (workers > 0) {
    surface = run_pipeline(mms.spec, mesh, basis, level.lgrid, level.tgrid, workers, solver).surface;
  } else {
    surface = run_sequential(mms.spec, mesh, basis, level.lgrid, level.tgrid, {solver, {}});
  }
  return surface_errors(mms, mesh, basis, level.lgrid, level.tgrid.final_time(), surface);
}

std::vector<ConvergenceRow> run_study(const StudyConfig& config, ElementOrder order,
                                      Coupling coupling) {
  config.validate();
  MmsProblem mms = mms_problem();
  mms.spec.final_time = config.final_time;
  validate_problem(mms.spec);

  // Reject the whole study before running anything.
  std::vector<LevelSetup> levels;
  for (double h : config.levels) {
    const double step = coupled_step(h, coupling);
    levels.push_back(setup_level(mms.spec, h, step, step, config.final_time));
  }
  const int workers = config.workers.empty() ? 0 : config.workers.front();

  std::vector<ConvergenceRow> rows;
  for (const LevelSetup& level : levels) {
    const LevelResult r = run_level(mms, order, level, workers, config.solver);
    ConvergenceRow row;
    row.h = level.h;
    row.tau = level.tau;
    row.iota = level.iota;
    row.l2_error = r.l2;
    row.h1_error = r.h1;
    rows.push_back(row);
  }
  fill_orders(rows);
  return rows;
}

}  // namespace

LevelResult run_mms_level(const MmsProblem& mms, ElementOrder order, double h, double tau,
                          double iota, int workers, const SolverConfig& solver) {
  const LevelSetup level = setup_level(mms.spec, h, tau, iota, mms.spec.final_time);
  return run_level(mms, order, level, workers, solver);
}

void fill_orders(std::vector<ConvergenceRow>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0) {
      rows[i].l2_order.reset();
      rows[i].h1_order.reset();
      continue;
    }
    rows[i].l2_order = std::log2(rows[i - 1].l2_error / rows[i].l2_error);
    rows[i].h1_order = std::log2(rows[i - 1].h1_error / rows[i].h1_error);
  }
}

std::vector<ConvergenceRow> convergence_study(const StudyConfig& config) {
  return run_study(config, config.order, config.coupling);
}

std::vector<ConvergenceRow> characteristics_study(const StudyConfig& config) {
  if (config.order != ElementOrder::P2) {
    throw InvalidArgument("the characteristics study uses P2 elements");
  }
  return run_study(config, ElementOrder::P2, Coupling::Equal);
}

ScalingResult scaling_study(const StudyConfig& config) {
  config.validate();
  MmsProblem mms = mms_problem();
  std::vector<int> counts = config.workers;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());

  ScalingResult result;
  result.mode = config.scaling_mode;
  const SpatialMesh mesh = build_structured_mesh(mms.spec.domain, config.h, config.order);
  const BasisSet basis(config.order);

  std::optional<double> baseline;
  for (int p : counts) {
    std::optional<LGrid> lgrid;
    std::optional<TimeGrid> tgrid;
    if (config.scaling_mode == ScalingMode::Strong) {
      lgrid = LGrid::with_spacing(mms.spec.l_min, mms.spec.l_max, config.iota);
      tgrid = TimeGrid::with_step(config.final_time, config.tau);
    } else {
      const int cells = p * config.block - 1;
      if (cells < 1) throw InvalidArgument("weak scaling needs P * block >= 2");
      lgrid = LGrid(mms.spec.l_min, mms.spec.l_max, cells);
      tgrid = TimeGrid(config.steps * lgrid->iota(), config.steps);
    }
    require_cfl(tgrid->tau(), *lgrid, mms.spec.growth);
    mms.spec.final_time = tgrid->final_time();
    const PipelineRun run = run_pipeline(mms.spec, mesh, basis, *lgrid, *tgrid, p, config.solver);
    if (!baseline) baseline = run.total_seconds;
    result.rows.push_back(timing_report(run, baseline));
    result.message_counts.push_back(run.message_count);
  }

  std::vector<std::string> notes;
  const unsigned hw = std::thread::hardware_concurrency();
  if (!counts.empty() && hw > 0 && static_cast<unsigned>(counts.back()) > hw) {
    notes.push_back("oversubscribed: up to " + std::to_string(counts.back()) + " workers on " +
                    std::to_string(hw) + " hardware threads");
  }
  if (!counts.empty() && counts.front() != 1 && config.scaling_mode == ScalingMode::Strong) {
    notes.push_back("speedup relative to P=" + std::to_string(counts.front()));
  }
  for (std::size_t i = 0; i < notes.size(); ++i) result.note += (i ? "; " : "") + notes[i];
  return result;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << "h,tau,iota,l2_error,l2_order,h1_error,h1_order\n";
  char buf[256];
  auto order = [](const std::optional<double>& o) {
    if (!o) return std::string();
    char b[32];
    std::snprintf(b, sizeof b, "%.4f", *o);
    return std::string(b);
  };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.5e,%s,%.5e,%s\n", r.h, r.tau, r.iota,
                  r.l2_error, order(r.l2_order).c_str(), r.h1_error, order(r.h1_order).c_str());
    out << buf;
  }
}

std::vector<ConvergenceRow> read_convergence_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "h,tau,iota,l2_error,l2_order,h1_error,h1_order") {
    throw InvalidArgument("unexpected convergence CSV header");
  }
  std::vector<ConvergenceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) throw InvalidArgument("malformed convergence CSV row: " + line);
    auto number = [&](const std::string& s) {
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(s, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != s.size()) throw InvalidArgument("malformed number '" + s + "'");
      return v;
    };
    auto optional_number = [&](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return number(s);
    };
    rows.push_back({number(cells[0]), number(cells[1]), number(cells[2]), number(cells[3]),
                    optional_number(cells[4]), number(cells[5]), optional_number(cells[6])});
  }
  return rows;
}

}  // namespace pbe
