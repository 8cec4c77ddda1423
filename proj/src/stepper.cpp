#include "pbe/stepper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ostream>
#include <string>
#include <utility>

#include "pbe/error.hpp"

namespace pbe {

ScalarField ProblemSpec::init_field(double l) const {
  return {[this, l](Point2 x) { return z_init(l, x); },
          [this, l](Point2 x) { return z_init_grad(l, x); }};
}

ScalarField ProblemSpec::bdry_field(double t) const {
  return {[this, t](Point2 x) { return z_bdry(t, x); },
          [this, t](Point2 x) { return z_bdry_grad(t, x); }};
}

void validate_problem(const ProblemSpec& spec) {
  constexpr double kTol = 1e-10;
  constexpr int kSamples = 16;
  if (!(spec.epsilon > 0.0)) throw InvalidArgument("diffusion coefficient must be positive");
  if (!(spec.final_time > 0.0)) throw InvalidArgument("final time must be positive");
  if (!(spec.l_max > spec.l_min)) throw InvalidArgument("internal-coordinate interval is empty");
  if (!spec.growth || !spec.source || !spec.z_init || !spec.z_init_grad || !spec.z_bdry ||
      !spec.z_bdry_grad) {
    throw InvalidArgument("problem data is incomplete");
  }
  const Rectangle& d = spec.domain;
  for (int j = 0; j <= kSamples; ++j) {
    for (int i = 0; i <= kSamples; ++i) {
      const Point2 x{d.x0 + d.width() * i / kSamples, d.y0 + d.height() * j / kSamples};
      const double gap = spec.z_init(spec.l_min, x) - spec.z_bdry(0.0, x);
      if (std::abs(gap) > kTol) {
        throw IncompatibleData("z_init(l_min, x) differs from z_bdry(0, x) by " +
                               std::to_string(gap));
      }
    }
  }
  for (int k = 0; k <= kSamples; ++k) {
    const double s = static_cast<double>(k) / kSamples;
    const std::array<Point2, 4> edge{Point2{d.x0 + d.width() * s, d.y0},
                                     Point2{d.x0 + d.width() * s, d.y1},
                                     Point2{d.x0, d.y0 + d.height() * s},
                                     Point2{d.x1, d.y0 + d.height() * s}};
    for (int r = 0; r <= 4; ++r) {
      const double l = spec.l_min + (spec.l_max - spec.l_min) * r / 4;
      const double t = spec.final_time * r / 4;
      for (const Point2& x : edge) {
        if (std::abs(spec.z_init(l, x)) > kTol || std::abs(spec.z_bdry(t, x)) > kTol) {
          throw IncompatibleData("initial or inflow data does not vanish on the spatial boundary");
        }
      }
    }
  }
}

StepOperators precompute_operators(const SpatialMesh& mesh, const BasisSet& basis,
                                   const ProblemSpec& spec, double tau,
                                   const SolverConfig& config) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  SparseMatrix mass = assemble_mass(mesh, basis);
  SparseMatrix system = mass.scaled(1.0 / tau) + assemble_stiffness(mesh, basis, spec.epsilon) +
                        assemble_convection(mesh, basis, spec.b);
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  SparseMatrix eliminated =
      apply_dirichlet(system, Vector::Zero(n), mesh.boundary_mask(), Vector::Zero(n)).matrix;
  LinearSolver solver(eliminated, config);
  return {tau, std::move(mass), std::move(system), std::move(eliminated), std::move(solver)};
}

Scheme::Scheme(const ProblemSpec& spec, const SpatialMesh& mesh, const BasisSet& basis,
               LGrid lgrid, TimeGrid tgrid, const SolverConfig& config)
    : spec_(&spec),
      mesh_(&mesh),
      basis_(basis),
      lgrid_(lgrid),
      tgrid_(tgrid),
      ops_(precompute_operators(mesh, basis, spec, tgrid.tau(), config)),
      load_cache_(mesh, basis, load_quadrature_degree(basis.order())),
      projector_(mesh, basis, config) {
  backtraces_.resize(static_cast<std::size_t>(lgrid_.cells()) + 1);
  for (int m = 1; m <= lgrid_.cells(); ++m) {
    backtraces_[static_cast<std::size_t>(m)] = backtrace(m, tgrid_.tau(), lgrid_, spec.growth);
  }
}

FieldSlice Scheme::initial_slice(int m) const {
  return {projector_.project(spec_->init_field(lgrid_.node(m))), 0, m};
}

FieldSlice Scheme::boundary_slice(int n) const {
  return {projector_.project(spec_->bdry_field(tgrid_.time(n))), n, 0};
}

FieldSlice Scheme::step_slice(int n, int m, const FieldSlice& prev_left,
                              const FieldSlice& prev_same) const {
  if (m < 1 || m > lgrid_.cells()) {
    throw InvalidArgument("step_slice index m=" + std::to_string(m) + " outside [1, M]");
  }
  const double alpha = backtraces_[static_cast<std::size_t>(m)].alpha;
  const FieldSlice foot = combine_backtraced(prev_left, prev_same, alpha);

  const double t = tgrid_.time(n);
  const double l = lgrid_.node(m);
  const auto& f = spec_->source;
  Vector rhs = ops_.mass * foot.values;
  rhs /= ops_.tau;
  rhs += load_cache_.load([&f, t, l](Point2 x) { return f(t, l, x); });
  for (std::size_t i = 0; i < mesh_->node_count(); ++i) {
    if (mesh_->on_boundary(i)) rhs[static_cast<Eigen::Index>(i)] = 0.0;
  }

  FieldSlice out;
  out.n = n;
  out.m = m;
  try {
    out.values = ops_.solver.solve(rhs);
  } catch (const SolverError& e) {
    throw SolverError(std::string(e.what()) + " at (n=" + std::to_string(n) +
                          ", m=" + std::to_string(m) + ")",
                      e.residual());
  }
  for (std::size_t i = 0; i < mesh_->node_count(); ++i) {
    if (mesh_->on_boundary(i)) out.values[static_cast<Eigen::Index>(i)] = 0.0;
  }
  return out;
}

SolutionSurface Scheme::initialize() const {
  SolutionSurface s;
  s.n = 0;
  s.slices.reserve(static_cast<std::size_t>(lgrid_.cells()) + 1);
  s.slices.push_back(boundary_slice(0));
  for (int m = 1; m <= lgrid_.cells(); ++m) s.slices.push_back(initial_slice(m));
  return s;
}

SolutionSurface initialize(const SpatialMesh& mesh, const BasisSet& basis, const ProblemSpec& spec,
                           const LGrid& lgrid, const SolverConfig& config) {
  RitzProjector projector(mesh, basis, config);
  SolutionSurface s;
  s.slices.push_back({projector.project(spec.bdry_field(0.0)), 0, 0});
  for (int m = 1; m <= lgrid.cells(); ++m) {
    s.slices.push_back({projector.project(spec.init_field(lgrid.node(m))), 0, m});
  }
  return s;
}

FieldSlice boundary_slice(int n, const SpatialMesh& mesh, const BasisSet& basis,
                          const ProblemSpec& spec, const TimeGrid& tgrid,
                          const SolverConfig& config) {
  FieldSlice s = ritz_projection(mesh, basis, spec.bdry_field(tgrid.time(n)), config);
  s.n = n;
  s.m = 0;
  return s;
}

SolutionSurface run_sequential(const Scheme& scheme, int steps,
                               const std::function<void(const SolutionSurface&)>& on_level) {
  if (steps < 0 || steps > scheme.tgrid().steps()) {
    throw InvalidArgument("step count outside [0, N]");
  }
  const int cells = scheme.lgrid().cells();
  SolutionSurface prev = scheme.initialize();
  if (on_level) on_level(prev);
  SolutionSurface cur;
  cur.slices.resize(prev.slices.size());
  for (int n = 1; n <= steps; ++n) {
    cur.n = n;
    cur.slices[0] = scheme.boundary_slice(n);
    for (int m = 1; m <= cells; ++m) {
      cur.slices[static_cast<std::size_t>(m)] =
          scheme.step_slice(n, m, prev.slices[static_cast<std::size_t>(m) - 1],
                            prev.slices[static_cast<std::size_t>(m)]);
    }
    std::swap(prev, cur);
    if (on_level) on_level(prev);
  }
  return prev;
}

SolutionSurface run_sequential(const ProblemSpec& spec, const SpatialMesh& mesh,
                               const BasisSet& basis, const LGrid& lgrid, const TimeGrid& tgrid,
                               const RunOptions& options) {
  const Scheme scheme(spec, mesh, basis, lgrid, tgrid, options.solver);
  return run_sequential(scheme, tgrid.steps(), options.on_level);
}

void write_snapshot(std::ostream& out, const SolutionSurface& surface) {
  char buf[96];
  for (const FieldSlice& s : surface.slices) {
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d %lld %.16e\n", s.m, static_cast<long long>(i),
                    s.values[i]);
      out << buf;
    }
  }
}

bool bitwise_equal(const SolutionSurface& a, const SolutionSurface& b) {
  if (a.n != b.n || a.slices.size() != b.slices.size()) return false;
  for (std::size_t k = 0; k < a.slices.size(); ++k) {
    const Vector& u = a.slices[k].values;
    const Vector& v = b.slices[k].values;
    if (a.slices[k].m != b.slices[k].m || u.size() != v.size()) return false;
    if (std::memcmp(u.data(), v.data(), static_cast<std::size_t>(u.size()) * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

double max_abs_difference(const SolutionSurface& a, const SolutionSurface& b) {
  if (a.slices.size() != b.slices.size()) throw InvalidArgument("surfaces differ in slice count");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.slices.size(); ++k) {
    worst = std::max(worst, (a.slices[k].values - b.slices[k].values).lpNorm<Eigen::Infinity>());
  }
  return worst;
}

}  // namespace pbe
