#pragma once

#include <functional>
#include <iosfwd>
#include <vector>

#include "pbe/characteristics.hpp"
#include "pbe/fem.hpp"

namespace pbe {

/// One population balance problem
///   z_t + G(l) z_l - eps Lap_x z + b . grad_x z = f
/// on (0,T] x [l_min,l_max] x domain, with z = z_init at t = 0, z = z_bdry at
/// l = l_min and z = 0 on the spatial boundary.
struct ProblemSpec {
  Rectangle domain{};
  double l_min = 0.0;
  double l_max = 1.0;
  double final_time = 1.0;
  double epsilon = 1.0;
  /// Constant, hence divergence-free, spatial velocity.
  Vec2 b{};
  GrowthRate growth;
  std::function<double(double t, double l, Point2 x)> source;
  std::function<double(double l, Point2 x)> z_init;
  std::function<Vec2(double l, Point2 x)> z_init_grad;
  std::function<double(double t, Point2 x)> z_bdry;
  std::function<Vec2(double t, Point2 x)> z_bdry_grad;

  ScalarField init_field(double l) const;
  ScalarField bdry_field(double t) const;
};

/// Checks epsilon > 0, z_init(l_min, .) == z_bdry(0, .) and that z_init and
/// z_bdry vanish on the spatial boundary, all by sampling (tolerance 1e-10).
/// Throws InvalidArgument or IncompatibleData.
void validate_problem(const ProblemSpec& spec);

/// Slices z_{m,h}^n for m = 0..M at one time level.
struct SolutionSurface {
  int n = 0;
  std::vector<FieldSlice> slices;
};

/// Operators shared by every (n, m) solve: the mass matrix, the system
/// M/tau + A_eps + B before elimination, and its eliminated factorization.
struct StepOperators {
  double tau = 0.0;
  SparseMatrix mass;
  SparseMatrix system;
  SparseMatrix eliminated;
  LinearSolver solver;
};

StepOperators precompute_operators(const SpatialMesh& mesh, const BasisSet& basis,
                                   const ProblemSpec& spec, double tau,
                                   const SolverConfig& config = {});

/// All per-run state needed to produce any slice of the fully discrete
/// scheme: operators, load quadrature, the Ritz projector and the
/// characteristic backtraces. Each pipeline worker owns one.
class Scheme {
 public:
  Scheme(const ProblemSpec& spec, const SpatialMesh& mesh, const BasisSet& basis, LGrid lgrid,
         TimeGrid tgrid, const SolverConfig& config = {});

  /// Ritz projection of z_init(l_m, .), m >= 1.
  FieldSlice initial_slice(int m) const;
  /// Ritz projection of z_bdry(t^n, .), tagged m = 0.
  FieldSlice boundary_slice(int n) const;
  /// z_{m,h}^n from the level n-1 slices at m-1 and m.
  FieldSlice step_slice(int n, int m, const FieldSlice& prev_left, const FieldSlice& prev_same) const;

  SolutionSurface initialize() const;

  const ProblemSpec& spec() const { return *spec_; }
  const SpatialMesh& mesh() const { return *mesh_; }
  const BasisSet& basis() const { return basis_; }
  const LGrid& lgrid() const { return lgrid_; }
  const TimeGrid& tgrid() const { return tgrid_; }
  const StepOperators& operators() const { return ops_; }
  const Backtrace& backtrace_at(int m) const { return backtraces_[static_cast<std::size_t>(m)]; }

 private:
  const ProblemSpec* spec_;
  const SpatialMesh* mesh_;
  BasisSet basis_;
  LGrid lgrid_;
  TimeGrid tgrid_;
  StepOperators ops_;
  QuadratureCache load_cache_;
  RitzProjector projector_;
  std::vector<Backtrace> backtraces_;  // index 0 unused
};

SolutionSurface initialize(const SpatialMesh& mesh, const BasisSet& basis, const ProblemSpec& spec,
                           const LGrid& lgrid, const SolverConfig& config = {});

FieldSlice boundary_slice(int n, const SpatialMesh& mesh, const BasisSet& basis,
                          const ProblemSpec& spec, const TimeGrid& tgrid,
                          const SolverConfig& config = {});

struct RunOptions {
  SolverConfig solver{};
  /// Called with the completed surface of every level n = 0..N.
  std::function<void(const SolutionSurface&)> on_level;
};

/// Advances all slices level by level, keeping only levels n-1 and n.
SolutionSurface run_sequential(const ProblemSpec& spec, const SpatialMesh& mesh,
                               const BasisSet& basis, const LGrid& lgrid, const TimeGrid& tgrid,
                               const RunOptions& options = {});

/// Advances `steps` levels (steps <= N); steps = 0 returns the initial surface.
SolutionSurface run_sequential(const Scheme& scheme, int steps,
                               const std::function<void(const SolutionSurface&)>& on_level = {});

/// Rows `m node_index value`, 17 significant digits.
void write_snapshot(std::ostream& out, const SolutionSurface& surface);

/// True when both surfaces have identical shape and identical bytes.
bool bitwise_equal(const SolutionSurface& a, const SolutionSurface& b);
/// Largest nodal |a - b| over all slices.
double max_abs_difference(const SolutionSurface& a, const SolutionSurface& b);

}  // namespace pbe
