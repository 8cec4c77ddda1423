#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pbe/pipeline.hpp"
#include "pbe/stepper.hpp"

namespace pbe {

/// Manufactured problem on [0,1]^2 x [0,1], T = 1, eps = 1, b = (1,1),
/// G(l) = 1/2 + 2(1-l)l, with exact solution
///   z = exp(-a t) sin(pi l) sin(pi x) sin(pi y),  a = 0.1,
/// and the source obtained by differentiating z.
struct MmsProblem {
  ProblemSpec spec;
  double decay = 0.1;

  double exact(double t, double l, Point2 x) const;
  Vec2 exact_gradient(double t, double l, Point2 x) const;
  ScalarField exact_field(double t, double l) const;
};

MmsProblem mms_problem();

enum class StudyKind { Single, Convergence, Characteristics, Scaling };
enum class Coupling { H2, H3, Equal };
enum class ScalingMode { Strong, Weak };

/// tau = iota = h^2, h^3 or h.
double coupled_step(double h, Coupling coupling);

struct StudyConfig {
  StudyKind kind = StudyKind::Single;
  ElementOrder order = ElementOrder::P1;
  /// Mesh sizes, strictly decreasing.
  std::vector<double> levels;
  Coupling coupling = Coupling::H2;
  /// Pipeline worker counts; empty runs the sequential stepper. Convergence
  /// studies use the first entry, scaling studies sweep all of them.
  std::vector<int> workers;
  double final_time = 1.0;
  SolverConfig solver{};

  // single and strong-scaling runs
  double h = 0.125;
  double tau = 0.0625;
  double iota = 0.0625;

  // weak scaling: per-worker block of internal indices and step count;
  // tau = iota = 1/(P*block - 1), T = steps * tau.
  ScalingMode scaling_mode = ScalingMode::Strong;
  int block = 8;
  int steps = 8;

  std::string output_path;
  std::vector<int> snapshot_levels;
  std::string snapshot_prefix = "snapshot";

  /// Throws InvalidArgument for inconsistent settings (e.g. levels not
  /// strictly decreasing).
  void validate() const;
};

struct ConvergenceRow {
  double h = 0.0;
  double tau = 0.0;
  double iota = 0.0;
  double l2_error = 0.0;
  std::optional<double> l2_order;
  double h1_error = 0.0;
  std::optional<double> h1_order;
};

struct LevelResult {
  double l2 = 0.0;  // max over m = 1..M
  double h1 = 0.0;
};

/// Final-time errors of the manufactured problem, max over m = 1..M of the
/// per-slice L2 and H1 norms.
LevelResult surface_errors(const MmsProblem& mms, const SpatialMesh& mesh, const BasisSet& basis,
                           const LGrid& lgrid, double t, const SolutionSurface& surface);

/// Runs one (h, tau, iota) configuration of the manufactured problem with the
/// sequential stepper (workers <= 0) or the pipeline.
LevelResult run_mms_level(const MmsProblem& mms, ElementOrder order, double h, double tau,
                          double iota, int workers, const SolverConfig& solver = {});

/// Throws CflViolation naming the first offending level before running anything.
std::vector<ConvergenceRow> convergence_study(const StudyConfig& config);
/// convergence_study with P2 elements and h = iota = tau; throws
/// InvalidArgument for P1.
std::vector<ConvergenceRow> characteristics_study(const StudyConfig& config);

/// log2 orders between successive rows; the first row has none.
void fill_orders(std::vector<ConvergenceRow>& rows);

struct ScalingResult {
  ScalingMode mode = ScalingMode::Strong;
  std::vector<TimingReport> rows;
  std::vector<std::size_t> message_counts;
  /// Non-empty when the sweep used more workers than hardware threads or the
  /// baseline differs from P = 1.
  std::string note;
};

ScalingResult scaling_study(const StudyConfig& config);

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows);
/// Throws InvalidArgument on a malformed header or row.
std::vector<ConvergenceRow> read_convergence_csv(std::istream& in);

/// Command-line entry point; returns the process exit status.
int cli_main(int argc, const char* const* argv);

/// Exit statuses of cli_main.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 2,
  kExitConfig = 3,
  kExitCfl = 4,
  kExitSolver = 5,
  kExitData = 6,
  kExitRuntime = 7,
};

}  // namespace pbe
