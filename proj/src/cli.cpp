#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "pbe/error.hpp"
#include "pbe/harness.hpp"

namespace pbe {

namespace {

void print_convergence(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-12s %-12s %-12s %-12s %-8s %-12s %-8s\n", "h", "tau", "iota",
                "|e|_0", "order", "|e|_1", "order");
  out << buf;
  for (const auto& r : rows) {
    auto order = [](const std::optional<double>& o) {
      if (!o) return std::string("-");
      char b[32];
      std::snprintf(b, sizeof b, "%.4f", *o);
      return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "%-12.5g %-12.5g %-12.5g %-12.4e %-8s %-12.4e %-8s\n", r.h, r.tau,
                  r.iota, r.l2_error, order(r.l2_order).c_str(), r.h1_error,
                  order(r.h1_order).c_str());
    out << buf;
  }
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open output file '" + path + "'");
  return out;
}

void write_snapshots(const StudyConfig& config, const std::map<int, SolutionSurface>& snaps) {
  for (const auto& [n, surface] : snaps) {
    std::ofstream out = open_output(config.snapshot_prefix + "_n" + std::to_string(n) + ".txt");
    write_snapshot(out, surface);
  }
}

int run_single(const StudyConfig& config, const std::string& dump_matrix) {
  MmsProblem mms = mms_problem();
  mms.spec.final_time = config.final_time;
  validate_problem(mms.spec);

  const LGrid lgrid = LGrid::with_spacing(mms.spec.l_min, mms.spec.l_max, config.iota);
  const TimeGrid tgrid = TimeGrid::with_step(config.final_time, config.tau);
  require_cfl(tgrid.tau(), lgrid, mms.spec.growth);
  const SpatialMesh mesh = build_structured_mesh(mms.spec.domain, config.h, config.order);
  const BasisSet basis(config.order);

  if (!dump_matrix.empty()) {
    const StepOperators ops = precompute_operators(mesh, basis, mms.spec, tgrid.tau(), config.solver);
    std::ofstream out = open_output(dump_matrix);
    write_matrix_coo(out, ops.eliminated);
  }

  const int workers = config.workers.empty() ? 0 : config.workers.front();
  SolutionSurface surface;
  std::map<int, SolutionSurface> snaps;
  if (workers > 0) {
    PipelineOptions options;
    options.snapshot_levels = config.snapshot_levels;
    PipelineRun run = run_pipeline(mms.spec, mesh, basis, lgrid, tgrid, workers, config.solver, options);
    std::cout << "pipeline: " << workers << " workers, " << run.message_count << " messages, "
              << run.total_seconds << " s\n";
    surface = std::move(run.surface);
    snaps = std::move(run.snapshots);
  } else {
    RunOptions options;
    options.solver = config.solver;
    options.on_level = [&](const SolutionSurface& s) {
      if (std::find(config.snapshot_levels.begin(), config.snapshot_levels.end(), s.n) !=
          config.snapshot_levels.end()) {
        snaps[s.n] = s;
      }
    };
    surface = run_sequential(mms.spec, mesh, basis, lgrid, tgrid, options);
    std::cout << "sequential run\n";
  }
  write_snapshots(config, snaps);

  const LevelResult err = surface_errors(mms, mesh, basis, lgrid, tgrid.final_time(), surface);
  std::vector<ConvergenceRow> rows{{config.h, tgrid.tau(), lgrid.iota(), err.l2, {}, err.h1, {}}};
  std::cout << "M = " << lgrid.cells() << ", N = " << tgrid.steps() << ", DOFs = " << mesh.node_count()
            << "\n";
  print_convergence(std::cout, rows);
  if (!config.output_path.empty()) {
    std::ofstream out = open_output(config.output_path);
    write_convergence_csv(out, rows);
  }
  return kExitOk;
}

int run_study(const StudyConfig& config) {
  std::vector<ConvergenceRow> rows = config.kind == StudyKind::Characteristics
                                         ? characteristics_study(config)
                                         : convergence_study(config);
  print_convergence(std::cout, rows);
  if (!config.output_path.empty()) {
    std::ofstream out = open_output(config.output_path);
    write_convergence_csv(out, rows);
  }
  return kExitOk;
}

int run_scaling(const StudyConfig& config) {
  const ScalingResult result = scaling_study(config);
  write_timing_csv(std::cout, result.rows);
  if (!result.note.empty()) std::cout << "note: " << result.note << "\n";
  if (!config.output_path.empty()) {
    std::ofstream out = open_output(config.output_path);
    write_timing_csv(out, result.rows);
  }
  return kExitOk;
}

// Maps an exception to its diagnostic and exit status; pipeline failures are
// classified by the exception raised inside the worker.
int report_failure(std::exception_ptr error, const std::string& context) {
  try {
    std::rethrow_exception(error);
  } catch (const WorkerFailure& e) {
    if (e.cause()) return report_failure(e.cause(), e.what() + std::string(" | "));
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const CflViolation& e) {
    std::cerr << "error: CFL condition violated: " << context << e.what() << "\n";
    return kExitCfl;
  } catch (const SolverError& e) {
    std::cerr << "error: linear solver failure: " << context << e.what() << "\n";
    return kExitSolver;
  } catch (const IncompatibleData& e) {
    std::cerr << "error: incompatible problem data: " << context << e.what() << "\n";
    return kExitData;
  } catch (const SizingError& e) {
    std::cerr << "error: grid sizing: " << context << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: invalid configuration: " << context << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << context << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Population balance solver: method of characteristics in (t, l), finite elements in x"};

  std::string study = "single";
  std::string element;
  std::vector<int> levels{2, 3, 4};
  std::string coupling = "h2";
  std::string solver = "direct";
  std::string mode = "strong";
  std::string dump_matrix;
  StudyConfig config;

  app.set_help_flag("--help", "Print this help message and exit");
  app.set_config("--config", "", "Read options from a key = value file (flags win)");
  app.add_option("--study", study, "single | convergence | characteristics | scaling")
      ->check(CLI::IsMember({"single", "convergence", "characteristics", "scaling"}));
  app.add_option("--element", element, "p1 | p2")->check(CLI::IsMember({"p1", "p2"}));
  app.add_option("--h", config.h, "Mesh size");
  app.add_option("--tau", config.tau, "Time step");
  app.add_option("--iota", config.iota, "Internal-coordinate spacing");
  app.add_option("--levels", levels, "Mesh levels as exponents k of h = 2^-k, e.g. 2,3,4")
      ->delimiter(',');
  app.add_option("--coupling", coupling, "tau = iota = h^2 | h^3 | h")
      ->check(CLI::IsMember({"h2", "h3", "equal"}));
  app.add_option("--workers", config.workers, "Pipeline worker count (list for scaling studies)")
      ->delimiter(',');
  app.add_option("--T", config.final_time, "Final time");
  app.add_option("--out", config.output_path, "CSV output path");
  app.add_option("--snapshots", config.snapshot_levels, "Time levels to export, e.g. 0,8")
      ->delimiter(',');
  app.add_option("--snapshot-prefix", config.snapshot_prefix, "Snapshot file prefix");
  app.add_option("--solver", solver, "direct | iterative")->check(CLI::IsMember({"direct", "iterative"}));
  app.add_option("--tol", config.solver.tolerance, "Iterative relative residual tolerance");
  app.add_option("--max-iter", config.solver.max_iterations, "Iterative iteration limit");
  app.add_option("--mode", mode, "Scaling mode: strong | weak")->check(CLI::IsMember({"strong", "weak"}));
  app.add_option("--block", config.block, "Weak scaling: internal indices per worker");
  app.add_option("--steps", config.steps, "Weak scaling: time steps");
  app.add_option("--dump-matrix", dump_matrix, "Write the eliminated system matrix (single study)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ExtrasError& e) {
    std::cerr << "error: unknown argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: invalid value: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    static const std::map<std::string, StudyKind> kinds{{"single", StudyKind::Single},
                                                        {"convergence", StudyKind::Convergence},
                                                        {"characteristics", StudyKind::Characteristics},
                                                        {"scaling", StudyKind::Scaling}};
    config.kind = kinds.at(study);
    if (element.empty()) element = config.kind == StudyKind::Characteristics ? "p2" : "p1";
    config.order = element == "p2" ? ElementOrder::P2 : ElementOrder::P1;
    config.coupling = coupling == "h2" ? Coupling::H2 : coupling == "h3" ? Coupling::H3 : Coupling::Equal;
    config.solver.mode = solver == "iterative" ? SolverMode::Iterative : SolverMode::Direct;
    config.scaling_mode = mode == "weak" ? ScalingMode::Weak : ScalingMode::Strong;
    config.levels.clear();
    for (int k : levels) config.levels.push_back(std::ldexp(1.0, -k));
    config.validate();

    switch (config.kind) {
      case StudyKind::Single:
        return run_single(config, dump_matrix);
      case StudyKind::Convergence:
      case StudyKind::Characteristics:
        return run_study(config);
      case StudyKind::Scaling:
        return run_scaling(config);
    }
    return kExitOk;
  } catch (...) {
    return report_failure(std::current_exception(), "");
  }
}

}  // namespace pbe
