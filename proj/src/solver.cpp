#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "pbe/error.hpp"
#include "pbe/fem.hpp"

namespace pbe {

using ColMajor = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

struct LinearSolver::Impl {
  SparseMatrix::Storage matrix;
  std::optional<Eigen::SparseLU<ColMajor, Eigen::COLAMDOrdering<int>>> lu;
  std::optional<Eigen::BiCGSTAB<SparseMatrix::Storage, Eigen::IncompleteLUT<double, int>>> krylov;
};

LinearSolver::LinearSolver(const SparseMatrix& matrix, SolverConfig config)
    : impl_(std::make_unique<Impl>()), config_(config) {
  config_.validate();
  if (matrix.dimension() == 0) throw InvalidArgument("empty system matrix");
  impl_->matrix = matrix.storage();
  if (config_.mode == SolverMode::Direct) {
    auto& lu = impl_->lu.emplace();
    const ColMajor a(impl_->matrix);
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) {
      throw SolverError("sparse LU factorization failed: " + lu.lastErrorMessage(),
                        std::numeric_limits<double>::quiet_NaN());
    }
  } else {
    auto& krylov = impl_->krylov.emplace();
    // The recursive residual drifts from the true one; leave headroom for the check in solve().
    krylov.setTolerance(0.5 * config_.tolerance);
    krylov.setMaxIterations(config_.max_iterations);
    krylov.compute(impl_->matrix);
    if (krylov.info() != Eigen::Success) {
      throw SolverError("incomplete LU preconditioner setup failed",
                        std::numeric_limits<double>::quiet_NaN());
    }
  }
}

LinearSolver::~LinearSolver() = default;
LinearSolver::LinearSolver(LinearSolver&&) noexcept = default;
LinearSolver& LinearSolver::operator=(LinearSolver&&) noexcept = default;

Vector LinearSolver::solve(const Vector& rhs) const {
  if (rhs.size() != impl_->matrix.rows()) throw InvalidArgument("rhs length mismatch");
  if (impl_->lu) {
    Vector x = impl_->lu->solve(rhs);
    if (!x.allFinite()) throw SolverError("direct solve produced non-finite values", INFINITY);
    return x;
  }
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return Vector::Zero(rhs.size());
  Vector x = impl_->krylov->solve(rhs);
  const double residual = (impl_->matrix * x - rhs).norm() / bnorm;
  if (!(residual <= config_.tolerance)) {
    throw SolverError("BiCGSTAB stopped after " + std::to_string(impl_->krylov->iterations()) +
                          " iterations at relative residual " + std::to_string(residual),
                      residual);
  }
  return x;
}

}  // namespace pbe
