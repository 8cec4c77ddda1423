#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "pbe/mesh.hpp"

namespace pbe {

using Vector = Eigen::VectorXd;

/// A scalar function of the spatial coordinate together with its gradient.
struct ScalarField {
  std::function<double(Point2)> value;
  std::function<Vec2(Point2)> gradient;
};

/// Square sparse matrix in compressed row storage.
class SparseMatrix {
 public:
  using Storage = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

  SparseMatrix() = default;
  explicit SparseMatrix(Storage storage);

  Eigen::Index dimension() const { return storage_.rows(); }
  Eigen::Index nonzeros() const { return storage_.nonZeros(); }
  /// Zero when (row, col) is not stored.
  double coeff(Eigen::Index row, Eigen::Index col) const { return storage_.coeff(row, col); }

  const Storage& storage() const { return storage_; }

  Vector operator*(const Vector& x) const { return storage_ * x; }
  SparseMatrix operator+(const SparseMatrix& other) const;
  SparseMatrix scaled(double factor) const;

  Eigen::MatrixXd to_dense() const { return Eigen::MatrixXd(storage_); }

  /// Largest |A(i,j) - A(j,i)| over stored entries.
  double asymmetry() const;
  /// True when every stored (i,j) also has (j,i) stored.
  bool structurally_symmetric() const;

 private:
  Storage storage_;
};

/// Nodal coefficient vector of z_{m,h}^n, tagged with its (n, m) indices.
struct FieldSlice {
  Vector values;
  int n = 0;
  int m = 0;
};

enum class SolverMode { Direct, Iterative };

struct SolverConfig {
  SolverMode mode = SolverMode::Direct;
  /// Relative residual ||Ax - b|| / ||b|| target for the iterative mode.
  double tolerance = 1e-10;
  int max_iterations = 2000;

  /// Throws InvalidArgument when tolerance is outside (0,1) or max_iterations < 1.
  void validate() const;
};

/// Affine map from the reference triangle to a physical triangle.
struct AffineMap {
  Point2 origin;
  double j11, j12, j21, j22;  // columns are v1 - v0 and v2 - v0
  double det;

  static AffineMap from_vertices(Point2 v0, Point2 v1, Point2 v2);
  Point2 map(double xi, double eta) const;
  /// J^{-T} g: physical gradient from a reference gradient.
  Vec2 physical_gradient(Vec2 ref) const;
};

// Element matrices on one triangle given by its three vertices.
Eigen::MatrixXd local_mass(const std::array<Point2, 3>& vertices, const BasisSet& basis,
                           const QuadRule& rule);
Eigen::MatrixXd local_stiffness(const std::array<Point2, 3>& vertices, const BasisSet& basis,
                                const QuadRule& rule, double epsilon);
/// Entry (i,j) = integral of (b . grad phi_j) phi_i.
Eigen::MatrixXd local_convection(const std::array<Point2, 3>& vertices, const BasisSet& basis,
                                 const QuadRule& rule, Vec2 b);

SparseMatrix assemble_mass(const SpatialMesh& mesh, const BasisSet& basis);
/// epsilon * integral grad phi_i . grad phi_j. Throws InvalidArgument for epsilon <= 0.
SparseMatrix assemble_stiffness(const SpatialMesh& mesh, const BasisSet& basis, double epsilon);
SparseMatrix assemble_convection(const SpatialMesh& mesh, const BasisSet& basis, Vec2 b);

/// Quadrature points, weights and mapped basis data of every element, cached
/// for repeated load assembly over the same mesh.
class QuadratureCache {
 public:
  QuadratureCache(const SpatialMesh& mesh, const BasisSet& basis, int quad_degree);

  std::size_t points_per_element() const { return nq_; }
  std::size_t dofs_per_element() const { return ndof_; }

  /// Entry i = integral of g phi_i.
  Vector load(const std::function<double(Point2)>& g) const;
  /// Entry i = integral of grad g . grad phi_i.
  Vector gradient_load(const std::function<Vec2(Point2)>& grad_g) const;

  const SpatialMesh& mesh() const { return *mesh_; }

  Point2 point(std::size_t e, std::size_t q) const { return points_[e * nq_ + q]; }
  double jxw(std::size_t e, std::size_t q) const { return jxw_[e * nq_ + q]; }
  double phi(std::size_t q, std::size_t i) const { return phi_[q * ndof_ + i]; }
  Vec2 grad(std::size_t e, std::size_t q, std::size_t i) const {
    return grad_[(e * nq_ + q) * ndof_ + i];
  }

 private:
  const SpatialMesh* mesh_;
  std::size_t nq_;
  std::size_t ndof_;
  std::vector<Point2> points_;
  std::vector<double> jxw_;
  std::vector<double> phi_;
  std::vector<Vec2> grad_;
};

/// Default quadrature degree for loads, projections and error norms: 2k+2.
inline int load_quadrature_degree(ElementOrder order) { return 2 * degree(order) + 2; }

/// Entry i approximates the integral of g phi_i; quad_degree <= 0 selects 2k+2.
Vector assemble_load(const SpatialMesh& mesh, const BasisSet& basis,
                     const std::function<double(Point2)>& g, int quad_degree = 0);

struct DirichletSystem {
  SparseMatrix matrix;
  Vector rhs;
};

/// Symmetric elimination: boundary rows and columns become identity, the
/// column coupling is moved to the right-hand side, boundary rhs entries take
/// the prescribed values. boundary_values is indexed by DOF and read only at
/// masked DOFs.
DirichletSystem apply_dirichlet(const SparseMatrix& matrix, const Vector& rhs,
                                std::span<const std::uint8_t> boundary_mask,
                                const Vector& boundary_values);

/// The rhs half of apply_dirichlet for a matrix that was already eliminated;
/// `original` is the matrix before elimination.
Vector apply_dirichlet_rhs(const SparseMatrix& original, const Vector& rhs,
                           std::span<const std::uint8_t> boundary_mask,
                           const Vector& boundary_values);

/// Factorized (direct) or preconditioned (iterative) linear solver for one
/// fixed matrix. solve() is const and may be called repeatedly.
class LinearSolver {
 public:
  LinearSolver(const SparseMatrix& matrix, SolverConfig config);
  ~LinearSolver();
  LinearSolver(LinearSolver&&) noexcept;
  LinearSolver& operator=(LinearSolver&&) noexcept;

  /// Throws SolverError (with the achieved relative residual) when the
  /// iterative mode misses its tolerance.
  Vector solve(const Vector& rhs) const;

  const SolverConfig& config() const { return config_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SolverConfig config_;
};

Vector solve(const SparseMatrix& matrix, const Vector& rhs, const SolverConfig& config = {});

/// Projection onto V_h in the gradient inner product, with the stiffness
/// system eliminated and factorized once.
class RitzProjector {
 public:
  RitzProjector(const SpatialMesh& mesh, const BasisSet& basis, SolverConfig config = {});

  /// Throws IncompatibleData when g does not vanish at the boundary nodes.
  Vector project(const ScalarField& g) const;

 private:
  const SpatialMesh* mesh_;
  QuadratureCache cache_;
  LinearSolver solver_;
};

FieldSlice ritz_projection(const SpatialMesh& mesh, const BasisSet& basis, const ScalarField& g,
                           const SolverConfig& config = {});

struct ErrorNorms {
  double l2 = 0.0;
  /// Full H1 norm: sqrt(l2^2 + |grad e|^2).
  double h1 = 0.0;
};

ErrorNorms error_norms(const SpatialMesh& mesh, const BasisSet& basis, const Vector& z_h,
                       const ScalarField& exact);

/// Same, reusing a cache built with degree >= 2k+2.
ErrorNorms error_norms(const QuadratureCache& cache, const Vector& z_h, const ScalarField& exact);

/// Nodal interpolant of g.
Vector interpolate(const SpatialMesh& mesh, const std::function<double(Point2)>& g);

/// Evaluates the finite element function with coefficients `values` at p.
double evaluate(const SpatialMesh& mesh, const BasisSet& basis, const Vector& values, Point2 p);
Vec2 evaluate_gradient(const SpatialMesh& mesh, const BasisSet& basis, const Vector& values,
                       Point2 p);

/// Wraps a finite element function as a ScalarField (holds references).
ScalarField as_field(const SpatialMesh& mesh, const BasisSet& basis, const Vector& values);

/// Coordinate text dump: one `row col value` line per stored entry,
/// 17 significant digits.
void write_matrix_coo(std::ostream& out, const SparseMatrix& matrix);

}  // namespace pbe
