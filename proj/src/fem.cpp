#include "pbe/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "pbe/error.hpp"

namespace pbe {

namespace {

using Triplet = Eigen::Triplet<double, int>;

std::array<Point2, 3> vertices_of(const SpatialMesh& mesh, std::size_t e) {
  const auto el = mesh.element(e);
  return {mesh.node(el[0]), mesh.node(el[1]), mesh.node(el[2])};
}

void check_order(const SpatialMesh& mesh, const BasisSet& basis) {
  if (mesh.order() != basis.order()) {
    throw InvalidArgument("basis order does not match mesh order");
  }
}

template <typename LocalFn>
SparseMatrix assemble(const SpatialMesh& mesh, const BasisSet& basis, LocalFn&& local) {
  check_order(mesh, basis);
  const int ndof = basis.local_dof_count();
  std::vector<Triplet> triplets;
  triplets.reserve(mesh.element_count() * ndof * ndof);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const Eigen::MatrixXd k = local(vertices_of(mesh, e));
    const auto el = mesh.element(e);
    for (int i = 0; i < ndof; ++i) {
      for (int j = 0; j < ndof; ++j) triplets.emplace_back(el[i], el[j], k(i, j));
    }
  }
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  SparseMatrix::Storage a(n, n);
  a.setFromTriplets(triplets.begin(), triplets.end());
  a.makeCompressed();
  return SparseMatrix(std::move(a));
}

}  // namespace

SparseMatrix::SparseMatrix(Storage storage) : storage_(std::move(storage)) {
  storage_.makeCompressed();
}

SparseMatrix SparseMatrix::operator+(const SparseMatrix& other) const {
  if (dimension() != other.dimension()) throw InvalidArgument("matrix dimension mismatch");
  return SparseMatrix(Storage(storage_ + other.storage_));
}

SparseMatrix SparseMatrix::scaled(double factor) const { return SparseMatrix(Storage(factor * storage_)); }

double SparseMatrix::asymmetry() const {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < storage_.outerSize(); ++r) {
    for (Storage::InnerIterator it(storage_, r); it; ++it) {
      worst = std::max(worst, std::abs(it.value() - storage_.coeff(it.col(), it.row())));
    }
  }
  return worst;
}

bool SparseMatrix::structurally_symmetric() const {
  for (Eigen::Index r = 0; r < storage_.outerSize(); ++r) {
    for (Storage::InnerIterator it(storage_, r); it; ++it) {
      const Eigen::Index c = it.col();
      bool found = false;
      for (Storage::InnerIterator jt(storage_, c); jt; ++jt) {
        if (jt.col() == r) {
          found = true;
          break;
        }
      }
      if (!found) return false;
    }
  }
  return true;
}

void SolverConfig::validate() const {
  if (!(tolerance > 0.0 && tolerance < 1.0)) {
    throw InvalidArgument("solver tolerance must lie in (0, 1)");
  }
  if (max_iterations < 1) throw InvalidArgument("solver max_iterations must be >= 1");
}

AffineMap AffineMap::from_vertices(Point2 v0, Point2 v1, Point2 v2) {
  AffineMap m{};
  m.origin = v0;
  m.j11 = v1.x - v0.x;
  m.j21 = v1.y - v0.y;
  m.j12 = v2.x - v0.x;
  m.j22 = v2.y - v0.y;
  m.det = m.j11 * m.j22 - m.j12 * m.j21;
  return m;
}

Point2 AffineMap::map(double xi, double eta) const {
  return {origin.x + j11 * xi + j12 * eta, origin.y + j21 * xi + j22 * eta};
}

Vec2 AffineMap::physical_gradient(Vec2 ref) const {
  // J^{-T} = (1/det) [[j22, -j21], [-j12, j11]]
  return {(j22 * ref.x - j21 * ref.y) / det, (-j12 * ref.x + j11 * ref.y) / det};
}

Eigen::MatrixXd local_mass(const std::array<Point2, 3>& v, const BasisSet& basis,
                           const QuadRule& rule) {
  const AffineMap map = AffineMap::from_vertices(v[0], v[1], v[2]);
  const int n = basis.local_dof_count();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  std::array<double, 6> phi{};
  for (std::size_t q = 0; q < rule.size(); ++q) {
    basis.values(rule.points[q][1], rule.points[q][2], phi);
    const double w = rule.weights[q] * std::abs(map.det);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) k(i, j) += w * phi[i] * phi[j];
    }
  }
  return k;
}

Eigen::MatrixXd local_stiffness(const std::array<Point2, 3>& v, const BasisSet& basis,
                                const QuadRule& rule, double epsilon) {
  const AffineMap map = AffineMap::from_vertices(v[0], v[1], v[2]);
  const int n = basis.local_dof_count();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  std::array<Vec2, 6> ref{};
  std::array<Vec2, 6> grad{};
  for (std::size_t q = 0; q < rule.size(); ++q) {
    basis.gradients(rule.points[q][1], rule.points[q][2], ref);
    for (int i = 0; i < n; ++i) grad[i] = map.physical_gradient(ref[i]);
    const double w = epsilon * rule.weights[q] * std::abs(map.det);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) k(i, j) += w * (grad[i].x * grad[j].x + grad[i].y * grad[j].y);
    }
  }
  return k;
}

Eigen::MatrixXd local_convection(const std::array<Point2, 3>& v, const BasisSet& basis,
                                 const QuadRule& rule, Vec2 b) {
  const AffineMap map = AffineMap::from_vertices(v[0], v[1], v[2]);
  const int n = basis.local_dof_count();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  std::array<double, 6> phi{};
  std::array<Vec2, 6> ref{};
  for (std::size_t q = 0; q < rule.size(); ++q) {
    basis.values(rule.points[q][1], rule.points[q][2], phi);
    basis.gradients(rule.points[q][1], rule.points[q][2], ref);
    const double w = rule.weights[q] * std::abs(map.det);
    for (int j = 0; j < n; ++j) {
      const Vec2 g = map.physical_gradient(ref[j]);
      const double bg = b.x * g.x + b.y * g.y;
      for (int i = 0; i < n; ++i) k(i, j) += w * bg * phi[i];
    }
  }
  return k;
}

SparseMatrix assemble_mass(const SpatialMesh& mesh, const BasisSet& basis) {
  const QuadRule& rule = quadrature_rule(2 * degree(basis.order()));
  return assemble(mesh, basis, [&](const auto& v) { return local_mass(v, basis, rule); });
}

SparseMatrix assemble_stiffness(const SpatialMesh& mesh, const BasisSet& basis, double epsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("diffusion coefficient must be positive");
  const QuadRule& rule = quadrature_rule(2 * degree(basis.order()));
  return assemble(mesh, basis,
                  [&](const auto& v) { return local_stiffness(v, basis, rule, epsilon); });
}

SparseMatrix assemble_convection(const SpatialMesh& mesh, const BasisSet& basis, Vec2 b) {
  const QuadRule& rule = quadrature_rule(2 * degree(basis.order()));
  return assemble(mesh, basis, [&](const auto& v) { return local_convection(v, basis, rule, b); });
}

QuadratureCache::QuadratureCache(const SpatialMesh& mesh, const BasisSet& basis, int quad_degree)
    : mesh_(&mesh) {
  check_order(mesh, basis);
  const QuadRule& rule = quadrature_rule(quad_degree);
  nq_ = rule.size();
  ndof_ = static_cast<std::size_t>(basis.local_dof_count());
  const std::size_t ne = mesh.element_count();

  phi_.resize(nq_ * ndof_);
  std::vector<Vec2> ref_grad(nq_ * ndof_);
  for (std::size_t q = 0; q < nq_; ++q) {
    basis.values(rule.points[q][1], rule.points[q][2], {&phi_[q * ndof_], ndof_});
    basis.gradients(rule.points[q][1], rule.points[q][2], {&ref_grad[q * ndof_], ndof_});
  }

  points_.resize(ne * nq_);
  jxw_.resize(ne * nq_);
  grad_.resize(ne * nq_ * ndof_);
  for (std::size_t e = 0; e < ne; ++e) {
    const auto v = vertices_of(mesh, e);
    const AffineMap map = AffineMap::from_vertices(v[0], v[1], v[2]);
    for (std::size_t q = 0; q < nq_; ++q) {
      points_[e * nq_ + q] = map.map(rule.points[q][1], rule.points[q][2]);
      jxw_[e * nq_ + q] = rule.weights[q] * std::abs(map.det);
      for (std::size_t i = 0; i < ndof_; ++i) {
        grad_[(e * nq_ + q) * ndof_ + i] = map.physical_gradient(ref_grad[q * ndof_ + i]);
      }
    }
  }
}

Vector QuadratureCache::load(const std::function<double(Point2)>& g) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(mesh_->node_count()));
  for (std::size_t e = 0; e < mesh_->element_count(); ++e) {
    const auto el = mesh_->element(e);
    for (std::size_t q = 0; q < nq_; ++q) {
      const double gw = g(points_[e * nq_ + q]) * jxw_[e * nq_ + q];
      const double* phi = &phi_[q * ndof_];
      for (std::size_t i = 0; i < ndof_; ++i) out[el[i]] += gw * phi[i];
    }
  }
  return out;
}

Vector QuadratureCache::gradient_load(const std::function<Vec2(Point2)>& grad_g) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(mesh_->node_count()));
  for (std::size_t e = 0; e < mesh_->element_count(); ++e) {
    const auto el = mesh_->element(e);
    for (std::size_t q = 0; q < nq_; ++q) {
      const Vec2 g = grad_g(points_[e * nq_ + q]);
      const double w = jxw_[e * nq_ + q];
      const Vec2* grad = &grad_[(e * nq_ + q) * ndof_];
      for (std::size_t i = 0; i < ndof_; ++i) out[el[i]] += w * (g.x * grad[i].x + g.y * grad[i].y);
    }
  }
  return out;
}

Vector assemble_load(const SpatialMesh& mesh, const BasisSet& basis,
                     const std::function<double(Point2)>& g, int quad_degree) {
  const int deg = quad_degree > 0 ? quad_degree : load_quadrature_degree(basis.order());
  return QuadratureCache(mesh, basis, deg).load(g);
}

DirichletSystem apply_dirichlet(const SparseMatrix& matrix, const Vector& rhs,
                                std::span<const std::uint8_t> mask, const Vector& boundary_values) {
  SparseMatrix::Storage a = matrix.storage();
  Vector b = apply_dirichlet_rhs(matrix, rhs, mask, boundary_values);
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    const bool row_fixed = mask[r] != 0;
    for (SparseMatrix::Storage::InnerIterator it(a, r); it; ++it) {
      const bool col_fixed = mask[it.col()] != 0;
      if (row_fixed) {
        it.valueRef() = it.col() == r ? 1.0 : 0.0;
      } else if (col_fixed) {
        it.valueRef() = 0.0;
      }
    }
  }
  // Drop the zeroed couplings; diagonals of fixed rows are 1 and survive.
  a.prune([](Eigen::Index row, Eigen::Index col, double value) {
    return row == col || value != 0.0;
  });
  return {SparseMatrix(std::move(a)), std::move(b)};
}

Vector apply_dirichlet_rhs(const SparseMatrix& original, const Vector& rhs,
                           std::span<const std::uint8_t> mask, const Vector& boundary_values) {
  const auto& a = original.storage();
  if (rhs.size() != a.rows() || boundary_values.size() != a.rows() ||
      mask.size() != static_cast<std::size_t>(a.rows())) {
    throw InvalidArgument("apply_dirichlet: size mismatch");
  }
  Vector b = rhs;
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    if (mask[r]) {
      b[r] = boundary_values[r];
      continue;
    }
    for (SparseMatrix::Storage::InnerIterator it(a, r); it; ++it) {
      if (mask[it.col()]) b[r] -= it.value() * boundary_values[it.col()];
    }
  }
  return b;
}

Vector solve(const SparseMatrix& matrix, const Vector& rhs, const SolverConfig& config) {
  return LinearSolver(matrix, config).solve(rhs);
}

RitzProjector::RitzProjector(const SpatialMesh& mesh, const BasisSet& basis, SolverConfig config)
    : mesh_(&mesh),
      cache_(mesh, basis, load_quadrature_degree(basis.order())),
      solver_(
          [&] {
            const SparseMatrix a0 = assemble_stiffness(mesh, basis, 1.0);
            const auto n = static_cast<Eigen::Index>(mesh.node_count());
            return apply_dirichlet(a0, Vector::Zero(n), mesh.boundary_mask(), Vector::Zero(n))
                .matrix;
          }(),
          config) {}

Vector RitzProjector::project(const ScalarField& g) const {
  for (std::size_t i = 0; i < mesh_->node_count(); ++i) {
    if (!mesh_->on_boundary(i)) continue;
    const double trace = g.value(mesh_->node(i));
    if (std::abs(trace) > 1e-12) {
      throw IncompatibleData("projected data has nonzero boundary trace " + std::to_string(trace) +
                             " at node " + std::to_string(i));
    }
  }
  Vector rhs = cache_.gradient_load(g.gradient);
  for (std::size_t i = 0; i < mesh_->node_count(); ++i) {
    if (mesh_->on_boundary(i)) rhs[static_cast<Eigen::Index>(i)] = 0.0;
  }
  Vector x = solver_.solve(rhs);
  for (std::size_t i = 0; i < mesh_->node_count(); ++i) {
    if (mesh_->on_boundary(i)) x[static_cast<Eigen::Index>(i)] = 0.0;
  }
  return x;
}

FieldSlice ritz_projection(const SpatialMesh& mesh, const BasisSet& basis, const ScalarField& g,
                           const SolverConfig& config) {
  return {RitzProjector(mesh, basis, config).project(g), 0, 0};
}

ErrorNorms error_norms(const QuadratureCache& cache, const Vector& z_h, const ScalarField& exact) {
  const SpatialMesh& mesh = cache.mesh();
  if (z_h.size() != static_cast<Eigen::Index>(mesh.node_count())) {
    throw InvalidArgument("error_norms: slice length does not match the mesh");
  }
  const std::size_t nq = cache.points_per_element();
  const std::size_t ndof = cache.dofs_per_element();
  double l2sq = 0.0;
  double semisq = 0.0;
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const auto el = mesh.element(e);
    for (std::size_t q = 0; q < nq; ++q) {
      double u = 0.0;
      Vec2 du{};
      for (std::size_t i = 0; i < ndof; ++i) {
        const double c = z_h[el[i]];
        u += c * cache.phi(q, i);
        const Vec2 g = cache.grad(e, q, i);
        du.x += c * g.x;
        du.y += c * g.y;
      }
      const Point2 p = cache.point(e, q);
      const double err = u - exact.value(p);
      const Vec2 gex = exact.gradient(p);
      const double ex = du.x - gex.x;
      const double ey = du.y - gex.y;
      const double w = cache.jxw(e, q);
      l2sq += w * err * err;
      semisq += w * (ex * ex + ey * ey);
    }
  }
  return {std::sqrt(l2sq), std::sqrt(l2sq + semisq)};
}

ErrorNorms error_norms(const SpatialMesh& mesh, const BasisSet& basis, const Vector& z_h,
                       const ScalarField& exact) {
  return error_norms(QuadratureCache(mesh, basis, load_quadrature_degree(basis.order())), z_h,
                     exact);
}

Vector interpolate(const SpatialMesh& mesh, const std::function<double(Point2)>& g) {
  Vector out(static_cast<Eigen::Index>(mesh.node_count()));
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    out[static_cast<Eigen::Index>(i)] = g(mesh.node(i));
  }
  return out;
}

namespace {

// Reference coordinates of p in element e.
Point2 to_reference(const AffineMap& map, Point2 p) {
  const double dx = p.x - map.origin.x;
  const double dy = p.y - map.origin.y;
  return {(map.j22 * dx - map.j12 * dy) / map.det, (-map.j21 * dx + map.j11 * dy) / map.det};
}

}  // namespace

double evaluate(const SpatialMesh& mesh, const BasisSet& basis, const Vector& values, Point2 p) {
  const std::size_t e = mesh.locate(p);
  const auto v = vertices_of(mesh, e);
  const AffineMap map = AffineMap::from_vertices(v[0], v[1], v[2]);
  const Point2 r = to_reference(map, p);
  std::array<double, 6> phi{};
  basis.values(r.x, r.y, phi);
  const auto el = mesh.element(e);
  double u = 0.0;
  for (int i = 0; i < basis.local_dof_count(); ++i) u += values[el[i]] * phi[i];
  return u;
}

Vec2 evaluate_gradient(const SpatialMesh& mesh, const BasisSet& basis, const Vector& values,
                       Point2 p) {
  const std::size_t e = mesh.locate(p);
  const auto v = vertices_of(mesh, e);
  const AffineMap map = AffineMap::from_vertices(v[0], v[1], v[2]);
  const Point2 r = to_reference(map, p);
  std::array<Vec2, 6> ref{};
  basis.gradients(r.x, r.y, ref);
  const auto el = mesh.element(e);
  Vec2 g{};
  for (int i = 0; i < basis.local_dof_count(); ++i) {
    const Vec2 d = map.physical_gradient(ref[i]);
    g.x += values[el[i]] * d.x;
    g.y += values[el[i]] * d.y;
  }
  return g;
}

ScalarField as_field(const SpatialMesh& mesh, const BasisSet& basis, const Vector& values) {
  return {[&mesh, basis, values](Point2 p) { return evaluate(mesh, basis, values, p); },
          [&mesh, basis, values](Point2 p) { return evaluate_gradient(mesh, basis, values, p); }};
}

void write_matrix_coo(std::ostream& out, const SparseMatrix& matrix) {
  const auto& a = matrix.storage();
  char buf[96];
  for (Eigen::Index r = 0; r < a.outerSize(); ++r) {
    for (SparseMatrix::Storage::InnerIterator it(a, r); it; ++it) {
      std::snprintf(buf, sizeof buf, "%lld %lld %.16e\n", static_cast<long long>(it.row()),
                    static_cast<long long>(it.col()), it.value());
      out << buf;
    }
  }
}

}  // namespace pbe
