#pragma once

// Brute-force dense reference for P1 systems. Shares only the mesh and the
// quadrature point tables with the library: element matrices come from
// closed-form barycentric formulas, boundary conditions use row replacement,
// and systems are solved by Gaussian elimination with partial pivoting.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "pbe/mesh.hpp"

namespace oracle {

using pbe::Point2;
using Dense = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct P1Element {
  std::array<int, 3> nodes;
  std::array<Point2, 3> v;
  double area;
  // Constant gradients of the barycentric coordinates.
  std::array<Point2, 3> grad;

  double lambda(int i, Point2 p) const {
    const Point2 a = v[(i + 1) % 3];
    const Point2 b = v[(i + 2) % 3];
    return ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / (2.0 * area);
  }
};

inline P1Element p1_element(const pbe::SpatialMesh& mesh, std::size_t e) {
  const auto el = mesh.element(e);
  P1Element out{};
  for (int k = 0; k < 3; ++k) {
    out.nodes[k] = el[k];
    out.v[k] = mesh.node(static_cast<std::size_t>(el[k]));
  }
  const auto& v = out.v;
  out.area = 0.5 * ((v[1].x - v[0].x) * (v[2].y - v[0].y) - (v[2].x - v[0].x) * (v[1].y - v[0].y));
  for (int i = 0; i < 3; ++i) {
    const Point2 a = v[(i + 1) % 3];
    const Point2 b = v[(i + 2) % 3];
    // lambda_i vanishes on edge (a, b): gradient is the inward normal / (2 area).
    out.grad[i] = {-(b.y - a.y) / (2.0 * out.area), (b.x - a.x) / (2.0 * out.area)};
  }
  return out;
}

inline Dense mass(const pbe::SpatialMesh& mesh) {
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  Dense a = Dense::Zero(n, n);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const P1Element el = p1_element(mesh, e);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) a(el.nodes[i], el.nodes[j]) += el.area / 12.0 * (i == j ? 2.0 : 1.0);
    }
  }
  return a;
}

inline Dense stiffness(const pbe::SpatialMesh& mesh, double eps) {
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  Dense a = Dense::Zero(n, n);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const P1Element el = p1_element(mesh, e);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        a(el.nodes[i], el.nodes[j]) +=
            eps * el.area * (el.grad[i].x * el.grad[j].x + el.grad[i].y * el.grad[j].y);
      }
    }
  }
  return a;
}

inline Dense convection(const pbe::SpatialMesh& mesh, Point2 b) {
  const auto n = static_cast<Eigen::Index>(mesh.node_count());
  Dense a = Dense::Zero(n, n);
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const P1Element el = p1_element(mesh, e);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        a(el.nodes[i], el.nodes[j]) += (b.x * el.grad[j].x + b.y * el.grad[j].y) * el.area / 3.0;
      }
    }
  }
  return a;
}

/// Entry i = integral of g lambda_i, physical points from barycentric blends.
inline Vec load(const pbe::SpatialMesh& mesh, const std::function<double(Point2)>& g,
                const pbe::QuadRule& rule) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(mesh.node_count()));
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const P1Element el = p1_element(mesh, e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& bc = rule.points[q];
      const Point2 p{bc[0] * el.v[0].x + bc[1] * el.v[1].x + bc[2] * el.v[2].x,
                     bc[0] * el.v[0].y + bc[1] * el.v[1].y + bc[2] * el.v[2].y};
      const double w = 2.0 * rule.weights[q] * el.area;
      for (int i = 0; i < 3; ++i) out[el.nodes[i]] += w * g(p) * bc[i];
    }
  }
  return out;
}

/// Entry i = integral of grad g . grad lambda_i.
inline Vec gradient_load(const pbe::SpatialMesh& mesh, const std::function<Point2(Point2)>& grad_g,
                         const pbe::QuadRule& rule) {
  Vec out = Vec::Zero(static_cast<Eigen::Index>(mesh.node_count()));
  for (std::size_t e = 0; e < mesh.element_count(); ++e) {
    const P1Element el = p1_element(mesh, e);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& bc = rule.points[q];
      const Point2 p{bc[0] * el.v[0].x + bc[1] * el.v[1].x + bc[2] * el.v[2].x,
                     bc[0] * el.v[0].y + bc[1] * el.v[1].y + bc[2] * el.v[2].y};
      const Point2 g = grad_g(p);
      const double w = 2.0 * rule.weights[q] * el.area;
      for (int i = 0; i < 3; ++i) out[el.nodes[i]] += w * (g.x * el.grad[i].x + g.y * el.grad[i].y);
    }
  }
  return out;
}

/// Replaces boundary rows by identity rows with rhs = value (no column elimination).
inline void impose_rows(const pbe::SpatialMesh& mesh, Dense& a, Vec& rhs, double value = 0.0) {
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    if (!mesh.on_boundary(i)) continue;
    const auto r = static_cast<Eigen::Index>(i);
    a.row(r).setZero();
    a(r, r) = 1.0;
    rhs[r] = value;
  }
}

/// Gaussian elimination with partial pivoting.
inline Vec gauss_solve(Dense a, Vec b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    Eigen::Index piv = k;
    for (Eigen::Index r = k + 1; r < n; ++r) {
      if (std::abs(a(r, k)) > std::abs(a(piv, k))) piv = r;
    }
    if (a(piv, k) == 0.0) throw std::runtime_error("singular dense system");
    if (piv != k) {
      a.row(k).swap(a.row(piv));
      std::swap(b[k], b[piv]);
    }
    for (Eigen::Index r = k + 1; r < n; ++r) {
      const double f = a(r, k) / a(k, k);
      if (f == 0.0) continue;
      for (Eigen::Index c = k; c < n; ++c) a(r, c) -= f * a(k, c);
      b[r] -= f * b[k];
    }
  }
  Vec x(n);
  for (Eigen::Index r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (Eigen::Index c = r + 1; c < n; ++c) s -= a(r, c) * x[c];
    x[r] = s / a(r, r);
  }
  return x;
}

/// Gradient-inner-product projection of g (zero boundary trace) onto P1.
inline Vec ritz(const pbe::SpatialMesh& mesh, const std::function<Point2(Point2)>& grad_g,
                const pbe::QuadRule& rule) {
  Dense k = stiffness(mesh, 1.0);
  Vec rhs = gradient_load(mesh, grad_g, rule);
  impose_rows(mesh, k, rhs);
  return gauss_solve(k, rhs);
}

}  // namespace oracle
