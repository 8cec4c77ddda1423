#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pbe {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

using Vec2 = Point2;

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rectangle {
  double x0 = 0.0;
  double x1 = 1.0;
  double y0 = 0.0;
  double y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
};

enum class ElementOrder : int { P1 = 1, P2 = 2 };

inline int degree(ElementOrder order) { return static_cast<int>(order); }

/// Local DOFs per triangle: 3 vertices, plus 3 edge midpoints for P2.
inline int local_dof_count(ElementOrder order) { return order == ElementOrder::P1 ? 3 : 6; }

/// Structured Friedrichs-Keller triangulation of a rectangle.
///
/// Numbering: vertex nodes row-major, node (i, j) -> j * (nx + 1) + i. For P2
/// the edge-midpoint nodes follow the vertices, numbered in order of first
/// appearance while walking elements in order. Each grid cell (i, j) yields
/// two elements, 2 * (j * nx + i) with vertices (v00, v10, v11) and
/// 2 * (j * nx + i) + 1 with vertices (v00, v11, v01). For P2 an element's
/// local nodes 3, 4, 5 are the midpoints of local edges (0,1), (1,2), (2,0).
class SpatialMesh {
 public:
  SpatialMesh(Rectangle domain, double h, ElementOrder order, int nx, int ny,
              std::vector<Point2> nodes, std::vector<std::array<int, 6>> elements,
              std::vector<std::uint8_t> boundary_mask, std::size_t vertex_count);

  const Rectangle& domain() const { return domain_; }
  double h() const { return h_; }
  ElementOrder order() const { return order_; }
  int cells_x() const { return nx_; }
  int cells_y() const { return ny_; }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t element_count() const { return elements_.size(); }

  const std::vector<Point2>& nodes() const { return nodes_; }
  const Point2& node(std::size_t i) const { return nodes_[i]; }

  /// Local-to-global node indices of element e; only the first
  /// local_dof_count(order()) entries are meaningful.
  std::span<const int> element(std::size_t e) const {
    return {elements_[e].data(), static_cast<std::size_t>(local_dof_count(order_))};
  }

  bool on_boundary(std::size_t node) const { return boundary_mask_[node] != 0; }
  const std::vector<std::uint8_t>& boundary_mask() const { return boundary_mask_; }

  /// Signed area of element e from its three vertices.
  double element_area(std::size_t e) const;

  /// Index of an element containing p (points on shared edges resolve to
  /// either neighbour). p must lie inside the domain.
  std::size_t locate(Point2 p) const;

 private:
  Rectangle domain_;
  double h_;
  ElementOrder order_;
  int nx_;
  int ny_;
  std::vector<Point2> nodes_;
  std::vector<std::array<int, 6>> elements_;
  std::vector<std::uint8_t> boundary_mask_;
  std::size_t vertex_count_;
};

/// Builds the Friedrichs-Keller mesh of `domain` with edge length h.
/// Throws SizingError if h does not divide both side lengths, InvalidArgument
/// for a degenerate rectangle or h <= 0.
SpatialMesh build_structured_mesh(const Rectangle& domain, double h, ElementOrder order);

/// Lagrange basis on the reference triangle (0,0), (1,0), (0,1).
class BasisSet {
 public:
  explicit BasisSet(ElementOrder order) : order_(order) {}

  ElementOrder order() const { return order_; }
  int local_dof_count() const { return pbe::local_dof_count(order_); }

  /// Basis values at reference point (xi, eta); out holds local_dof_count() entries.
  void values(double xi, double eta, std::span<double> out) const;
  /// Reference gradients (d/dxi, d/deta).
  void gradients(double xi, double eta, std::span<Vec2> out) const;

  /// Reference coordinates of local node i.
  Point2 local_node(int i) const;

 private:
  ElementOrder order_;
};

/// Throws InvalidArgument for an unsupported order.
BasisSet reference_basis(int order);

/// Symmetric quadrature on the reference triangle. Points are barycentric
/// (l0, l1, l2) with reference coordinates (xi, eta) = (l1, l2); weights sum
/// to the reference area 1/2.
struct QuadRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int exact_degree = 0;

  std::size_t size() const { return weights.size(); }
};

constexpr int kMaxQuadratureDegree = 6;

/// Smallest bundled rule integrating polynomials of exact_degree exactly.
/// Throws InvalidArgument outside [1, kMaxQuadratureDegree].
const QuadRule& quadrature_rule(int exact_degree);

}  // namespace pbe
