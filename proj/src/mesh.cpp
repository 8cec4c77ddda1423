#include "pbe/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "pbe/error.hpp"

namespace pbe {

namespace {

constexpr double kBoundaryTol = 1e-12;

int cells_along(double length, double h, const char* axis) {
  const double ratio = length / h;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw SizingError("mesh size h=" + std::to_string(h) + " does not divide the " + axis +
                      " side length " + std::to_string(length));
  }
  return static_cast<int>(rounded);
}

bool on_rectangle_boundary(const Rectangle& r, Point2 p) {
  return std::abs(p.x - r.x0) <= kBoundaryTol || std::abs(p.x - r.x1) <= kBoundaryTol ||
         std::abs(p.y - r.y0) <= kBoundaryTol || std::abs(p.y - r.y1) <= kBoundaryTol;
}

}  // namespace

SpatialMesh::SpatialMesh(Rectangle domain, double h, ElementOrder order, int nx, int ny,
                         std::vector<Point2> nodes, std::vector<std::array<int, 6>> elements,
                         std::vector<std::uint8_t> boundary_mask, std::size_t vertex_count)
    : domain_(domain),
      h_(h),
      order_(order),
      nx_(nx),
      ny_(ny),
      nodes_(std::move(nodes)),
      elements_(std::move(elements)),
      boundary_mask_(std::move(boundary_mask)),
      vertex_count_(vertex_count) {}

double SpatialMesh::element_area(std::size_t e) const {
  const auto& el = elements_[e];
  const Point2& a = nodes_[el[0]];
  const Point2& b = nodes_[el[1]];
  const Point2& c = nodes_[el[2]];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

std::size_t SpatialMesh::locate(Point2 p) const {
  const double dx = domain_.width() / nx_;
  const double dy = domain_.height() / ny_;
  const double sx = (p.x - domain_.x0) / dx;
  const double sy = (p.y - domain_.y0) / dy;
  const int i = std::clamp(static_cast<int>(std::floor(sx)), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor(sy)), 0, ny_ - 1);
  // Lower triangle (v00, v10, v11) lies below the cell diagonal.
  const double fx = sx - i;
  const double fy = sy - j;
  const std::size_t cell = static_cast<std::size_t>(j) * nx_ + i;
  return 2 * cell + (fy <= fx ? 0 : 1);
}

SpatialMesh build_structured_mesh(const Rectangle& domain, double h, ElementOrder order) {
  if (!(h > 0.0)) throw InvalidArgument("mesh size h must be positive");
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) {
    throw InvalidArgument("degenerate rectangle");
  }
  const int nx = cells_along(domain.width(), h, "x");
  const int ny = cells_along(domain.height(), h, "y");

  std::vector<Point2> nodes;
  nodes.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j) {
    const double y = j == ny ? domain.y1 : domain.y0 + domain.height() * j / ny;
    for (int i = 0; i <= nx; ++i) {
      const double x = i == nx ? domain.x1 : domain.x0 + domain.width() * i / nx;
      nodes.push_back({x, y});
    }
  }
  const std::size_t vertex_count = nodes.size();

  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  std::vector<std::array<int, 6>> elements;
  elements.reserve(2 * static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int v00 = vid(i, j);
      const int v10 = vid(i + 1, j);
      const int v01 = vid(i, j + 1);
      const int v11 = vid(i + 1, j + 1);
      elements.push_back({v00, v10, v11, -1, -1, -1});
      elements.push_back({v00, v11, v01, -1, -1, -1});
    }
  }

  if (order == ElementOrder::P2) {
    std::map<std::pair<int, int>, int> edge_node;
    for (auto& el : elements) {
      for (int k = 0; k < 3; ++k) {
        const int a = el[k];
        const int b = el[(k + 1) % 3];
        const auto key = std::minmax(a, b);
        auto [it, inserted] = edge_node.try_emplace(key, static_cast<int>(nodes.size()));
        if (inserted) {
          nodes.push_back({0.5 * (nodes[a].x + nodes[b].x), 0.5 * (nodes[a].y + nodes[b].y)});
        }
        el[3 + k] = it->second;
      }
    }
  }

  std::vector<std::uint8_t> mask(nodes.size());
  for (std::size_t n = 0; n < nodes.size(); ++n) {
    mask[n] = on_rectangle_boundary(domain, nodes[n]) ? 1 : 0;
  }
  return SpatialMesh(domain, h, order, nx, ny, std::move(nodes), std::move(elements),
                     std::move(mask), vertex_count);
}

void BasisSet::values(double xi, double eta, std::span<double> out) const {
  const double l0 = 1.0 - xi - eta;
  const double l1 = xi;
  const double l2 = eta;
  if (order_ == ElementOrder::P1) {
    out[0] = l0;
    out[1] = l1;
    out[2] = l2;
    return;
  }
  out[0] = l0 * (2.0 * l0 - 1.0);
  out[1] = l1 * (2.0 * l1 - 1.0);
  out[2] = l2 * (2.0 * l2 - 1.0);
  out[3] = 4.0 * l0 * l1;
  out[4] = 4.0 * l1 * l2;
  out[5] = 4.0 * l2 * l0;
}

void BasisSet::gradients(double xi, double eta, std::span<Vec2> out) const {
  if (order_ == ElementOrder::P1) {
    out[0] = {-1.0, -1.0};
    out[1] = {1.0, 0.0};
    out[2] = {0.0, 1.0};
    return;
  }
  const double l0 = 1.0 - xi - eta;
  const double l1 = xi;
  const double l2 = eta;
  // d(l0) = (-1,-1), d(l1) = (1,0), d(l2) = (0,1)
  out[0] = {-(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0)};
  out[1] = {4.0 * l1 - 1.0, 0.0};
  out[2] = {0.0, 4.0 * l2 - 1.0};
  out[3] = {4.0 * (l0 - l1), -4.0 * l1};
  out[4] = {4.0 * l2, 4.0 * l1};
  out[5] = {-4.0 * l2, 4.0 * (l0 - l2)};
}

Point2 BasisSet::local_node(int i) const {
  static constexpr std::array<Point2, 6> kNodes{
      Point2{0.0, 0.0}, Point2{1.0, 0.0}, Point2{0.0, 1.0},
      Point2{0.5, 0.0}, Point2{0.5, 0.5}, Point2{0.0, 0.5}};
  return kNodes.at(static_cast<std::size_t>(i));
}

BasisSet reference_basis(int order) {
  if (order != 1 && order != 2) {
    throw InvalidArgument("unsupported element order " + std::to_string(order));
  }
  return BasisSet(static_cast<ElementOrder>(order));
}

}  // namespace pbe
