#include <array>
#include <string>
#include <vector>

#include "pbe/error.hpp"
#include "pbe/mesh.hpp"

namespace pbe {

namespace {

// Dunavant symmetric rules, constants refined to double precision against the
// monomial moment equations. Weights below are normalized to sum to 1.

void add_centroid(QuadRule& r, double w) {
  r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
  r.weights.push_back(w);
}

// Orbit of (1 - 2a, a, a): three points.
void add_s21(QuadRule& r, double a, double w) {
  const double b = 1.0 - 2.0 * a;
  r.points.push_back({b, a, a});
  r.points.push_back({a, b, a});
  r.points.push_back({a, a, b});
  for (int i = 0; i < 3; ++i) r.weights.push_back(w);
}

// Orbit of (a, b, 1 - a - b): six points.
void add_s111(QuadRule& r, double a, double b, double w) {
  const double c = 1.0 - a - b;
  const std::array<std::array<double, 3>, 6> orbit{{{a, b, c}, {a, c, b}, {b, a, c},
                                                    {b, c, a}, {c, a, b}, {c, b, a}}};
  for (const auto& p : orbit) {
    r.points.push_back(p);
    r.weights.push_back(w);
  }
}

QuadRule finish(QuadRule r, int degree) {
  for (double& w : r.weights) w *= 0.5;
  r.exact_degree = degree;
  return r;
}

std::vector<QuadRule> make_rules() {
  std::vector<QuadRule> rules;

  QuadRule d1;
  add_centroid(d1, 1.0);
  rules.push_back(finish(d1, 1));

  QuadRule d2;
  add_s21(d2, 1.0 / 6.0, 1.0 / 3.0);
  rules.push_back(finish(d2, 2));

  QuadRule d4;
  add_s21(d4, 0.44594849091596488632, 0.22338158967801146570);
  add_s21(d4, 0.091576213509770743460, 0.10995174365532186764);
  rules.push_back(finish(d4, 4));

  QuadRule d5;
  add_centroid(d5, 0.225);
  add_s21(d5, 0.47014206410511508977, 0.13239415278850618074);
  add_s21(d5, 0.10128650732345633880, 0.12593918054482715260);
  rules.push_back(finish(d5, 5));

  QuadRule d6;
  add_s21(d6, 0.24928674517091042129, 0.11678627572637936603);
  add_s21(d6, 0.063089014491502228340, 0.050844906370206816921);
  add_s111(d6, 0.053145049844816947353, 0.31035245103378440542, 0.082851075618373575194);
  rules.push_back(finish(d6, 6));

  return rules;
}

}  // namespace

const QuadRule& quadrature_rule(int exact_degree) {
  static const std::vector<QuadRule> rules = make_rules();
  if (exact_degree < 1 || exact_degree > kMaxQuadratureDegree) {
    throw InvalidArgument("no bundled quadrature rule of degree " + std::to_string(exact_degree));
  }
  for (const auto& r : rules) {
    if (r.exact_degree >= exact_degree) return r;
  }
  throw InvalidArgument("no bundled quadrature rule of degree " + std::to_string(exact_degree));
}

}  // namespace pbe
