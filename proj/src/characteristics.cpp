#include "pbe/characteristics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pbe/error.hpp"

namespace pbe {

namespace {

constexpr double kFootTol = 1e-14;

int integer_ratio(double length, double step, const char* what) {
  const double ratio = length / step;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw SizingError(std::string(what) + " " + std::to_string(step) +
                      " does not divide the interval length " + std::to_string(length));
  }
  return static_cast<int>(rounded);
}

}  // namespace

LGrid::LGrid(double l_min, double l_max, int cells)
    : l_min_(l_min), l_max_(l_max), cells_(cells), iota_((l_max - l_min) / cells) {
  if (cells < 1) throw InvalidArgument("internal-coordinate grid needs M >= 1");
  if (!(l_max > l_min)) throw InvalidArgument("internal-coordinate interval is empty");
}

LGrid LGrid::with_spacing(double l_min, double l_max, double iota) {
  if (!(iota > 0.0)) throw InvalidArgument("iota must be positive");
  return LGrid(l_min, l_max, integer_ratio(l_max - l_min, iota, "iota"));
}

TimeGrid::TimeGrid(double final_time, int steps)
    : final_time_(final_time), steps_(steps), tau_(final_time / steps) {
  if (steps < 1) throw InvalidArgument("time grid needs N >= 1");
  if (!(final_time > 0.0)) throw InvalidArgument("final time must be positive");
}

TimeGrid TimeGrid::with_step(double final_time, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("tau must be positive");
  return TimeGrid(final_time, integer_ratio(final_time, tau, "tau"));
}

CflReport check_cfl(double tau, const LGrid& grid, const GrowthRate& growth) {
  double max_g = 0.0;
  for (int k = 0; k <= kCflSamples + 1; ++k) {
    const double l = k == kCflSamples + 1
                         ? grid.l_max()
                         : grid.l_min() + (grid.l_max() - grid.l_min()) * k / (kCflSamples + 1);
    const double g = growth(l);
    if (!(g > 0.0)) {
      throw InvalidArgument("growth rate must be positive, G(" + std::to_string(l) +
                            ") = " + std::to_string(g));
    }
    max_g = std::max(max_g, g);
  }
  // The scheme evaluates G only at the grid nodes, so a passing check must
  // cover them exactly.
  for (int m = 0; m <= grid.cells(); ++m) {
    const double g = growth(grid.node(m));
    if (!(g > 0.0)) {
      throw InvalidArgument("growth rate must be positive, G(" + std::to_string(grid.node(m)) +
                            ") = " + std::to_string(g));
    }
    max_g = std::max(max_g, g);
  }
  CflReport report;
  report.max_growth = max_g;
  report.ratio = tau * max_g / grid.iota();
  report.pass = tau <= grid.iota() / max_g;
  return report;
}

void require_cfl(double tau, const LGrid& grid, const GrowthRate& growth) {
  const CflReport r = check_cfl(tau, grid, growth);
  if (!r.pass) {
    throw CflViolation("CFL violated: tau * max G / iota = " + std::to_string(r.ratio) +
                           " (tau=" + std::to_string(tau) + ", iota=" + std::to_string(grid.iota()) +
                           ", max G=" + std::to_string(r.max_growth) + ")",
                       r.ratio);
  }
}

Backtrace backtrace(int m, double tau, const LGrid& grid, const GrowthRate& growth) {
  if (m < 1 || m > grid.cells()) {
    throw InvalidArgument("backtrace index " + std::to_string(m) + " outside [1, M]");
  }
  const double lm = grid.node(m);
  const double shift = tau * growth(lm);
  Backtrace bt;
  bt.m = m;
  bt.foot = lm - shift;
  bt.alpha = shift / grid.iota();
  if (bt.foot < grid.node(m - 1) - kFootTol || bt.foot > lm + kFootTol) {
    throw CflViolation("characteristic foot of slice m=" + std::to_string(m) + " at " +
                           std::to_string(bt.foot) + " leaves [l_{m-1}, l_m]",
                       bt.alpha);
  }
  return bt;
}

FieldSlice combine_backtraced(const FieldSlice& prev_left, const FieldSlice& prev_same,
                              double alpha) {
  if (prev_left.values.size() != prev_same.values.size()) {
    throw InvalidArgument("combine_backtraced: slice lengths differ");
  }
  FieldSlice out;
  out.n = prev_same.n;
  out.m = prev_same.m;
  out.values = alpha * prev_left.values + (1.0 - alpha) * prev_same.values;
  return out;
}

}  // namespace pbe
