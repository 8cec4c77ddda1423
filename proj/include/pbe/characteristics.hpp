#pragma once

#include <functional>

#include "pbe/fem.hpp"

namespace pbe {

using GrowthRate = std::function<double(double)>;

/// Uniform grid l_m = l_min + m * iota, m = 0..M, on the internal coordinate.
class LGrid {
 public:
  /// Throws InvalidArgument unless M >= 1 and l_max > l_min.
  LGrid(double l_min, double l_max, int cells);
  /// Grid with spacing iota; throws SizingError if iota does not divide the interval.
  static LGrid with_spacing(double l_min, double l_max, double iota);

  double l_min() const { return l_min_; }
  double l_max() const { return l_max_; }
  int cells() const { return cells_; }
  double iota() const { return iota_; }
  /// l_m; node(M) is exactly l_max.
  double node(int m) const { return m == cells_ ? l_max_ : l_min_ + m * iota_; }

 private:
  double l_min_;
  double l_max_;
  int cells_;
  double iota_;
};

/// Uniform time levels t^n = n * tau, n = 0..N.
class TimeGrid {
 public:
  /// Throws InvalidArgument unless N >= 1 and T > 0.
  TimeGrid(double final_time, int steps);
  /// Throws SizingError if tau does not divide T.
  static TimeGrid with_step(double final_time, double tau);

  double final_time() const { return final_time_; }
  int steps() const { return steps_; }
  double tau() const { return tau_; }
  double time(int n) const { return n == steps_ ? final_time_ : n * tau_; }

 private:
  double final_time_;
  int steps_;
  double tau_;
};

/// Foot of the characteristic through (t^n, l_m) at level t^{n-1} and the
/// weight of the left neighbour in the interpolated value.
struct Backtrace {
  int m = 0;
  double foot = 0.0;
  double alpha = 0.0;
};

struct CflReport {
  bool pass = false;
  double max_growth = 0.0;
  /// tau * max G / iota.
  double ratio = 0.0;
};

/// Number of interior samples used to estimate max G (endpoints are added).
constexpr int kCflSamples = 4096;

/// Evaluates tau <= iota / max G with max G from dense sampling plus every
/// grid node. Throws InvalidArgument if G <= 0 at any sample; a violation is
/// reported, not thrown.
CflReport check_cfl(double tau, const LGrid& grid, const GrowthRate& growth);

/// check_cfl that throws CflViolation on failure.
void require_cfl(double tau, const LGrid& grid, const GrowthRate& growth);

/// First-order foot l_m - tau G(l_m). Throws InvalidArgument for m outside
/// [1, M] and CflViolation when the foot leaves [l_{m-1}, l_m].
Backtrace backtrace(int m, double tau, const LGrid& grid, const GrowthRate& growth);

/// alpha * prev_left + (1 - alpha) * prev_same, node by node.
FieldSlice combine_backtraced(const FieldSlice& prev_left, const FieldSlice& prev_same,
                              double alpha);

}  // namespace pbe
