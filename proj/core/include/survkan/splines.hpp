#pragma once

#include <span>
#include <vector>

namespace survkan {

/// Uniform quadratic B-spline grid over [lower, upper] with `intervals`
/// interior intervals. The knot vector carries `degree` extra uniformly
/// extrapolated knots on each side, so there are intervals + 2*degree + 1
/// knots and intervals + degree basis functions.
class SplineGrid {
 public:
  static constexpr int degree = 2;

  SplineGrid(double lower, double upper, int intervals);

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  int intervals() const { return intervals_; }
  double spacing() const { return spacing_; }
  int basis_count() const { return intervals_ + degree; }
  int knot_count() const { return intervals_ + 2 * degree + 1; }

  /// Knot i for i in [0, knot_count); knot(degree) == lower.
  double knot(int i) const { return lower_ + (i - degree) * spacing_; }

  /// Greville abscissa of basis function j (mean of its interior knots).
  double greville(int j) const { return 0.5 * (knot(j + 1) + knot(j + 2)); }

  bool operator==(const SplineGrid&) const = default;

 private:
  double lower_, upper_, spacing_;
  int intervals_;
};

/// Values of the (at most degree + 1) basis functions that are nonzero on
/// one knot interval. `first` is the index of the leftmost one.
struct LocalBasis {
  int first = 0;
  double values[SplineGrid::degree + 1] = {0.0, 0.0, 0.0};
};

using BasisVector = std::vector<double>;

/// Nonzero basis values at x. Points outside [lower, upper] are evaluated
/// by the polynomial extension of the boundary interval's pieces, which
/// keeps every basis function smooth across the domain boundary.
LocalBasis local_basis_at(const SplineGrid& grid, double x);

/// First derivatives of the same three basis functions.
LocalBasis local_basis_derivative_at(const SplineGrid& grid, double x);

/// Dense vector of all basis_count() basis values at x.
BasisVector basis_at(const SplineGrid& grid, double x);

/// Dense vector of all basis function derivatives at x.
BasisVector basis_derivative_at(const SplineGrid& grid, double x);

/// Spline value: dot product of `coefficients` with basis_at(grid, x).
double eval_spline(const SplineGrid& grid, std::span<const double> coefficients, double x);

/// Spline derivative at x.
double eval_spline_derivative(const SplineGrid& grid, std::span<const double> coefficients,
                              double x);

}  // namespace survkan
