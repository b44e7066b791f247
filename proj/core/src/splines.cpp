#include "survkan/splines.hpp"

#include <algorithm>
#include <cmath>

#include "survkan/errors.hpp"

namespace survkan {

namespace {

void require_finite(double x) {
  if (!std::isfinite(x)) throw InvalidInputError("spline query point is not finite");
}

/// Interval index for x, clamped into [0, intervals - 1]. Out-of-domain
/// points land on the boundary interval, whose polynomial pieces are then
/// evaluated as-is (polynomial extension).
int clamped_interval(const SplineGrid& grid, double x) {
  const int k = static_cast<int>(std::floor((x - grid.lower()) / grid.spacing()));
  return std::clamp(k, 0, grid.intervals() - 1);
}

}  // namespace

SplineGrid::SplineGrid(double lower, double upper, int intervals)
    : lower_(lower), upper_(upper), intervals_(intervals) {
  if (!std::isfinite(lower) || !std::isfinite(upper))
    throw InvalidInputError("spline grid bounds must be finite");
  if (!(lower < upper)) throw InvalidInputError("spline grid requires lower < upper");
  if (intervals < 1) throw InvalidInputError("spline grid requires at least one interval");
  spacing_ = (upper_ - lower_) / intervals_;
}

LocalBasis local_basis_at(const SplineGrid& grid, double x) {
  require_finite(x);
  const int k = clamped_interval(grid, x);
  const int m = SplineGrid::degree + k;  // knot span index: x in [knot(m), knot(m+1))

  // Fixed-span triangular recurrence (de Boor). With the span held fixed it
  // evaluates the span's polynomial pieces at any x, which is exactly the
  // extension rule for out-of-domain queries.
  LocalBasis out;
  out.first = k;
  double n[SplineGrid::degree + 1] = {1.0, 0.0, 0.0};
  double left[SplineGrid::degree + 1];
  double right[SplineGrid::degree + 1];
  for (int j = 1; j <= SplineGrid::degree; ++j) {
    left[j] = x - grid.knot(m + 1 - j);
    right[j] = grid.knot(m + j) - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = n[r] / (right[r + 1] + left[j - r]);
      n[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    n[j] = saved;
  }
  for (int i = 0; i <= SplineGrid::degree; ++i) out.values[i] = n[i];
  return out;
}

LocalBasis local_basis_derivative_at(const SplineGrid& grid, double x) {
  require_finite(x);
  const int k = clamped_interval(grid, x);
  const int m = SplineGrid::degree + k;

  // Degree-1 basis on the fixed span; two nonzero functions.
  const double t_m = grid.knot(m);
  const double t_m1 = grid.knot(m + 1);
  const double h = grid.spacing();
  const double n1_left = (t_m1 - x) / h;   // degree-1 basis with index k+1
  const double n1_right = (x - t_m) / h;   // degree-1 basis with index k+2

  // d/dx B_{j,2} = (B_{j,1} - B_{j+1,1}) / h on a uniform knot vector.
  LocalBasis out;
  out.first = k;
  out.values[0] = -n1_left / h;
  out.values[1] = (n1_left - n1_right) / h;
  out.values[2] = n1_right / h;
  return out;
}

BasisVector basis_at(const SplineGrid& grid, double x) {
  const LocalBasis local = local_basis_at(grid, x);
  BasisVector dense(grid.basis_count(), 0.0);
  for (int i = 0; i <= SplineGrid::degree; ++i) dense[local.first + i] = local.values[i];
  return dense;
}

BasisVector basis_derivative_at(const SplineGrid& grid, double x) {
  const LocalBasis local = local_basis_derivative_at(grid, x);
  BasisVector dense(grid.basis_count(), 0.0);
  for (int i = 0; i <= SplineGrid::degree; ++i) dense[local.first + i] = local.values[i];
  return dense;
}

double eval_spline(const SplineGrid& grid, std::span<const double> coefficients, double x) {
  if (static_cast<int>(coefficients.size()) != grid.basis_count())
    throw DimensionError("spline coefficient count does not match the grid basis count");
  const LocalBasis local = local_basis_at(grid, x);
  double sum = 0.0;
  for (int i = 0; i <= SplineGrid::degree; ++i)
    sum += coefficients[local.first + i] * local.values[i];
  return sum;
}

double eval_spline_derivative(const SplineGrid& grid, std::span<const double> coefficients,
                              double x) {
  if (static_cast<int>(coefficients.size()) != grid.basis_count())
    throw DimensionError("spline coefficient count does not match the grid basis count");
  const LocalBasis local = local_basis_derivative_at(grid, x);
  double sum = 0.0;
  for (int i = 0; i <= SplineGrid::degree; ++i)
    sum += coefficients[local.first + i] * local.values[i];
  return sum;
}

}  // namespace survkan
