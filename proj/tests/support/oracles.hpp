// Independent reference implementations used as test oracles. Everything
// here is deliberately written the slow, textbook way and shares no code
// with the library paths it checks.
#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "survkan/dataset.hpp"
#include "survkan/kan.hpp"
#include "survkan/splines.hpp"

namespace oracle {

/// Textbook Cox-de Boor recursion, one basis function at a time, using the
/// grid's full knot vector. Valid for x inside [lower, upper].
std::vector<double> cox_de_boor_basis(const survkan::SplineGrid& grid, double x);

double cox_de_boor_spline(const survkan::SplineGrid& grid, std::span<const double> coefficients,
                          double x);

/// Naive nested-loop KAN forward pass built on the Cox-de Boor oracle.
double naive_forward(const survkan::KanNetwork& net, std::span<const double> features,
                     double time);

/// Central finite differences of an arbitrary scalar function of the
/// network parameters. Returns gradients in the same flat order as the
/// parameters are visited (layer, edge, coefficients..., w_b, w_s).
std::vector<double> finite_difference_gradient(survkan::KanNetwork& net,
                                               const std::function<double()>& loss,
                                               double step = 1e-5);

/// Flat copies of all parameters in the canonical order.
std::vector<double> flatten_parameters(const survkan::KanNetwork& net);
std::vector<double> flatten_gradients(const survkan::GradientTape& tape);

/// Least-squares projection of f onto the grid's spline space (dense
/// normal equations; 400 uniform collocation points).
std::vector<double> project_onto_splines(const survkan::SplineGrid& grid,
                                         const std::function<double(double)>& f);

/// Gaussian elimination with partial pivoting for small dense systems.
std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b);

}  // namespace oracle
