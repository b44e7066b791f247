#include "oracles.hpp"

#include <stdexcept>

namespace oracle {

namespace {

double knot(const survkan::SplineGrid& grid, int i) { return grid.knot(i); }

/// N_{i,p}(x) by direct recursion over the knot vector.
double basis_recursive(const survkan::SplineGrid& grid, int i, int p, double x) {
  if (p == 0) return (knot(grid, i) <= x && x < knot(grid, i + 1)) ? 1.0 : 0.0;
  double left = 0.0, right = 0.0;
  const double den_l = knot(grid, i + p) - knot(grid, i);
  if (den_l != 0.0) left = (x - knot(grid, i)) / den_l * basis_recursive(grid, i, p - 1, x);
  const double den_r = knot(grid, i + p + 1) - knot(grid, i + 1);
  if (den_r != 0.0)
    right = (knot(grid, i + p + 1) - x) / den_r * basis_recursive(grid, i + 1, p - 1, x);
  return left + right;
}

}  // namespace

std::vector<double> cox_de_boor_basis(const survkan::SplineGrid& grid, double x) {
  std::vector<double> values(grid.basis_count());
  for (int i = 0; i < grid.basis_count(); ++i)
    values[i] = basis_recursive(grid, i, survkan::SplineGrid::degree, x);
  return values;
}

double cox_de_boor_spline(const survkan::SplineGrid& grid, std::span<const double> coefficients,
                          double x) {
  const std::vector<double> basis = cox_de_boor_basis(grid, x);
  double sum = 0.0;
  for (std::size_t i = 0; i < basis.size(); ++i) sum += coefficients[i] * basis[i];
  return sum;
}

double naive_forward(const survkan::KanNetwork& net, std::span<const double> features,
                     double time) {
  const int d = static_cast<int>(features.size());
  std::vector<double> current(d + 1);
  for (int k = 0; k < d; ++k)
    current[k] = (features[k] - net.normalizer.mean[k]) / net.normalizer.stddev[k];
  current[d] = time / net.normalizer.time_scale;

  for (const survkan::KanLayer& layer : net.layers) {
    std::vector<double> next(layer.out_width, 0.0);
    for (int j = 0; j < layer.out_width; ++j) {
      for (int i = 0; i < layer.in_width; ++i) {
        const survkan::EdgeFunction& edge = layer.edge(j, i);
        const double x = current[i];
        double base = x;
        if (edge.base_kind == survkan::BaseKind::silu) base = x / (1.0 + std::exp(-x));
        next[j] += edge.base_weight * base +
                   edge.spline_weight * cox_de_boor_spline(*edge.grid, edge.coefficients, x);
      }
    }
    current = next;
  }
  return current[0];
}

namespace {

template <typename Fn>
void for_each_parameter(survkan::KanNetwork& net, Fn&& fn) {
  for (auto& layer : net.layers) {
    for (auto& edge : layer.edges) {
      for (double& c : edge.coefficients) fn(c);
      fn(edge.base_weight);
      fn(edge.spline_weight);
    }
  }
}

}  // namespace

std::vector<double> finite_difference_gradient(survkan::KanNetwork& net,
                                               const std::function<double()>& loss, double step) {
  std::vector<double> grad;
  for_each_parameter(net, [&](double& p) {
    const double saved = p;
    p = saved + step;
    const double up = loss();
    p = saved - step;
    const double down = loss();
    p = saved;
    grad.push_back((up - down) / (2.0 * step));
  });
  return grad;
}

std::vector<double> flatten_parameters(const survkan::KanNetwork& net) {
  std::vector<double> out;
  for_each_parameter(const_cast<survkan::KanNetwork&>(net), [&](double& p) { out.push_back(p); });
  return out;
}

std::vector<double> flatten_gradients(const survkan::GradientTape& tape) {
  std::vector<double> out;
  for (const auto& layer : tape.layers) {
    for (const auto& grad : layer) {
      for (double c : grad.coefficients) out.push_back(c);
      out.push_back(grad.base_weight);
      out.push_back(grad.spline_weight);
    }
  }
  return out;
}

std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row)
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    if (std::abs(a[pivot][col]) < 1e-14) throw std::runtime_error("singular system");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t row = 0; row < n; ++row) {
      if (row == col) continue;
      const double f = a[row][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[row][c] -= f * a[col][c];
      b[row] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
  return x;
}

std::vector<double> project_onto_splines(const survkan::SplineGrid& grid,
                                         const std::function<double(double)>& f) {
  const int n = grid.basis_count();
  const int m = 400;
  std::vector<std::vector<double>> ata(n, std::vector<double>(n, 0.0));
  std::vector<double> aty(n, 0.0);
  for (int s = 0; s < m; ++s) {
    const double x = grid.lower() + (grid.upper() - grid.lower()) * s / (m - 1);
    const std::vector<double> basis = cox_de_boor_basis(grid, x);
    const double y = f(x);
    for (int i = 0; i < n; ++i) {
      aty[i] += basis[i] * y;
      for (int j = 0; j < n; ++j) ata[i][j] += basis[i] * basis[j];
    }
  }
  return solve_dense(std::move(ata), std::move(aty));
}

}  // namespace oracle
