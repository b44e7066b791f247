#include "survkan/kan.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "survkan/errors.hpp"
#include "survkan/rng.hpp"

namespace survkan {

namespace {

void require_finite_row(std::span<const double> row) {
  for (double v : row)
    if (!std::isfinite(v)) throw InvalidInputError("input row contains a non-finite value");
}

double local_dot(const LocalBasis& basis, std::span<const double> coefficients) {
  double sum = 0.0;
  for (int i = 0; i <= SplineGrid::degree; ++i)
    sum += coefficients[basis.first + i] * basis.values[i];
  return sum;
}

/// Flat edge index offsets per layer, for per-edge adjoint storage.
std::vector<int> edge_offsets(const KanNetwork& net) {
  std::vector<int> offsets(net.layers.size() + 1, 0);
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    offsets[l + 1] = offsets[l] + net.layers[l].in_width * net.layers[l].out_width;
  return offsets;
}

}  // namespace

double base_eval(BaseKind kind, double x) {
  if (kind == BaseKind::identity) return x;
  return x / (1.0 + std::exp(-x));  // SiLU
}

double base_derivative(BaseKind kind, double x) {
  if (kind == BaseKind::identity) return 1.0;
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

bool EdgeFunction::is_zero() const {
  if (base_weight != 0.0) return false;
  if (spline_weight == 0.0) return true;
  return std::all_of(coefficients.begin(), coefficients.end(), [](double c) { return c == 0.0; });
}

double edge_eval(const EdgeFunction& edge, double x) {
  if (!std::isfinite(x)) throw InvalidInputError("edge input is not finite");
  const LocalBasis basis = local_basis_at(*edge.grid, x);
  return edge.base_weight * base_eval(edge.base_kind, x) +
         edge.spline_weight * local_dot(basis, edge.coefficients);
}

double edge_derivative(const EdgeFunction& edge, double x) {
  if (!std::isfinite(x)) throw InvalidInputError("edge input is not finite");
  const LocalBasis dbasis = local_basis_derivative_at(*edge.grid, x);
  return edge.base_weight * base_derivative(edge.base_kind, x) +
         edge.spline_weight * local_dot(dbasis, edge.coefficients);
}

void Normalizer::normalize(std::span<const double> features, double time,
                           std::span<double> out) const {
  const int d = feature_count();
  for (int k = 0; k < d; ++k) out[k] = (features[k] - mean[k]) / stddev[k];
  out[d] = time / time_scale;
}

std::vector<int> KanNetwork::widths() const {
  std::vector<int> w;
  w.reserve(layers.size() + 1);
  for (const KanLayer& layer : layers) w.push_back(layer.in_width);
  if (!layers.empty()) w.push_back(layers.back().out_width);
  return w;
}

int KanNetwork::edge_count() const {
  int n = 0;
  for (const KanLayer& layer : layers) n += layer.in_width * layer.out_width;
  return n;
}

void KanNetwork::validate_structure() const {
  if (layers.empty()) throw InvalidInputError("network has no layers");
  if (layers.back().out_width != 1) throw DimensionError("final layer must have a single output");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const KanLayer& layer = layers[l];
    if (static_cast<int>(layer.edges.size()) != layer.in_width * layer.out_width)
      throw DimensionError("layer edge matrix does not match its widths");
    if (l + 1 < layers.size() && layer.out_width != layers[l + 1].in_width)
      throw DimensionError("consecutive layer widths do not chain");
    for (const EdgeFunction& edge : layer.edges) {
      if (!edge.grid) throw InvalidInputError("edge has no grid");
      if (static_cast<int>(edge.coefficients.size()) != edge.grid->basis_count())
        throw DimensionError("edge coefficient count does not match its grid");
      if (!std::isfinite(edge.base_weight) || !std::isfinite(edge.spline_weight))
        throw InvalidInputError("edge weight is not finite");
      for (double c : edge.coefficients)
        if (!std::isfinite(c)) throw InvalidInputError("edge coefficient is not finite");
    }
  }
}

void KanNetwork::validate() const {
  validate_structure();
  if (!normalizer.fitted()) throw StateError("normalization statistics are missing");
  if (normalizer.feature_count() != input_width() - 1)
    throw DimensionError("normalizer width does not match the network input width");
}

double forward_normalized(const KanNetwork& net, std::span<const double> normalized) {
  if (static_cast<int>(normalized.size()) != net.input_width())
    throw DimensionError("normalized row width does not match the network input width");
  std::vector<double> current(normalized.begin(), normalized.end());
  std::vector<double> next;
  for (const KanLayer& layer : net.layers) {
    next.assign(layer.out_width, 0.0);
    for (int j = 0; j < layer.out_width; ++j) {
      double sum = 0.0;
      for (int i = 0; i < layer.in_width; ++i) sum += edge_eval(layer.edge(j, i), current[i]);
      next[j] = sum;
    }
    current.swap(next);
  }
  return current[0];
}

double forward(const KanNetwork& net, std::span<const double> features, double time) {
  if (!net.normalizer.fitted()) throw StateError("normalization statistics are missing");
  if (static_cast<int>(features.size()) != net.feature_count())
    throw DimensionError("feature count does not match the network input width");
  require_finite_row(features);
  if (!std::isfinite(time) || time < 0.0) throw InvalidInputError("time must be finite and >= 0");
  std::vector<double> z(net.input_width());
  net.normalizer.normalize(features, time, z);
  return forward_normalized(net, z);
}

std::vector<double> forward_batch(const KanNetwork& net, const Matrix& feature_rows,
                                  std::span<const double> times) {
  if (feature_rows.rows() != static_cast<int>(times.size()))
    throw DimensionError("feature row count does not match the time count");
  std::vector<double> out(times.size());
  for (int r = 0; r < feature_rows.rows(); ++r)
    out[r] = forward(net, feature_rows.row(r), times[r]);
  return out;
}

// ---------------------------------------------------------------------------
// Regularization
// ---------------------------------------------------------------------------

namespace {

struct RegAccumulator {
  std::vector<double> l1_sums;  // flat per-edge sum of |phi| over the batch
};

/// Shared by regularization() and LossGraph::record_regularization: walks the
/// batch, optionally recording activations, and fills the per-edge |phi| sums.
RegBreakdown regularization_impl(const KanNetwork& net, const Matrix& rows,
                                 const RegWeights& weights, RegAccumulator* acc,
                                 std::vector<std::vector<std::vector<double>>>* recorded_acts) {
  net.validate_structure();
  if (rows.rows() == 0) throw InvalidInputError("regularization batch is empty");
  if (rows.cols() != net.input_width())
    throw DimensionError("regularization batch width does not match the network input width");

  const std::vector<int> offsets = edge_offsets(net);
  std::vector<double> l1(offsets.back(), 0.0);

  std::vector<double> current, next;
  for (int r = 0; r < rows.rows(); ++r) {
    auto row = rows.row(r);
    require_finite_row(row);
    current.assign(row.begin(), row.end());
    if (recorded_acts) recorded_acts->emplace_back();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const KanLayer& layer = net.layers[l];
      if (recorded_acts) recorded_acts->back().push_back(current);
      next.assign(layer.out_width, 0.0);
      for (int j = 0; j < layer.out_width; ++j) {
        double sum = 0.0;
        for (int i = 0; i < layer.in_width; ++i) {
          const double phi = edge_eval(layer.edge(j, i), current[i]);
          l1[offsets[l] + j * layer.in_width + i] += std::abs(phi);
          sum += phi;
        }
        next[j] = sum;
      }
      current.swap(next);
    }
  }
  const double inv_batch = 1.0 / rows.rows();
  for (double& v : l1) v *= inv_batch;

  RegBreakdown out;
  for (double v : l1) out.l1 += v;
  // Per-layer entropy of the L1 shares.
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    double total = 0.0;
    for (int e = offsets[l]; e < offsets[l + 1]; ++e) total += l1[e];
    if (total <= 0.0) continue;
    double h = 0.0;
    for (int e = offsets[l]; e < offsets[l + 1]; ++e) {
      const double p = l1[e] / total;
      if (p > 0.0) h -= p * std::log(p);
    }
    out.entropy += h;
  }
  for (const KanLayer& layer : net.layers) {
    for (const EdgeFunction& edge : layer.edges) {
      double norm_sq = 0.0;
      for (double c : edge.coefficients) norm_sq += c * c;
      out.coeff_norm += std::sqrt(norm_sq);
      double diff_sq = 0.0;
      for (std::size_t t = 1; t < edge.coefficients.size(); ++t) {
        const double d = edge.coefficients[t] - edge.coefficients[t - 1];
        diff_sq += d * d;
      }
      out.smoothness += std::sqrt(diff_sq);
    }
  }
  out.l1 *= weights.l1;
  out.entropy *= weights.entropy;
  out.coeff_norm *= weights.coeff_norm;
  out.smoothness *= weights.smoothness;
  if (acc) acc->l1_sums = std::move(l1);
  return out;
}

}  // namespace

RegBreakdown regularization(const KanNetwork& net, const Matrix& normalized_rows,
                            const RegWeights& weights) {
  return regularization_impl(net, normalized_rows, weights, nullptr, nullptr);
}

// ---------------------------------------------------------------------------
// Recording and reverse mode
// ---------------------------------------------------------------------------

int LossGraph::record_forward(const KanNetwork& net, std::span<const double> features,
                              double time) {
  if (!net.normalizer.fitted()) throw StateError("normalization statistics are missing");
  if (static_cast<int>(features.size()) != net.feature_count())
    throw DimensionError("feature count does not match the network input width");
  require_finite_row(features);
  if (!std::isfinite(time) || time < 0.0) throw InvalidInputError("time must be finite and >= 0");
  std::vector<double> z(net.input_width());
  net.normalizer.normalize(features, time, z);
  return record_forward_normalized(net, z);
}

int LossGraph::record_forward_normalized(const KanNetwork& net,
                                         std::span<const double> normalized) {
  if (static_cast<int>(normalized.size()) != net.input_width())
    throw DimensionError("normalized row width does not match the network input width");
  Node node;
  std::vector<double> current(normalized.begin(), normalized.end());
  std::vector<double> next;
  for (const KanLayer& layer : net.layers) {
    node.acts.push_back(current);
    next.assign(layer.out_width, 0.0);
    for (int j = 0; j < layer.out_width; ++j) {
      double sum = 0.0;
      for (int i = 0; i < layer.in_width; ++i) sum += edge_eval(layer.edge(j, i), current[i]);
      next[j] = sum;
    }
    current.swap(next);
  }
  node.output = current[0];
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

RegBreakdown LossGraph::record_regularization(const KanNetwork& net, const Matrix& rows,
                                              const RegWeights& weights, double lambda) {
  if (has_reg_) throw StateError("regularization already recorded on this graph");
  RegAccumulator acc;
  std::vector<std::vector<std::vector<double>>> acts;
  acts.reserve(rows.rows());
  const RegBreakdown breakdown = regularization_impl(net, rows, weights, &acc, &acts);

  const std::vector<int> offsets = edge_offsets(net);
  const int n_edges = offsets.back();
  const double inv_batch = 1.0 / rows.rows();

  // d(entropy_l)/d(l1_e) = -(log p_e + H_l) / S_l; zero-share edges and
  // all-zero layers get a zero adjoint.
  std::vector<double> dloss_dl1(n_edges, 0.0);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    double total = 0.0;
    for (int e = offsets[l]; e < offsets[l + 1]; ++e) total += acc.l1_sums[e];
    double h = 0.0;
    if (total > 0.0) {
      for (int e = offsets[l]; e < offsets[l + 1]; ++e) {
        const double p = acc.l1_sums[e] / total;
        if (p > 0.0) h -= p * std::log(p);
      }
    }
    for (int e = offsets[l]; e < offsets[l + 1]; ++e) {
      double g = weights.l1;
      if (total > 0.0 && acc.l1_sums[e] > 0.0)
        g -= weights.entropy * (std::log(acc.l1_sums[e] / total) + h) / total;
      dloss_dl1[e] = lambda * g;
    }
  }

  // One recorded node per row with per-edge injected adjoints
  // lambda * dLoss/dL1_e * sign(phi_e(row)) / batch.
  for (std::size_t r = 0; r < acts.size(); ++r) {
    Node node;
    node.acts = std::move(acts[r]);
    node.output = 0.0;
    node.edge_adjoints.assign(n_edges, 0.0);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      const KanLayer& layer = net.layers[l];
      for (int j = 0; j < layer.out_width; ++j) {
        for (int i = 0; i < layer.in_width; ++i) {
          const double phi = edge_eval(layer.edge(j, i), node.acts[l][i]);
          const double sign = phi > 0.0 ? 1.0 : (phi < 0.0 ? -1.0 : 0.0);
          const int e = offsets[l] + j * layer.in_width + i;
          node.edge_adjoints[e] = dloss_dl1[e] * sign * inv_batch;
        }
      }
    }
    nodes_.push_back(std::move(node));
  }

  has_reg_ = true;
  reg_weights_ = weights;
  reg_lambda_ = lambda;
  return breakdown;
}

void LossGraph::clear() {
  nodes_.clear();
  has_reg_ = false;
  reg_lambda_ = 0.0;
}

GradientTape GradientTape::zeros_like(const KanNetwork& net) {
  GradientTape tape;
  tape.layers.resize(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    tape.layers[l].resize(net.layers[l].edges.size());
    for (std::size_t e = 0; e < net.layers[l].edges.size(); ++e)
      tape.layers[l][e].coefficients.assign(net.layers[l].edges[e].coefficients.size(), 0.0);
  }
  return tape;
}

GradientTape backward(const KanNetwork& net, const LossGraph& graph) {
  if (!graph.recorded()) throw StateError("backward called with no recorded computation");
  net.validate_structure();
  GradientTape tape = GradientTape::zeros_like(net);
  const std::vector<int> offsets = edge_offsets(net);
  const int n_layers = static_cast<int>(net.layers.size());

  std::vector<double> upper, lower;
  for (const LossGraph::Node& node : graph.nodes_) {
    upper.assign(1, node.output_adjoint);
    for (int l = n_layers - 1; l >= 0; --l) {
      const KanLayer& layer = net.layers[l];
      lower.assign(layer.in_width, 0.0);
      for (int j = 0; j < layer.out_width; ++j) {
        for (int i = 0; i < layer.in_width; ++i) {
          double g = upper[j];
          if (!node.edge_adjoints.empty())
            g += node.edge_adjoints[offsets[l] + j * layer.in_width + i];
          if (g == 0.0) continue;
          const EdgeFunction& edge = layer.edge(j, i);
          const double x = node.acts[l][i];
          const LocalBasis basis = local_basis_at(*edge.grid, x);
          EdgeGradient& grad = tape.layers[l][static_cast<std::size_t>(j) * layer.in_width + i];
          grad.base_weight += g * base_eval(edge.base_kind, x);
          grad.spline_weight += g * local_dot(basis, edge.coefficients);
          for (int t = 0; t <= SplineGrid::degree; ++t)
            grad.coefficients[basis.first + t] += g * edge.spline_weight * basis.values[t];
          if (l > 0) {
            const LocalBasis dbasis = local_basis_derivative_at(*edge.grid, x);
            lower[i] += g * (edge.base_weight * base_derivative(edge.base_kind, x) +
                             edge.spline_weight * local_dot(dbasis, edge.coefficients));
          }
        }
      }
      upper.swap(lower);
    }
  }

  // Coefficient-norm terms act directly on the parameters.
  if (graph.has_reg_) {
    const double w3 = graph.reg_lambda_ * graph.reg_weights_.coeff_norm;
    const double w4 = graph.reg_lambda_ * graph.reg_weights_.smoothness;
    for (int l = 0; l < n_layers; ++l) {
      const KanLayer& layer = net.layers[l];
      for (std::size_t e = 0; e < layer.edges.size(); ++e) {
        const std::vector<double>& c = layer.edges[e].coefficients;
        EdgeGradient& grad = tape.layers[l][e];
        double norm_sq = 0.0;
        for (double v : c) norm_sq += v * v;
        if (norm_sq > 0.0) {
          const double inv_norm = 1.0 / std::sqrt(norm_sq);
          for (std::size_t t = 0; t < c.size(); ++t)
            grad.coefficients[t] += w3 * c[t] * inv_norm;
        }
        double diff_sq = 0.0;
        for (std::size_t t = 1; t < c.size(); ++t) {
          const double d = c[t] - c[t - 1];
          diff_sq += d * d;
        }
        if (diff_sq > 0.0) {
          const double inv_norm = 1.0 / std::sqrt(diff_sq);
          for (std::size_t t = 1; t < c.size(); ++t) {
            const double d = w4 * (c[t] - c[t - 1]) * inv_norm;
            grad.coefficients[t] += d;
            grad.coefficients[t - 1] -= d;
          }
        }
      }
    }
  }
  return tape;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

KanNetwork build_network(int feature_count, int hidden_width, int grid_intervals,
                         std::span<const double> input_lower, std::span<const double> input_upper,
                         BaseKind base_kind, std::uint64_t init_seed) {
  if (feature_count < 0) throw InvalidInputError("feature count must be >= 0");
  if (hidden_width < 0 || hidden_width > 3)
    throw InvalidInputError("hidden width must lie in {0, 1, 2, 3}");
  if (grid_intervals < 1) throw InvalidInputError("grid intervals must be >= 1");
  const int in_width = feature_count + 1;
  if (static_cast<int>(input_lower.size()) != in_width ||
      static_cast<int>(input_upper.size()) != in_width)
    throw DimensionError("input domain arrays must have feature_count + 1 entries");

  std::vector<std::shared_ptr<const SplineGrid>> input_grids(in_width);
  for (int i = 0; i < in_width; ++i)
    input_grids[i] = std::make_shared<SplineGrid>(input_lower[i], input_upper[i], grid_intervals);
  const auto hidden_grid = std::make_shared<SplineGrid>(-3.0, 3.0, grid_intervals);

  std::vector<int> widths;
  if (hidden_width == 0)
    widths = {in_width, 1};
  else
    widths = {in_width, hidden_width, 1};

  Rng rng(init_seed);
  KanNetwork net;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    KanLayer layer;
    layer.in_width = widths[l];
    layer.out_width = widths[l + 1];
    layer.edges.resize(static_cast<std::size_t>(layer.in_width) * layer.out_width);
    const double coeff_sigma = 0.1 / std::sqrt(grid_intervals + SplineGrid::degree);
    const double base_sigma = 1.0 / std::sqrt(layer.in_width);
    for (int j = 0; j < layer.out_width; ++j) {
      for (int i = 0; i < layer.in_width; ++i) {
        EdgeFunction& edge = layer.edge(j, i);
        edge.grid = (l == 0) ? input_grids[i] : hidden_grid;
        edge.base_kind = base_kind;
        edge.coefficients.resize(edge.grid->basis_count());
        for (double& c : edge.coefficients) c = rng.normal(0.0, coeff_sigma);
        edge.spline_weight = 1.0;
        edge.base_weight = rng.normal(0.0, base_sigma);
      }
    }
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace survkan
