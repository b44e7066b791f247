#pragma once

#include <array>
#include <memory>
#include <span>
#include <vector>

#include "survkan/dataset.hpp"
#include "survkan/splines.hpp"

namespace survkan {

enum class BaseKind { identity, silu };

double base_eval(BaseKind kind, double x);
double base_derivative(BaseKind kind, double x);

/// One learnable univariate map phi(x) = w_b * b(x) + w_s * spline(x).
/// Edges fed by the same input slot share their grid.
struct EdgeFunction {
  std::shared_ptr<const SplineGrid> grid;
  std::vector<double> coefficients;  // size grid->basis_count()
  double base_weight = 0.0;
  double spline_weight = 0.0;
  BaseKind base_kind = BaseKind::silu;

  /// True when the edge contributes nothing for any input.
  bool is_zero() const;
};

double edge_eval(const EdgeFunction& edge, double x);
double edge_derivative(const EdgeFunction& edge, double x);

/// Dense layer of edge functions; node j outputs the sum of
/// edge(j, i) applied to input i.
struct KanLayer {
  int in_width = 0;
  int out_width = 0;
  std::vector<EdgeFunction> edges;  // row-major: edges[j * in_width + i]

  EdgeFunction& edge(int out, int in) { return edges[static_cast<std::size_t>(out) * in_width + in]; }
  const EdgeFunction& edge(int out, int in) const {
    return edges[static_cast<std::size_t>(out) * in_width + in];
  }
};

/// Z-score statistics for the feature columns plus the training time scale.
/// The normalized input row is [(x - mean) / stddev ..., time / time_scale].
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;
  double time_scale = 0.0;

  bool fitted() const { return time_scale > 0.0 && mean.size() == stddev.size(); }
  int feature_count() const { return static_cast<int>(mean.size()); }
  void normalize(std::span<const double> features, double time, std::span<double> out) const;
};

/// The full log-hazard model: a stack of KAN layers over the normalized
/// [features, time] input. The final layer has a single output.
struct KanNetwork {
  std::vector<KanLayer> layers;
  Normalizer normalizer;

  int input_width() const { return layers.empty() ? 0 : layers.front().in_width; }
  int feature_count() const { return input_width() - 1; }
  std::vector<int> widths() const;
  int edge_count() const;

  /// Structural invariants only (widths chain, edge shapes, finite params).
  void validate_structure() const;
  /// Structural invariants plus fitted normalization statistics.
  void validate() const;
};

/// Raw network output for one subject: normalize, concatenate, run the
/// layers. This is the log-hazard BEFORE clamping.
double forward(const KanNetwork& net, std::span<const double> features, double time);

/// Elementwise forward over rows; identical to per-row calls.
std::vector<double> forward_batch(const KanNetwork& net, const Matrix& feature_rows,
                                  std::span<const double> times);

/// Forward pass on an already normalized input row.
double forward_normalized(const KanNetwork& net, std::span<const double> normalized);

struct RegWeights {
  double l1 = 1.0;
  double entropy = 2.0;
  double coeff_norm = 0.1;
  double smoothness = 0.1;
};

/// The four regularization sums, each already multiplied by its term weight.
struct RegBreakdown {
  double l1 = 0.0;
  double entropy = 0.0;
  double coeff_norm = 0.0;
  double smoothness = 0.0;
  double total() const { return l1 + entropy + coeff_norm + smoothness; }
};

/// Structured regularization over a batch of normalized input rows:
///  1. mean |phi| per edge (batch-size invariant L1),
///  2. per-layer entropy of the normalized L1 shares,
///  3. L2 norm of each edge's spline coefficients,
///  4. L2 norm of the first differences of those coefficients.
RegBreakdown regularization(const KanNetwork& net, const Matrix& normalized_rows,
                            const RegWeights& weights = {});

/// Gradients for one edge's parameters.
struct EdgeGradient {
  std::vector<double> coefficients;
  double base_weight = 0.0;
  double spline_weight = 0.0;
};

/// Parameter gradients mirroring a network's edges.
struct GradientTape {
  std::vector<std::vector<EdgeGradient>> layers;  // layers[l][j * in_width + i]

  static GradientTape zeros_like(const KanNetwork& net);
  EdgeGradient& edge(int layer, int out, int in_width, int in) {
    return layers[layer][static_cast<std::size_t>(out) * in_width + in];
  }
};

/// Recording of one scalar loss evaluation. Callers register network
/// evaluations (storing per-layer activations), seed output adjoints, and
/// optionally record the regularization term; backward() then replays the
/// whole recording in reverse.
class LossGraph {
 public:
  /// Forward pass with activation recording; returns the node index.
  int record_forward(const KanNetwork& net, std::span<const double> features, double time);
  int record_forward_normalized(const KanNetwork& net, std::span<const double> normalized);

  /// Raw (pre-clamp) output of a recorded node.
  double node_output(int node) const { return nodes_[node].output; }

  /// Adds d(loss)/d(raw output) for a recorded node. Callers that clamp the
  /// output must pre-multiply by the clamp derivative (0 outside the band).
  void add_output_adjoint(int node, double adjoint) { nodes_[node].output_adjoint += adjoint; }

  /// Evaluates and records the weighted regularization term for the given
  /// normalized rows. Returns the breakdown; backward() will propagate
  /// lambda * total() into the parameter gradients.
  RegBreakdown record_regularization(const KanNetwork& net, const Matrix& normalized_rows,
                                     const RegWeights& weights, double lambda);

  void clear();
  bool recorded() const { return !nodes_.empty() || has_reg_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }

 private:
  friend GradientTape backward(const KanNetwork& net, const LossGraph& graph);

  struct Node {
    std::vector<std::vector<double>> acts;  // acts[l] = input row of layer l
    double output = 0.0;
    double output_adjoint = 0.0;
    std::vector<double> edge_adjoints;  // flat per-edge injected adjoints; empty if none
  };

  std::vector<Node> nodes_;
  bool has_reg_ = false;
  RegWeights reg_weights_;
  double reg_lambda_ = 0.0;
};

/// Exact reverse-mode gradients of the recorded scalar loss with respect to
/// every coefficient vector, base weight and spline weight.
/// Throws StateError when nothing has been recorded.
GradientTape backward(const KanNetwork& net, const LossGraph& graph);

/// Network construction used by training and tests: widths [d+1, m, 1]
/// (m = 0 collapses to a single layer), per-input-slot grids, seeded
/// parameter initialization. `input_lower/upper` give the spline domain of
/// each layer-0 input slot; hidden slots use [-3, 3].
KanNetwork build_network(int feature_count, int hidden_width, int grid_intervals,
                         std::span<const double> input_lower, std::span<const double> input_upper,
                         BaseKind base_kind, std::uint64_t init_seed);

}  // namespace survkan
