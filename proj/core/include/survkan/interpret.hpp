#pragma once

#include <span>
#include <string>
#include <vector>

#include "survkan/dataset.hpp"
#include "survkan/kan.hpp"

namespace survkan {

/// Importance of one edge: batch-mean |phi| over the training inputs.
struct EdgeAttribution {
  int layer = 0;
  int output = 0;
  int input = 0;
  double score = 0.0;
};

/// Per-edge batch-mean |phi| over normalized input rows, sorted by
/// descending score (ties broken by position for determinism).
std::vector<EdgeAttribution> attribute(const KanNetwork& net, const Matrix& normalized_rows);

/// Returns a copy of the network with every edge whose attribution falls
/// below threshold * (its layer's max attribution) zeroed out, and hidden
/// nodes without surviving incoming or outgoing edges removed.
/// Throws OverPrunedError when no path to the output survives.
KanNetwork prune(const KanNetwork& net, const Matrix& normalized_rows, double threshold);

enum class FunctionKind { linear, quadratic, sqrt, exp, log, sin, tanh, abs, reciprocal };

const char* function_kind_name(FunctionKind kind);

/// One fitted closed-form term c * f(a * x + b) + d.
struct SymbolicTerm {
  FunctionKind kind = FunctionKind::linear;
  double inner_scale = 1.0;   // a
  double inner_shift = 0.0;   // b
  double outer_scale = 0.0;   // c
  double outer_shift = 0.0;   // d
  std::string input_name;
  int input_index = -1;       // feature column, or feature_count() for time
  double r_squared = 0.0;

  double evaluate(double x) const;
};

/// Fits the best template to the edge function over the given sample
/// points: (a, b) by coarse grid search plus deterministic local
/// refinement, (c, d) by ordinary least squares, kind selected by R^2
/// minus a 0.005 complexity penalty for non-linear kinds.
/// Needs >= 20 samples spanning a non-degenerate range.
SymbolicTerm fit_symbolic_term(const EdgeFunction& edge, std::span<const double> sample_xs);

/// Sum of per-input closed-form terms (in raw feature units) approximating
/// a single-layer network's log-hazard.
struct SymbolicModel {
  std::vector<SymbolicTerm> terms;
  double constant = 0.0;
  double fidelity = 0.0;  // R^2 against the network over the training inputs
  double time_scale = 0.0;

  /// Log-hazard of the formula at raw feature values and raw time.
  double evaluate(std::span<const double> features, double time) const;
};

/// Extracts the symbolic log-hazard formula of a single-layer (pruned or
/// m = 0) network: fits one term per surviving edge over the observed input
/// range, rewrites the inner transforms in raw feature units, absorbs the
/// outer shifts into a global constant, and reports the whole-model R^2.
SymbolicModel extract_formula(const KanNetwork& net, const SurvivalDataset& training_data,
                              const std::string& time_label = "time");

/// Plain-text rendering in the style of a fitted log-hazard equation.
std::string render_formula(const SymbolicModel& model);

struct EdgeSelector {
  int layer = 0;
  int output = 0;
  int input = 0;
};

/// Uniform samples of one edge function over the observed range of its
/// input, in normalized and raw units (hidden-layer inputs have no raw
/// units; both columns coincide there).
struct EdgeSampleTable {
  std::vector<double> x_raw;
  std::vector<double> x_norm;
  std::vector<double> phi;
};

EdgeSampleTable export_edge_samples(const KanNetwork& net, const SurvivalDataset& data,
                                    const EdgeSelector& selector, int n_points);

}  // namespace survkan
