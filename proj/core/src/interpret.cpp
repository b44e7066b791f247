#include "survkan/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "survkan/errors.hpp"
#include "survkan/textio.hpp"

namespace survkan {

// ---------------------------------------------------------------------------
// Attribution and pruning
// ---------------------------------------------------------------------------

std::vector<EdgeAttribution> attribute(const KanNetwork& net, const Matrix& normalized_rows) {
  net.validate_structure();
  if (normalized_rows.rows() == 0) throw InvalidInputError("attribution needs a non-empty batch");
  if (normalized_rows.cols() != net.input_width())
    throw DimensionError("attribution batch width does not match the network input width");

  std::vector<EdgeAttribution> scores;
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    for (int j = 0; j < net.layers[l].out_width; ++j)
      for (int i = 0; i < net.layers[l].in_width; ++i)
        scores.push_back({static_cast<int>(l), j, i, 0.0});

  std::vector<double> current, next;
  for (int r = 0; r < normalized_rows.rows(); ++r) {
    auto row = normalized_rows.row(r);
    current.assign(row.begin(), row.end());
    std::size_t flat = 0;
    for (const KanLayer& layer : net.layers) {
      next.assign(layer.out_width, 0.0);
      for (int j = 0; j < layer.out_width; ++j) {
        double sum = 0.0;
        for (int i = 0; i < layer.in_width; ++i) {
          const double phi = edge_eval(layer.edge(j, i), current[i]);
          scores[flat + static_cast<std::size_t>(j) * layer.in_width + i].score += std::abs(phi);
          sum += phi;
        }
        next[j] = sum;
      }
      flat += static_cast<std::size_t>(layer.in_width) * layer.out_width;
      current.swap(next);
    }
  }
  for (EdgeAttribution& a : scores) a.score /= normalized_rows.rows();
  std::stable_sort(scores.begin(), scores.end(),
                   [](const EdgeAttribution& x, const EdgeAttribution& y) { return x.score > y.score; });
  return scores;
}

KanNetwork prune(const KanNetwork& net, const Matrix& normalized_rows, double threshold) {
  if (threshold < 0.0) throw InvalidInputError("prune threshold must be >= 0");
  const std::vector<EdgeAttribution> scores = attribute(net, normalized_rows);

  const int n_layers = static_cast<int>(net.layers.size());
  std::vector<double> layer_max(n_layers, 0.0);
  std::vector<std::vector<double>> score_grid(n_layers);
  for (int l = 0; l < n_layers; ++l)
    score_grid[l].assign(net.layers[l].edges.size(), 0.0);
  for (const EdgeAttribution& a : scores) {
    score_grid[a.layer][static_cast<std::size_t>(a.output) * net.layers[a.layer].in_width + a.input] =
        a.score;
    layer_max[a.layer] = std::max(layer_max[a.layer], a.score);
  }

  // survives[l][j*in+i]: attribution at or above threshold * layer max
  std::vector<std::vector<char>> survives(n_layers);
  for (int l = 0; l < n_layers; ++l) {
    survives[l].assign(net.layers[l].edges.size(), 0);
    for (std::size_t e = 0; e < survives[l].size(); ++e)
      survives[l][e] = score_grid[l][e] >= threshold * layer_max[l] ? 1 : 0;
  }

  // Node liveness: reachable from the inputs and reaching the output.
  std::vector<std::vector<char>> fwd(n_layers + 1), bwd(n_layers + 1);
  fwd[0].assign(net.layers[0].in_width, 1);
  for (int l = 0; l < n_layers; ++l) {
    fwd[l + 1].assign(net.layers[l].out_width, 0);
    for (int j = 0; j < net.layers[l].out_width; ++j)
      for (int i = 0; i < net.layers[l].in_width; ++i)
        if (survives[l][static_cast<std::size_t>(j) * net.layers[l].in_width + i] && fwd[l][i])
          fwd[l + 1][j] = 1;
  }
  bwd[n_layers].assign(1, 1);
  for (int l = n_layers - 1; l >= 0; --l) {
    bwd[l].assign(net.layers[l].in_width, 0);
    for (int j = 0; j < net.layers[l].out_width; ++j)
      for (int i = 0; i < net.layers[l].in_width; ++i)
        if (survives[l][static_cast<std::size_t>(j) * net.layers[l].in_width + i] && bwd[l + 1][j])
          bwd[l][i] = 1;
  }
  if (!fwd[n_layers][0]) throw OverPrunedError("pruning removed every path to the output");

  // Hidden nodes keep their slot only when alive in both directions;
  // inputs and the output always keep theirs.
  std::vector<std::vector<int>> kept(n_layers + 1);
  for (int i = 0; i < net.layers[0].in_width; ++i) kept[0].push_back(i);
  for (int l = 1; l < n_layers; ++l)
    for (int i = 0; i < net.layers[l].in_width; ++i)
      if (fwd[l][i] && bwd[l][i]) kept[l].push_back(i);
  kept[n_layers].push_back(0);

  KanNetwork out;
  out.normalizer = net.normalizer;
  for (int l = 0; l < n_layers; ++l) {
    KanLayer layer;
    layer.in_width = static_cast<int>(kept[l].size());
    layer.out_width = static_cast<int>(kept[l + 1].size());
    layer.edges.resize(static_cast<std::size_t>(layer.in_width) * layer.out_width);
    for (int j = 0; j < layer.out_width; ++j) {
      for (int i = 0; i < layer.in_width; ++i) {
        const int src_j = kept[l + 1][j];
        const int src_i = kept[l][i];
        EdgeFunction edge = net.layers[l].edge(src_j, src_i);
        if (!survives[l][static_cast<std::size_t>(src_j) * net.layers[l].in_width + src_i]) {
          edge.base_weight = 0.0;
          edge.spline_weight = 0.0;
          std::fill(edge.coefficients.begin(), edge.coefficients.end(), 0.0);
        }
        layer.edge(j, i) = std::move(edge);
      }
    }
    out.layers.push_back(std::move(layer));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Symbolic regression
// ---------------------------------------------------------------------------

const char* function_kind_name(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::linear: return "linear";
    case FunctionKind::quadratic: return "quadratic";
    case FunctionKind::sqrt: return "sqrt";
    case FunctionKind::exp: return "exp";
    case FunctionKind::log: return "log";
    case FunctionKind::sin: return "sin";
    case FunctionKind::tanh: return "tanh";
    case FunctionKind::abs: return "abs";
    case FunctionKind::reciprocal: return "reciprocal";
  }
  return "?";
}

namespace {

double apply_kind(FunctionKind kind, double u) {
  switch (kind) {
    case FunctionKind::linear: return u;
    case FunctionKind::quadratic: return u * u;
    case FunctionKind::sqrt: return u >= 0.0 ? std::sqrt(u) : std::numeric_limits<double>::quiet_NaN();
    case FunctionKind::exp: return std::abs(u) > 60.0 ? std::numeric_limits<double>::quiet_NaN() : std::exp(u);
    case FunctionKind::log: return u > 0.0 ? std::log(u) : std::numeric_limits<double>::quiet_NaN();
    case FunctionKind::sin: return std::sin(u);
    case FunctionKind::tanh: return std::tanh(u);
    case FunctionKind::abs: return std::abs(u);
    case FunctionKind::reciprocal:
      return std::abs(u) > 1e-12 ? 1.0 / u : std::numeric_limits<double>::quiet_NaN();
  }
  return 0.0;
}

struct OlsFit {
  double c = 0.0, d = 0.0, r2 = -std::numeric_limits<double>::infinity();
  bool ok = false;
};

/// Least squares of y on (u, 1); r2 relative to the variance of y.
OlsFit ols(std::span<const double> u, std::span<const double> y, double y_mean, double y_sst) {
  const std::size_t n = u.size();
  double u_mean = 0.0;
  for (double v : u) {
    if (!std::isfinite(v)) return {};
    u_mean += v;
  }
  u_mean /= n;
  double suu = 0.0, suy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = u[i] - u_mean;
    suu += du * du;
    suy += du * (y[i] - y_mean);
  }
  OlsFit fit;
  if (suu < 1e-14) return {};  // f is constant over the range: no information
  fit.c = suy / suu;
  fit.d = y_mean - fit.c * u_mean;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.c * u[i] + fit.d);
    sse += r * r;
  }
  fit.r2 = 1.0 - sse / y_sst;
  fit.ok = true;
  return fit;
}

struct KindFit {
  double a = 1.0, b = 0.0;
  OlsFit ols;
};

double kind_r2(FunctionKind kind, double a, double b, std::span<const double> xs,
               std::span<const double> ys, double y_mean, double y_sst, OlsFit* out,
               std::vector<double>& u_buffer) {
  u_buffer.resize(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    u_buffer[i] = apply_kind(kind, a * xs[i] + b);
    if (!std::isfinite(u_buffer[i])) return -std::numeric_limits<double>::infinity();
  }
  const OlsFit fit = ols(u_buffer, ys, y_mean, y_sst);
  if (!fit.ok) return -std::numeric_limits<double>::infinity();
  if (out) *out = fit;
  return fit.r2;
}

/// Deterministic pattern-search refinement of (a, b).
KindFit refine(FunctionKind kind, KindFit start, std::span<const double> xs,
               std::span<const double> ys, double y_mean, double y_sst, double da, double db,
               std::vector<double>& u_buffer) {
  KindFit best = start;
  double best_r2 = kind_r2(kind, best.a, best.b, xs, ys, y_mean, y_sst, &best.ols, u_buffer);
  for (int round = 0; round < 48; ++round) {
    bool improved = false;
    const double cand[4][2] = {{best.a + da, best.b}, {best.a - da, best.b},
                               {best.a, best.b + db}, {best.a, best.b - db}};
    for (const auto& candidate : cand) {
      OlsFit fit;
      const double r2 = kind_r2(kind, candidate[0], candidate[1], xs, ys, y_mean, y_sst, &fit,
                                u_buffer);
      if (r2 > best_r2) {
        best_r2 = r2;
        best.a = candidate[0];
        best.b = candidate[1];
        best.ols = fit;
        improved = true;
      }
    }
    if (!improved) {
      da *= 0.5;
      db *= 0.5;
      if (da < 1e-9 && db < 1e-9) break;
    }
  }
  return best;
}

/// Exact least-squares parabola fit, mapped to the c (a x + b)^2 + d form.
bool quadratic_fit(std::span<const double> xs, std::span<const double> ys, double y_mean,
                   double y_sst, KindFit* out) {
  const std::size_t n = xs.size();
  // Normal equations for y = p2 x^2 + p1 x + p0.
  double s1 = 0, s2 = 0, s3 = 0, s4 = 0, sy = 0, sxy = 0, sx2y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs[i], x2 = x * x;
    s1 += x;
    s2 += x2;
    s3 += x2 * x;
    s4 += x2 * x2;
    sy += ys[i];
    sxy += x * ys[i];
    sx2y += x2 * ys[i];
  }
  double m[3][4] = {{s4, s3, s2, sx2y}, {s3, s2, s1, sxy}, {s2, s1, static_cast<double>(n), sy}};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 3; ++row)
      if (std::abs(m[row][col]) > std::abs(m[pivot][col])) pivot = row;
    if (std::abs(m[pivot][col]) < 1e-12) return false;
    std::swap(m[col], m[pivot]);
    for (int row = 0; row < 3; ++row) {
      if (row == col) continue;
      const double f = m[row][col] / m[col][col];
      for (int c2 = col; c2 < 4; ++c2) m[row][c2] -= f * m[col][c2];
    }
  }
  const double p2 = m[0][3] / m[0][0];
  const double p1 = m[1][3] / m[1][1];
  const double p0 = m[2][3] / m[2][2];
  if (std::abs(p2) < 1e-12) return false;  // degenerates to linear
  out->a = 1.0;
  out->b = p1 / (2.0 * p2);
  out->ols.c = p2;
  out->ols.d = p0 - p2 * out->b * out->b;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = xs[i] + out->b;
    const double r = ys[i] - (out->ols.c * u * u + out->ols.d);
    sse += r * r;
  }
  out->ols.r2 = 1.0 - sse / y_sst;
  out->ols.ok = true;
  (void)y_mean;
  return true;
}

}  // namespace

double SymbolicTerm::evaluate(double x) const {
  return outer_scale * apply_kind(kind, inner_scale * x + inner_shift) + outer_shift;
}

SymbolicTerm fit_symbolic_term(const EdgeFunction& edge, std::span<const double> sample_xs) {
  if (sample_xs.size() < 20)
    throw InvalidInputError("symbolic fitting needs at least 20 sample points");
  std::vector<double> xs(sample_xs.begin(), sample_xs.end());
  std::sort(xs.begin(), xs.end());
  const double x_lo = xs.front(), x_hi = xs.back();
  const double width = x_hi - x_lo;
  if (!(width > 1e-9)) throw UnfittableError("sample points are degenerate (constant input)");

  std::vector<double> ys(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = edge_eval(edge, xs[i]);
  double y_mean = 0.0;
  for (double y : ys) y_mean += y;
  y_mean /= ys.size();
  double y_sst = 0.0;
  for (double y : ys) y_sst += (y - y_mean) * (y - y_mean);

  SymbolicTerm term;
  if (y_sst < 1e-18) {
    // Constant edge: an exact zero-slope line.
    term.kind = FunctionKind::linear;
    term.outer_scale = 0.0;
    term.outer_shift = y_mean;
    term.r_squared = 1.0;
    return term;
  }

  std::vector<double> u_buffer;
  double best_score = -std::numeric_limits<double>::infinity();

  const auto consider = [&](FunctionKind kind, const KindFit& fit) {
    if (!fit.ols.ok) return;
    const double penalty = kind == FunctionKind::linear ? 0.0 : 0.005;
    const double score = fit.ols.r2 - penalty;
    if (score > best_score + 1e-12) {
      best_score = score;
      term.kind = kind;
      term.inner_scale = fit.a;
      term.inner_shift = fit.b;
      term.outer_scale = fit.ols.c;
      term.outer_shift = fit.ols.d;
      term.r_squared = fit.ols.r2;
    }
  };

  // linear: closed form with the (a, b) gauge fixed at (1, 0).
  {
    KindFit fit{1.0, 0.0, {}};
    kind_r2(FunctionKind::linear, 1.0, 0.0, xs, ys, y_mean, y_sst, &fit.ols, u_buffer);
    consider(FunctionKind::linear, fit);
  }
  // quadratic: exact least squares.
  {
    KindFit fit;
    if (quadratic_fit(xs, ys, y_mean, y_sst, &fit)) consider(FunctionKind::quadratic, fit);
  }

  const auto grid_then_refine = [&](FunctionKind kind, const std::vector<double>& a_grid,
                                    const std::vector<double>& b_grid_rel, bool b_from_edge) {
    KindFit best;
    double best_r2 = -std::numeric_limits<double>::infinity();
    for (double a : a_grid) {
      for (double t : b_grid_rel) {
        // Domain-anchored shift: for one-sided kinds the grid walks the
        // distance between the domain edge and the argument's zero.
        double b;
        if (b_from_edge)
          b = (a > 0.0 ? -a * x_lo : -a * x_hi) + t * std::abs(a) * width;
        else
          b = t;
        const double r2 = kind_r2(kind, a, b, xs, ys, y_mean, y_sst, nullptr, u_buffer);
        if (r2 > best_r2) {
          best_r2 = r2;
          best.a = a;
          best.b = b;
        }
      }
    }
    if (best_r2 == -std::numeric_limits<double>::infinity()) return;
    const double da = std::abs(best.a) > 0 ? 0.25 * std::abs(best.a) : 0.1 / width;
    const double db = 0.25 * std::abs(best.a) * width + 1e-6;
    consider(kind, refine(kind, best, xs, ys, y_mean, y_sst, da, db, u_buffer));
  };

  std::vector<double> a_signed, a_positive;
  for (int i = 0; i < 14; ++i) {
    const double mag = (0.25 * std::pow(2.0, i * 0.5)) / width;
    a_positive.push_back(mag);
    a_signed.push_back(mag);
    a_signed.push_back(-mag);
  }
  std::vector<double> t_one_sided;  // offset from the domain edge, in |a|*width units
  for (int i = 0; i <= 20; ++i) t_one_sided.push_back(0.02 + 0.12 * i);
  std::vector<double> phase;
  for (int i = 0; i <= 24; ++i) phase.push_back(-3.14159265358979323846 + i * (2.0 * 3.14159265358979323846 / 24.0));
  std::vector<double> center_shift;  // absolute b for tanh/abs-like kinds
  const double mid = 0.5 * (x_lo + x_hi);
  for (int i = 0; i <= 16; ++i) center_shift.push_back(-(mid + (i - 8) * width / 8.0));

  grid_then_refine(FunctionKind::sqrt, a_signed, t_one_sided, true);
  grid_then_refine(FunctionKind::log, a_signed, t_one_sided, true);
  grid_then_refine(FunctionKind::reciprocal, a_signed, t_one_sided, true);
  {
    // exp: the inner shift is gauge (absorbed by c), so only a is searched.
    KindFit best;
    double best_r2 = -std::numeric_limits<double>::infinity();
    for (double a : a_signed) {
      const double r2 = kind_r2(FunctionKind::exp, a, 0.0, xs, ys, y_mean, y_sst, nullptr, u_buffer);
      if (r2 > best_r2) {
        best_r2 = r2;
        best.a = a;
      }
    }
    if (best_r2 > -std::numeric_limits<double>::infinity())
      consider(FunctionKind::exp,
               refine(FunctionKind::exp, best, xs, ys, y_mean, y_sst, 0.25 * std::abs(best.a),
                      0.25, u_buffer));
  }
  grid_then_refine(FunctionKind::sin, a_positive, phase, false);
  grid_then_refine(FunctionKind::tanh, a_signed, center_shift, false);
  {
    // abs: |a| is gauge; search the kink location with a fixed at 1.
    KindFit best;
    double best_r2 = -std::numeric_limits<double>::infinity();
    for (double b : center_shift) {
      const double r2 = kind_r2(FunctionKind::abs, 1.0, b, xs, ys, y_mean, y_sst, nullptr, u_buffer);
      if (r2 > best_r2) {
        best_r2 = r2;
        best.a = 1.0;
        best.b = b;
      }
    }
    if (best_r2 > -std::numeric_limits<double>::infinity())
      consider(FunctionKind::abs,
               refine(FunctionKind::abs, best, xs, ys, y_mean, y_sst, 0.0, width / 16.0, u_buffer));
  }

  if (best_score == -std::numeric_limits<double>::infinity())
    throw UnfittableError("no symbolic template fits the edge samples");
  return term;
}

// ---------------------------------------------------------------------------
// Whole-model extraction
// ---------------------------------------------------------------------------

double SymbolicModel::evaluate(std::span<const double> features, double time) const {
  double sum = constant;
  const int d = static_cast<int>(features.size());
  for (const SymbolicTerm& term : terms) {
    const double x = term.input_index == d ? time : features[term.input_index];
    sum += term.evaluate(x);
  }
  return sum;
}

SymbolicModel extract_formula(const KanNetwork& net, const SurvivalDataset& training_data,
                              const std::string& time_label) {
  net.validate();
  training_data.validate();
  if (net.layers.size() != 1)
    throw UnsupportedShapeError(
        "formula extraction needs a single-layer network (m = 0 or fully pruned)");
  if (training_data.size() == 0) throw InvalidInputError("formula extraction needs training rows");
  if (training_data.feature_count() != net.feature_count())
    throw DimensionError("dataset width does not match the network");

  const KanLayer& layer = net.layers.front();
  const int d = net.feature_count();

  Matrix rows(training_data.size(), net.input_width());
  for (int r = 0; r < training_data.size(); ++r)
    net.normalizer.normalize(training_data.features.row(r), training_data.times[r], rows.row(r));

  SymbolicModel model;
  model.time_scale = net.normalizer.time_scale;
  constexpr int kSamples = 241;
  for (int i = 0; i <= d; ++i) {
    const EdgeFunction& edge = layer.edge(0, i);
    if (edge.is_zero()) continue;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int r = 0; r < rows.rows(); ++r) {
      lo = std::min(lo, rows(r, i));
      hi = std::max(hi, rows(r, i));
    }
    if (!(hi - lo > 1e-9))
      throw UnfittableError("input column " + std::to_string(i) + " is constant");
    std::vector<double> xs(kSamples);
    for (int s = 0; s < kSamples; ++s) xs[s] = lo + (hi - lo) * s / (kSamples - 1);
    SymbolicTerm term = fit_symbolic_term(edge, xs);
    term.input_index = i;
    term.input_name = i == d ? time_label : training_data.column_names[i];

    // Rewrite a*z + b in raw units: z = (x - mean)/stddev or z = t/t_max.
    if (i == d) {
      term.inner_scale /= net.normalizer.time_scale;
    } else {
      const double sigma = net.normalizer.stddev[i];
      const double mu = net.normalizer.mean[i];
      term.inner_shift -= term.inner_scale * mu / sigma;
      term.inner_scale /= sigma;
    }
    // Absorb outer shifts (and, for linear, the inner shift) into the
    // global constant, matching the additive formula layout.
    if (term.kind == FunctionKind::linear) {
      model.constant += term.outer_scale * term.inner_shift + term.outer_shift;
      term.inner_shift = 0.0;
      term.outer_shift = 0.0;
    } else {
      model.constant += term.outer_shift;
      term.outer_shift = 0.0;
    }
    model.terms.push_back(std::move(term));
  }
  if (model.terms.empty()) throw OverPrunedError("no surviving edges to extract terms from");

  // Whole-model fidelity against the network's raw log-hazard.
  double mean_net = 0.0;
  std::vector<double> net_out(training_data.size());
  for (int r = 0; r < training_data.size(); ++r) {
    net_out[r] = forward_normalized(net, rows.row(r));
    mean_net += net_out[r];
  }
  mean_net /= training_data.size();
  double sst = 0.0, sse = 0.0;
  for (int r = 0; r < training_data.size(); ++r) {
    const double predicted =
        model.evaluate(training_data.features.row(r), training_data.times[r]);
    sse += (net_out[r] - predicted) * (net_out[r] - predicted);
    sst += (net_out[r] - mean_net) * (net_out[r] - mean_net);
  }
  model.fidelity = sst > 0.0 ? 1.0 - sse / sst : (sse < 1e-18 ? 1.0 : 0.0);
  return model;
}

namespace {

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string render_inner(const SymbolicTerm& term) {
  std::ostringstream os;
  os << short_number(term.inner_scale) << " (" << term.input_name << ")";
  if (term.inner_shift > 0)
    os << " + " << short_number(term.inner_shift);
  else if (term.inner_shift < 0)
    os << " - " << short_number(-term.inner_shift);
  return os.str();
}

}  // namespace

std::string render_formula(const SymbolicModel& model) {
  std::ostringstream os;
  os << "log h(t | x) =";
  bool first = true;
  const auto sign_prefix = [&](double v) {
    if (first) {
      os << (v < 0 ? " -" : " ");
      first = false;
    } else {
      os << (v < 0 ? " - " : " + ");
    }
    return std::abs(v);
  };
  for (const SymbolicTerm& term : model.terms) {
    if (term.kind == FunctionKind::linear) {
      const double slope = term.outer_scale * term.inner_scale;
      os << sign_prefix(slope);
      os << short_number(std::abs(slope)) << " (" << term.input_name << ")";
    } else {
      os << sign_prefix(term.outer_scale);
      os << short_number(std::abs(term.outer_scale)) << " ";
      switch (term.kind) {
        case FunctionKind::quadratic: os << "(" << render_inner(term) << ")^2"; break;
        case FunctionKind::sqrt: os << "sqrt(" << render_inner(term) << ")"; break;
        case FunctionKind::exp: os << "exp(" << render_inner(term) << ")"; break;
        case FunctionKind::log: os << "log(" << render_inner(term) << ")"; break;
        case FunctionKind::sin: os << "sin(" << render_inner(term) << ")"; break;
        case FunctionKind::tanh: os << "tanh(" << render_inner(term) << ")"; break;
        case FunctionKind::abs: os << "|" << render_inner(term) << "|"; break;
        case FunctionKind::reciprocal: os << "1/(" << render_inner(term) << ")"; break;
        case FunctionKind::linear: break;
      }
    }
  }
  if (model.constant != 0.0 || model.terms.empty()) {
    os << (model.constant < 0 ? " - " : " + ") << short_number(std::abs(model.constant));
  }
  return os.str();
}

EdgeSampleTable export_edge_samples(const KanNetwork& net, const SurvivalDataset& data,
                                    const EdgeSelector& selector, int n_points) {
  net.validate();
  data.validate();
  if (n_points < 2) throw InvalidInputError("edge sampling needs at least 2 points");
  if (selector.layer < 0 || selector.layer >= static_cast<int>(net.layers.size()))
    throw NotFoundError("no such layer: " + std::to_string(selector.layer));
  const KanLayer& layer = net.layers[selector.layer];
  if (selector.output < 0 || selector.output >= layer.out_width ||
      selector.input < 0 || selector.input >= layer.in_width)
    throw NotFoundError("no such edge: layer " + std::to_string(selector.layer) + ", output " +
                        std::to_string(selector.output) + ", input " +
                        std::to_string(selector.input));
  if (data.feature_count() != net.feature_count())
    throw DimensionError("dataset width does not match the network");
  const EdgeFunction& edge = layer.edge(selector.output, selector.input);

  // Observed range of this edge's input over the data.
  std::vector<double> z(net.input_width());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::vector<double> activation;
  for (int r = 0; r < data.size(); ++r) {
    net.normalizer.normalize(data.features.row(r), data.times[r], z);
    double value;
    if (selector.layer == 0) {
      value = z[selector.input];
    } else {
      // Activation of the hidden node feeding this edge.
      std::vector<double> current(z.begin(), z.end());
      std::vector<double> next;
      for (int l = 0; l < selector.layer; ++l) {
        const KanLayer& lower = net.layers[l];
        next.assign(lower.out_width, 0.0);
        for (int j = 0; j < lower.out_width; ++j)
          for (int i = 0; i < lower.in_width; ++i)
            next[j] += edge_eval(lower.edge(j, i), current[i]);
        current.swap(next);
      }
      value = current[selector.input];
    }
    lo = std::min(lo, value);
    hi = std::max(hi, value);
  }
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }

  EdgeSampleTable table;
  table.x_raw.resize(n_points);
  table.x_norm.resize(n_points);
  table.phi.resize(n_points);
  const int d = net.feature_count();
  for (int s = 0; s < n_points; ++s) {
    const double x = lo + (hi - lo) * s / (n_points - 1);
    table.x_norm[s] = x;
    if (selector.layer > 0)
      table.x_raw[s] = x;  // hidden inputs have no raw units
    else if (selector.input == d)
      table.x_raw[s] = x * net.normalizer.time_scale;
    else
      table.x_raw[s] =
          net.normalizer.mean[selector.input] + net.normalizer.stddev[selector.input] * x;
    table.phi[s] = edge_eval(edge, x);
  }
  return table;
}

}  // namespace survkan
