#include "survkan/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

#include "survkan/dataio.hpp"
#include "survkan/errors.hpp"
#include "survkan/hazard.hpp"
#include "survkan/rng.hpp"
#include "survkan/textio.hpp"

namespace survkan {

void TrainConfig::validate() const {
  if (hidden_width < 0 || hidden_width > 3)
    throw InvalidInputError("hidden width must lie in {0, 1, 2, 3}");
  if (grid_intervals < 1) throw InvalidInputError("grid intervals must be >= 1");
  if (lambda < 0.0) throw InvalidInputError("lambda must be >= 0");
  if (reg_weights.l1 < 0.0 || reg_weights.entropy < 0.0 || reg_weights.coeff_norm < 0.0 ||
      reg_weights.smoothness < 0.0)
    throw InvalidInputError("regularizer weights must be >= 0");
  if (learning_rate < 0.0) throw InvalidInputError("learning rate must be >= 0");
  if (weight_decay < 0.0 || weight_decay >= 1.0)
    throw InvalidInputError("weight decay must lie in [0, 1)");
  if (epochs < 0) throw InvalidInputError("epochs must be >= 0");
  if (batch_size < 0) throw InvalidInputError("batch size must be >= 0 (0 = full batch)");
  if (!(early_stop_fraction > 0.0 && early_stop_fraction < 1.0))
    throw InvalidInputError("early-stop fraction must lie in (0, 1)");
  if (patience < 1) throw InvalidInputError("patience must be >= 1");
  if (integration_k < 2) throw InvalidInputError("integration_k must be >= 2");
}

std::uint64_t derive_split_seed(std::uint64_t config_seed) {
  return mix_seed(config_seed, 0x53504C4954ULL);
}

std::uint64_t derive_init_seed(std::uint64_t config_seed) {
  return mix_seed(config_seed, 0x494E4954ULL);
}

double total_loss(const KanNetwork& net, const SurvivalDataset& batch,
                  const TrainConfig& config) {
  config.validate();
  const double nll = negative_log_likelihood(net, batch, config.integration_k);
  if (config.lambda == 0.0) return nll;
  Matrix rows(batch.size(), net.input_width());
  for (int r = 0; r < batch.size(); ++r)
    net.normalizer.normalize(batch.features.row(r), batch.times[r], rows.row(r));
  return nll + config.lambda * regularization(net, rows, config.reg_weights).total();
}

KanNetwork initialize_network(const SurvivalDataset& train_portion, const TrainConfig& config) {
  config.validate();
  train_portion.validate();
  if (train_portion.size() < 2) throw UnfittableError("too few rows to fit statistics");
  const int d = train_portion.feature_count();
  const int n = train_portion.size();

  Normalizer norm;
  norm.mean.assign(d, 0.0);
  norm.stddev.assign(d, 1.0);
  for (int c = 0; c < d; ++c) {
    double sum = 0.0;
    for (int r = 0; r < n; ++r) sum += train_portion.features(r, c);
    norm.mean[c] = sum / n;
    double sq = 0.0;
    for (int r = 0; r < n; ++r) {
      const double dlt = train_portion.features(r, c) - norm.mean[c];
      sq += dlt * dlt;
    }
    const double sd = std::sqrt(sq / (n - 1));
    norm.stddev[c] = sd > 1e-12 ? sd : 1.0;
  }
  norm.time_scale = *std::max_element(train_portion.times.begin(), train_portion.times.end());
  if (!(norm.time_scale > 0.0)) throw UnfittableError("all observed times are zero");

  // Spline domains: observed normalized range per feature column; the time
  // slot always spans [0, 1] so likelihood integrals stay inside the grid.
  std::vector<double> lower(d + 1), upper(d + 1);
  for (int c = 0; c < d; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (int r = 0; r < n; ++r) {
      const double z = (train_portion.features(r, c) - norm.mean[c]) / norm.stddev[c];
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
    if (!(hi - lo > 1e-6)) {
      const double mid = 0.5 * (lo + hi);
      lo = mid - 0.5;
      hi = mid + 0.5;
    }
    lower[c] = lo;
    upper[c] = hi;
  }
  lower[d] = 0.0;
  upper[d] = 1.0;

  KanNetwork net = build_network(d, config.hidden_width, config.grid_intervals, lower, upper,
                                 config.base_kind, derive_init_seed(config.seed));
  net.normalizer = std::move(norm);
  net.validate();
  return net;
}

// ---------------------------------------------------------------------------
// Optimized epoch loop
// ---------------------------------------------------------------------------

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

/// Precomputed evaluation rows. Layer-0 inputs never change during a fit,
/// so their basis values, interval index and base activation are cached
/// once per row and column.
struct Plan {
  int n0 = 0;
  int n_rows = 0;
  std::vector<double> rows;      // n_rows * n0
  std::vector<int> span;         // n_rows * n0
  std::vector<double> basis;     // n_rows * n0 * 3
  std::vector<double> base_val;  // n_rows * n0

  struct Subject {
    int first = 0;   // first node row
    int count = 0;   // trapezoid nodes (0: censored at t=0, 1: event at t=0)
    double step = 0.0;
    int event = 0;
    int reg_row = -1;  // row index of the subject's own [x, t] row
  };
  std::vector<Subject> subjects;

  void reserve(int rows_hint) {
    rows.reserve(static_cast<std::size_t>(rows_hint) * n0);
    span.reserve(static_cast<std::size_t>(rows_hint) * n0);
    basis.reserve(static_cast<std::size_t>(rows_hint) * n0 * 3);
    base_val.reserve(static_cast<std::size_t>(rows_hint) * n0);
  }

  int add_row(const KanNetwork& net, std::span<const double> z) {
    const KanLayer& layer0 = net.layers.front();
    for (int i = 0; i < n0; ++i) {
      const EdgeFunction& edge = layer0.edge(0, i);  // grid shared across outputs
      const LocalBasis lb = local_basis_at(*edge.grid, z[i]);
      rows.push_back(z[i]);
      span.push_back(lb.first);
      basis.push_back(lb.values[0]);
      basis.push_back(lb.values[1]);
      basis.push_back(lb.values[2]);
      base_val.push_back(base_eval(edge.base_kind, z[i]));
    }
    return n_rows++;
  }
};

Plan build_plan(const KanNetwork& net, const SurvivalDataset& data, int k, bool with_reg_rows) {
  Plan plan;
  plan.n0 = net.input_width();
  plan.reserve(data.size() * (k + 1));
  std::vector<double> z(plan.n0);
  for (int i = 0; i < data.size(); ++i) {
    Plan::Subject subject;
    subject.event = data.events[i];
    const double t = data.times[i];
    if (t == 0.0) {
      if (data.events[i]) {
        net.normalizer.normalize(data.features.row(i), 0.0, z);
        subject.first = plan.add_row(net, z);
        subject.count = 1;
      }
    } else {
      subject.step = t / (k - 1);
      subject.count = k;
      for (int j = 0; j < k; ++j) {
        const double u = (j == k - 1) ? t : j * subject.step;
        net.normalizer.normalize(data.features.row(i), u, z);
        const int row = plan.add_row(net, z);
        if (j == 0) subject.first = row;
      }
    }
    if (with_reg_rows) {
      net.normalizer.normalize(data.features.row(i), t, z);
      subject.reg_row = plan.add_row(net, z);
    }
    plan.subjects.push_back(subject);
  }
  return plan;
}

/// Per-epoch scratch space.
struct Workspace {
  std::vector<double> hidden;      // n_rows * m (two-layer nets)
  std::vector<double> output;      // n_rows
  std::vector<double> out_adj;     // n_rows (NLL adjoint on the raw output)
  std::vector<double> hidden_adj;  // n_rows * m
};

/// Forward over all plan rows; layer 0 from the caches, deeper layers live.
void forward_plan(const KanNetwork& net, const Plan& plan, Workspace& ws) {
  const KanLayer& layer0 = net.layers.front();
  const bool deep = net.layers.size() == 2;
  const int m = deep ? layer0.out_width : 0;
  ws.output.assign(plan.n_rows, 0.0);
  if (deep) ws.hidden.assign(static_cast<std::size_t>(plan.n_rows) * m, 0.0);
  for (int r = 0; r < plan.n_rows; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * plan.n0;
    for (int j = 0; j < layer0.out_width; ++j) {
      double acc = 0.0;
      for (int i = 0; i < plan.n0; ++i) {
        const EdgeFunction& edge = layer0.edge(j, i);
        const int s = plan.span[base + i];
        const double* b = &plan.basis[(base + i) * 3];
        const double spline = edge.coefficients[s] * b[0] + edge.coefficients[s + 1] * b[1] +
                              edge.coefficients[s + 2] * b[2];
        acc += edge.base_weight * plan.base_val[base + i] + edge.spline_weight * spline;
      }
      if (deep)
        ws.hidden[static_cast<std::size_t>(r) * m + j] = acc;
      else
        ws.output[r] = acc;
    }
    if (deep) {
      const KanLayer& layer1 = net.layers[1];
      double acc = 0.0;
      for (int j = 0; j < m; ++j) {
        const double h = ws.hidden[static_cast<std::size_t>(r) * m + j];
        if (!std::isfinite(h)) throw DivergenceError("non-finite hidden activation");
        acc += edge_eval(layer1.edge(0, j), h);
      }
      ws.output[r] = acc;
    }
  }
}

/// NLL over the plan's subjects (optionally restricted to a subset) from
/// already computed outputs; fills the per-row output adjoints when asked.
double plan_nll(const Plan& plan, const Workspace& ws, std::span<const int> subject_ids,
                std::vector<double>* out_adj) {
  double total = 0.0;
  const double inv_n = 1.0 / subject_ids.size();
  for (int sid : subject_ids) {
    const Plan::Subject& subject = plan.subjects[sid];
    if (subject.count == 0) continue;  // censored at t = 0
    if (subject.count == 1) {
      const double raw = ws.output[subject.first];
      total += -(clamp_log_hazard(raw) - 0.0);
      if (out_adj && std::abs(raw) < kLogHazardClamp) (*out_adj)[subject.first] += -inv_n;
      continue;
    }
    double sum = 0.0;
    double event_term = 0.0;
    for (int j = 0; j < subject.count; ++j) {
      const int r = subject.first + j;
      const double raw = ws.output[r];
      const double clamped = clamp_log_hazard(raw);
      const double hazard = std::exp(clamped);
      const double w = (j == 0 || j == subject.count - 1) ? 0.5 : 1.0;
      sum += w * hazard;
      double adjoint = inv_n * subject.step * w * hazard;
      if (j == subject.count - 1 && subject.event) {
        event_term = clamped;
        adjoint -= inv_n;
      }
      if (out_adj && std::abs(raw) < kLogHazardClamp) (*out_adj)[r] += adjoint;
    }
    total += -(event_term - sum * subject.step);
  }
  return total / subject_ids.size();
}

/// Edge output phi for a cached row, layer 0.
inline double cached_edge_value(const Plan& plan, const EdgeFunction& edge, std::size_t base,
                                int i) {
  const int s = plan.span[base + i];
  const double* b = &plan.basis[(base + i) * 3];
  const double spline = edge.coefficients[s] * b[0] + edge.coefficients[s + 1] * b[1] +
                        edge.coefficients[s + 2] * b[2];
  return edge.base_weight * plan.base_val[base + i] + edge.spline_weight * spline;
}

struct RegState {
  RegBreakdown breakdown;                // weighted values
  std::vector<double> dloss_dl1;         // lambda * d(l1+entropy terms)/dL1_e, flat edges
};

/// Regularization value over the subjects' [x, t] rows plus the adjoint
/// seeds needed for the backward pass. Mirrors regularization().
RegState plan_regularization(const KanNetwork& net, const Plan& plan, const Workspace& ws,
                             std::span<const int> subject_ids, const RegWeights& weights,
                             double lambda) {
  std::vector<int> offsets(net.layers.size() + 1, 0);
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    offsets[l + 1] = offsets[l] + net.layers[l].in_width * net.layers[l].out_width;
  std::vector<double> l1(offsets.back(), 0.0);
  const KanLayer& layer0 = net.layers.front();
  const bool deep = net.layers.size() == 2;
  const int m = deep ? layer0.out_width : 0;

  for (int sid : subject_ids) {
    const int r = plan.subjects[sid].reg_row;
    const std::size_t base = static_cast<std::size_t>(r) * plan.n0;
    for (int j = 0; j < layer0.out_width; ++j)
      for (int i = 0; i < plan.n0; ++i)
        l1[j * plan.n0 + i] += std::abs(cached_edge_value(plan, layer0.edge(j, i), base, i));
    if (deep) {
      const KanLayer& layer1 = net.layers[1];
      for (int j = 0; j < m; ++j)
        l1[offsets[1] + j] +=
            std::abs(edge_eval(layer1.edge(0, j), ws.hidden[static_cast<std::size_t>(r) * m + j]));
    }
  }
  const double inv_batch = 1.0 / subject_ids.size();
  for (double& v : l1) v *= inv_batch;

  RegState state;
  for (double v : l1) state.breakdown.l1 += v;
  state.dloss_dl1.assign(offsets.back(), 0.0);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    double total = 0.0;
    for (int e = offsets[l]; e < offsets[l + 1]; ++e) total += l1[e];
    double h = 0.0;
    if (total > 0.0) {
      for (int e = offsets[l]; e < offsets[l + 1]; ++e) {
        const double p = l1[e] / total;
        if (p > 0.0) h -= p * std::log(p);
      }
    }
    state.breakdown.entropy += h;
    for (int e = offsets[l]; e < offsets[l + 1]; ++e) {
      double g = weights.l1;
      if (total > 0.0 && l1[e] > 0.0)
        g -= weights.entropy * (std::log(l1[e] / total) + h) / total;
      state.dloss_dl1[e] = lambda * g;
    }
  }
  for (const KanLayer& layer : net.layers) {
    for (const EdgeFunction& edge : layer.edges) {
      double norm_sq = 0.0;
      for (double c : edge.coefficients) norm_sq += c * c;
      state.breakdown.coeff_norm += std::sqrt(norm_sq);
      double diff_sq = 0.0;
      for (std::size_t t = 1; t < edge.coefficients.size(); ++t) {
        const double d = edge.coefficients[t] - edge.coefficients[t - 1];
        diff_sq += d * d;
      }
      state.breakdown.smoothness += std::sqrt(diff_sq);
    }
  }
  state.breakdown.l1 *= weights.l1;
  state.breakdown.entropy *= weights.entropy;
  state.breakdown.coeff_norm *= weights.coeff_norm;
  state.breakdown.smoothness *= weights.smoothness;
  return state;
}

/// Accumulates gradients for one cached layer-0 edge evaluation.
inline void cached_edge_backward(const Plan& plan, const EdgeFunction& edge, std::size_t base,
                                 int i, double g, EdgeGradient& grad) {
  const int s = plan.span[base + i];
  const double* b = &plan.basis[(base + i) * 3];
  grad.base_weight += g * plan.base_val[base + i];
  grad.spline_weight += g * (edge.coefficients[s] * b[0] + edge.coefficients[s + 1] * b[1] +
                             edge.coefficients[s + 2] * b[2]);
  grad.coefficients[s] += g * edge.spline_weight * b[0];
  grad.coefficients[s + 1] += g * edge.spline_weight * b[1];
  grad.coefficients[s + 2] += g * edge.spline_weight * b[2];
}

/// Full backward pass: NLL output adjoints plus the regularizer's per-edge
/// injected adjoints and direct coefficient-norm terms.
void backward_plan(const KanNetwork& net, const Plan& plan, Workspace& ws,
                   std::span<const int> subject_ids, const RegState& reg,
                   const RegWeights& weights, double lambda, double inv_batch,
                   GradientTape& tape) {
  const KanLayer& layer0 = net.layers.front();
  const bool deep = net.layers.size() == 2;
  const int m = deep ? layer0.out_width : 0;
  const int l1_offset = layer0.in_width * layer0.out_width;

  if (deep) {
    ws.hidden_adj.assign(static_cast<std::size_t>(plan.n_rows) * m, 0.0);
    const KanLayer& layer1 = net.layers[1];
    // Layer 1: NLL adjoints on every node row ...
    for (int sid : subject_ids) {
      const Plan::Subject& subject = plan.subjects[sid];
      for (int j = 0; j < subject.count; ++j) {
        const int r = subject.first + j;
        const double g = ws.out_adj[r];
        if (g == 0.0) continue;
        for (int e = 0; e < m; ++e) {
          const EdgeFunction& edge = layer1.edge(0, e);
          const double x = ws.hidden[static_cast<std::size_t>(r) * m + e];
          const LocalBasis lb = local_basis_at(*edge.grid, x);
          EdgeGradient& grad = tape.layers[1][e];
          double spline = 0.0;
          for (int t = 0; t < 3; ++t) spline += edge.coefficients[lb.first + t] * lb.values[t];
          grad.base_weight += g * base_eval(edge.base_kind, x);
          grad.spline_weight += g * spline;
          for (int t = 0; t < 3; ++t)
            grad.coefficients[lb.first + t] += g * edge.spline_weight * lb.values[t];
          ws.hidden_adj[static_cast<std::size_t>(r) * m + e] += g * edge_derivative(edge, x);
        }
      }
      // ... plus the regularizer's injected adjoints on the reg row.
      const int r = subject.reg_row;
      for (int e = 0; e < m; ++e) {
        const EdgeFunction& edge = layer1.edge(0, e);
        const double x = ws.hidden[static_cast<std::size_t>(r) * m + e];
        const double phi = edge_eval(edge, x);
        const double sign = phi > 0.0 ? 1.0 : (phi < 0.0 ? -1.0 : 0.0);
        const double g = reg.dloss_dl1[l1_offset + e] * sign * inv_batch;
        if (g == 0.0) continue;
        const LocalBasis lb = local_basis_at(*edge.grid, x);
        EdgeGradient& grad = tape.layers[1][e];
        double spline = 0.0;
        for (int t = 0; t < 3; ++t) spline += edge.coefficients[lb.first + t] * lb.values[t];
        grad.base_weight += g * base_eval(edge.base_kind, x);
        grad.spline_weight += g * spline;
        for (int t = 0; t < 3; ++t)
          grad.coefficients[lb.first + t] += g * edge.spline_weight * lb.values[t];
        ws.hidden_adj[static_cast<std::size_t>(r) * m + e] += g * edge_derivative(edge, x);
      }
    }
  }

  // Layer 0.
  for (int sid : subject_ids) {
    const Plan::Subject& subject = plan.subjects[sid];
    // Node rows: adjoint from above (output adjoint or hidden adjoints).
    for (int j = 0; j < subject.count; ++j) {
      const int r = subject.first + j;
      const std::size_t base = static_cast<std::size_t>(r) * plan.n0;
      for (int out = 0; out < layer0.out_width; ++out) {
        const double g = deep ? ws.hidden_adj[static_cast<std::size_t>(r) * m + out] : ws.out_adj[r];
        if (g == 0.0) continue;
        for (int i = 0; i < plan.n0; ++i)
          cached_edge_backward(plan, layer0.edge(out, i), base, i, g,
                               tape.layers[0][static_cast<std::size_t>(out) * plan.n0 + i]);
      }
    }
    // Reg row: flowed-down hidden adjoints plus this layer's injected ones.
    const int r = subject.reg_row;
    const std::size_t base = static_cast<std::size_t>(r) * plan.n0;
    for (int out = 0; out < layer0.out_width; ++out) {
      const double flow = deep ? ws.hidden_adj[static_cast<std::size_t>(r) * m + out] : 0.0;
      for (int i = 0; i < plan.n0; ++i) {
        const EdgeFunction& edge = layer0.edge(out, i);
        const double phi = cached_edge_value(plan, edge, base, i);
        const double sign = phi > 0.0 ? 1.0 : (phi < 0.0 ? -1.0 : 0.0);
        const double g = flow + reg.dloss_dl1[out * plan.n0 + i] * sign * inv_batch;
        if (g == 0.0) continue;
        cached_edge_backward(plan, edge, base, i, g,
                             tape.layers[0][static_cast<std::size_t>(out) * plan.n0 + i]);
      }
    }
  }

  // Coefficient-norm terms, straight on the parameters.
  const double w3 = lambda * weights.coeff_norm;
  const double w4 = lambda * weights.smoothness;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const KanLayer& layer = net.layers[l];
    for (std::size_t e = 0; e < layer.edges.size(); ++e) {
      const std::vector<double>& c = layer.edges[e].coefficients;
      EdgeGradient& grad = tape.layers[l][e];
      double norm_sq = 0.0;
      for (double v : c) norm_sq += v * v;
      if (norm_sq > 0.0) {
        const double inv_norm = 1.0 / std::sqrt(norm_sq);
        for (std::size_t t = 0; t < c.size(); ++t) grad.coefficients[t] += w3 * c[t] * inv_norm;
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

/// Flat views over every trainable parameter, in a fixed order.
struct ParamView {
  std::vector<double*> params;
  std::vector<double*> grads;

  ParamView(KanNetwork& net, GradientTape& tape) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      for (std::size_t e = 0; e < net.layers[l].edges.size(); ++e) {
        EdgeFunction& edge = net.layers[l].edges[e];
        EdgeGradient& grad = tape.layers[l][e];
        for (std::size_t t = 0; t < edge.coefficients.size(); ++t) {
          params.push_back(&edge.coefficients[t]);
          grads.push_back(&grad.coefficients[t]);
        }
        params.push_back(&edge.base_weight);
        grads.push_back(&grad.base_weight);
        params.push_back(&edge.spline_weight);
        grads.push_back(&grad.spline_weight);
      }
    }
  }

  std::vector<double> snapshot() const {
    std::vector<double> out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) out[i] = *params[i];
    return out;
  }
  void restore(const std::vector<double>& values) {
    for (std::size_t i = 0; i < params.size(); ++i) *params[i] = values[i];
  }
};

struct AdamW {
  std::vector<double> m, v;
  long step_count = 0;

  explicit AdamW(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(ParamView& view, double lr, double wd) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(kAdamBeta1, step_count);
    const double bc2 = 1.0 - std::pow(kAdamBeta2, step_count);
    for (std::size_t i = 0; i < view.params.size(); ++i) {
      double& theta = *view.params[i];
      const double g = *view.grads[i];
      theta *= 1.0 - wd;  // decoupled decay; independent of the learning rate
      m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g;
      v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g * g;
      theta -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kAdamEpsilon);
    }
  }
};

void zero_tape(GradientTape& tape) {
  for (auto& layer : tape.layers)
    for (EdgeGradient& grad : layer) {
      std::fill(grad.coefficients.begin(), grad.coefficients.end(), 0.0);
      grad.base_weight = 0.0;
      grad.spline_weight = 0.0;
    }
}

}  // namespace

std::pair<KanNetwork, TrainReport> fit(const SurvivalDataset& data, const TrainConfig& config) {
  const auto t_start = std::chrono::steady_clock::now();
  config.validate();
  data.validate();
  if (data.size() < 10) throw UnfittableError("fit needs at least 10 rows");
  if (data.event_count() < 1) throw UnfittableError("fit needs at least one event");

  const std::uint64_t split_seed = config.split_seed.value_or(derive_split_seed(config.seed));
  auto [train_part, val_part] = stratified_split(data, config.early_stop_fraction, split_seed);

  KanNetwork net = initialize_network(train_part, config);
  TrainReport report;
  if (config.epochs == 0) {
    report.final_regularization = RegBreakdown{};
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(net), std::move(report)};
  }

  const Plan train_plan = build_plan(net, train_part, config.integration_k, true);
  const Plan val_plan = build_plan(net, val_part, config.integration_k, false);
  std::vector<int> all_train(train_plan.subjects.size());
  for (std::size_t i = 0; i < all_train.size(); ++i) all_train[i] = static_cast<int>(i);
  std::vector<int> all_val(val_plan.subjects.size());
  for (std::size_t i = 0; i < all_val.size(); ++i) all_val[i] = static_cast<int>(i);

  Workspace train_ws, val_ws;
  GradientTape tape = GradientTape::zeros_like(net);
  ParamView view(net, tape);
  AdamW optimizer(view.params.size());

  std::vector<double> best_params = view.snapshot();
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;

  const bool full_batch =
      config.batch_size == 0 || config.batch_size >= static_cast<int>(all_train.size());
  Rng batch_rng(mix_seed(derive_init_seed(config.seed), 0xBA7C4));

  const auto run_epoch = [&](int epoch) -> bool {  // false = early stop
    double epoch_loss = 0.0;
    if (full_batch) {
      forward_plan(net, train_plan, train_ws);
      train_ws.out_adj.assign(train_plan.n_rows, 0.0);
      const double nll = plan_nll(train_plan, train_ws, all_train, &train_ws.out_adj);
      const RegState reg = plan_regularization(net, train_plan, train_ws, all_train,
                                               config.reg_weights, config.lambda);
      epoch_loss = nll + config.lambda * reg.breakdown.total();
      if (!std::isfinite(epoch_loss)) throw DivergenceError("non-finite training loss");
      zero_tape(tape);
      backward_plan(net, train_plan, train_ws, all_train, reg, config.reg_weights, config.lambda,
                    1.0 / all_train.size(), tape);
      optimizer.step(view, config.learning_rate, config.weight_decay);
    } else {
      std::vector<int> order = all_train;
      for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[batch_rng.below(i)]);
      double weighted = 0.0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        std::vector<int> batch(order.begin() + start, order.begin() + end);
        std::sort(batch.begin(), batch.end());
        forward_plan(net, train_plan, train_ws);
        train_ws.out_adj.assign(train_plan.n_rows, 0.0);
        const double nll = plan_nll(train_plan, train_ws, batch, &train_ws.out_adj);
        const RegState reg = plan_regularization(net, train_plan, train_ws, batch,
                                                 config.reg_weights, config.lambda);
        const double loss = nll + config.lambda * reg.breakdown.total();
        if (!std::isfinite(loss)) throw DivergenceError("non-finite training loss");
        weighted += loss * batch.size();
        zero_tape(tape);
        backward_plan(net, train_plan, train_ws, batch, reg, config.reg_weights, config.lambda,
                      1.0 / batch.size(), tape);
        optimizer.step(view, config.learning_rate, config.weight_decay);
      }
      epoch_loss = weighted / order.size();
    }
    report.train_loss.push_back(epoch_loss);

    forward_plan(net, val_plan, val_ws);
    const double val_nll = plan_nll(val_plan, val_ws, all_val, nullptr);
    if (!std::isfinite(val_nll)) throw DivergenceError("non-finite validation loss");
    report.val_nll.push_back(val_nll);
    report.stopping_epoch = epoch + 1;

    if (val_nll < best_val) {
      best_val = val_nll;
      best_params = view.snapshot();
      report.best_epoch = epoch;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= config.patience) {
      return false;
    }
    return true;
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    try {
      if (!run_epoch(epoch)) break;
    } catch (const DivergenceError& e) {
      throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch));
    }
  }

  view.restore(best_params);

  Matrix reg_rows(train_part.size(), net.input_width());
  for (int r = 0; r < train_part.size(); ++r)
    net.normalizer.normalize(train_part.features.row(r), train_part.times[r], reg_rows.row(r));
  report.final_regularization = regularization(net, reg_rows, config.reg_weights);
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(net), std::move(report)};
}

void write_train_report(const TrainReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << "epoch,train_loss,val_nll\n";
  for (std::size_t e = 0; e < report.train_loss.size(); ++e)
    out << e << ',' << format_g17(report.train_loss[e]) << ',' << format_g17(report.val_nll[e])
        << '\n';
}

// ---------------------------------------------------------------------------
// Random search
// ---------------------------------------------------------------------------

int default_thread_count() {
  if (const char* env = std::getenv("SURVKAN_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

double sample_range(const ParameterRange& range, Rng& rng) {
  if (range.lo == range.hi) return range.lo;
  if (range.log10) return std::pow(10.0, rng.uniform(std::log10(range.lo), std::log10(range.hi)));
  return rng.uniform(range.lo, range.hi);
}

void validate_space(const SearchSpace& space) {
  if (space.hidden_widths.empty() || space.grid_intervals.empty())
    throw InvalidInputError("search space has an empty choice list");
  std::vector<const ParameterRange*> ranges{&space.lambda, &space.weight_decay};
  if (space.learning_rate_choices.empty())
    ranges.push_back(&space.learning_rate);
  else
    for (double lr : space.learning_rate_choices)
      if (!(lr > 0.0)) throw InvalidInputError("learning-rate choices must be positive");
  for (const ParameterRange* r : ranges) {
    if (!(r->lo <= r->hi)) throw InvalidInputError("search range has lo > hi");
    if (r->log10 && !(r->lo > 0.0))
      throw InvalidInputError("log-scaled search range needs positive bounds");
  }
  space.base.validate();
}

}  // namespace

TrainConfig random_search(const SurvivalDataset& data, const SearchSpace& space, int trials,
                          int folds, std::uint64_t seed) {
  if (trials < 1) throw InvalidInputError("random search needs at least one trial");
  validate_space(space);
  data.validate();
  const std::vector<std::vector<int>> fold_idx =
      stratified_folds(data, folds, mix_seed(seed, 0xF01D5));

  // Sample all configs up front (a single deterministic stream).
  std::vector<TrainConfig> configs(trials, space.base);
  for (int t = 0; t < trials; ++t) {
    Rng rng(mix_seed(seed, 0xC0F19 + t));
    TrainConfig& cfg = configs[t];
    cfg.hidden_width = space.hidden_widths[rng.below(space.hidden_widths.size())];
    cfg.grid_intervals = space.grid_intervals[rng.below(space.grid_intervals.size())];
    cfg.lambda = sample_range(space.lambda, rng);
    cfg.learning_rate = space.learning_rate_choices.empty()
                            ? sample_range(space.learning_rate, rng)
                            : space.learning_rate_choices[rng.below(space.learning_rate_choices.size())];
    cfg.weight_decay = sample_range(space.weight_decay, rng);
    cfg.seed = mix_seed(seed, 0x5EED + t);
  }

  // Score every (trial, fold) pair; tasks write disjoint slots, so any
  // scheduling order yields the same result.
  const int n_tasks = trials * folds;
  std::vector<double> fold_nll(n_tasks, std::numeric_limits<double>::infinity());
  std::atomic<int> next_task{0};
  std::atomic<bool> failed{false};
  std::string failure_message;
  std::mutex failure_mutex;

  const auto worker = [&]() {
    for (;;) {
      const int task = next_task.fetch_add(1);
      if (task >= n_tasks || failed.load()) return;
      const int trial = task / folds;
      const int fold = task % folds;
      std::vector<int> train_idx;
      for (int f = 0; f < folds; ++f)
        if (f != fold) train_idx.insert(train_idx.end(), fold_idx[f].begin(), fold_idx[f].end());
      std::sort(train_idx.begin(), train_idx.end());
      TrainConfig cfg = configs[trial];
      cfg.seed = mix_seed(cfg.seed, fold);
      try {
        const auto [model, train_report] = fit(data.subset(train_idx), cfg);
        (void)train_report;
        const SurvivalDataset held_out = data.subset(fold_idx[fold]);
        fold_nll[task] = negative_log_likelihood(model, held_out, cfg.integration_k);
      } catch (const DivergenceError&) {
        fold_nll[task] = std::numeric_limits<double>::infinity();
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure_message.empty()) failure_message = e.what();
        return;
      }
    }
  };

  const int n_threads = std::min(default_thread_count(), n_tasks);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (failed.load()) throw UnfittableError("random search trial failed: " + failure_message);

  int best_trial = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    double mean = 0.0;
    for (int f = 0; f < folds; ++f) mean += fold_nll[t * folds + f];
    mean /= folds;
    if (mean < best_score) {
      best_score = mean;
      best_trial = t;
    }
  }
  if (best_trial < 0) throw UnfittableError("every random-search trial diverged");
  return configs[best_trial];
}

}  // namespace survkan
