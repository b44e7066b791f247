#include "survkan/hazard.hpp"

#include <algorithm>
#include <cmath>

#include "survkan/errors.hpp"

namespace survkan {

namespace {

void require_k(int k) {
  if (k < 2) throw InvalidInputError("trapezoid rule needs at least 2 evaluation points");
}

void require_valid_time(double time) {
  if (!std::isfinite(time) || time < 0.0) throw InvalidInputError("time must be finite and >= 0");
}

}  // namespace

double log_hazard(const KanNetwork& net, std::span<const double> features, double time) {
  return clamp_log_hazard(forward(net, features, time));
}

double cumulative_hazard(const KanNetwork& net, std::span<const double> features, double time,
                         int k) {
  require_k(k);
  require_valid_time(time);
  if (time == 0.0) return 0.0;
  const double step = time / (k - 1);
  double sum = 0.0;
  for (int j = 0; j < k; ++j) {
    const double u = (j == k - 1) ? time : j * step;
    const double h = std::exp(log_hazard(net, features, u));
    sum += (j == 0 || j == k - 1) ? 0.5 * h : h;
  }
  return sum * step;
}

double SurvivalCurve::at(double time) const {
  if (times.empty()) throw InvalidInputError("empty survival curve");
  if (time < times.front() || time > times.back())
    throw InvalidInputError("query time lies outside the curve grid");
  const auto it = std::upper_bound(times.begin(), times.end(), time);
  if (it == times.begin()) return survival.front();
  const std::size_t hi = static_cast<std::size_t>(it - times.begin());
  if (hi == times.size()) return survival.back();
  const std::size_t lo = hi - 1;
  const double w = (time - times[lo]) / (times[hi] - times[lo]);
  return survival[lo] + w * (survival[hi] - survival[lo]);
}

SurvivalCurve survival_curve(const KanNetwork& net, std::span<const double> features,
                             std::span<const double> grid_times, int k_per_point) {
  require_k(k_per_point);
  if (grid_times.empty()) throw InvalidInputError("survival grid is empty");
  for (std::size_t j = 0; j < grid_times.size(); ++j) {
    require_valid_time(grid_times[j]);
    if (j > 0 && !(grid_times[j] > grid_times[j - 1]))
      throw InvalidInputError("survival grid must be strictly increasing");
  }

  SurvivalCurve curve;
  curve.times.assign(grid_times.begin(), grid_times.end());
  curve.survival.resize(grid_times.size());

  double cumulative = 0.0;
  double prev_time = 0.0;
  // Hazard at the running segment start; seeded at t = 0.
  double prev_hazard = std::exp(log_hazard(net, features, 0.0));
  for (std::size_t j = 0; j < grid_times.size(); ++j) {
    const double t = grid_times[j];
    if (t > prev_time) {
      const double step = (t - prev_time) / (k_per_point - 1);
      double sum = 0.5 * prev_hazard;
      double h = prev_hazard;
      for (int s = 1; s < k_per_point; ++s) {
        const double u = (s == k_per_point - 1) ? t : prev_time + s * step;
        h = std::exp(log_hazard(net, features, u));
        sum += (s == k_per_point - 1) ? 0.5 * h : h;
      }
      cumulative += sum * step;
      prev_time = t;
      prev_hazard = h;
    }
    curve.survival[j] = std::exp(-cumulative);
  }
  return curve;
}

double negative_log_likelihood(const KanNetwork& net, const SurvivalDataset& data, int k) {
  require_k(k);
  if (data.size() == 0) throw InvalidInputError("dataset is empty");
  double total = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    require_valid_time(data.times[i]);
    const double event_term =
        data.events[i] ? log_hazard(net, data.features.row(i), data.times[i]) : 0.0;
    const double integral = cumulative_hazard(net, data.features.row(i), data.times[i], k);
    total += -(event_term - integral);
  }
  return total / data.size();
}

double record_negative_log_likelihood(const KanNetwork& net, const SurvivalDataset& data, int k,
                                      LossGraph& graph) {
  require_k(k);
  if (data.size() == 0) throw InvalidInputError("dataset is empty");
  const double inv_n = 1.0 / data.size();
  double total = 0.0;
  for (int i = 0; i < data.size(); ++i) {
    const double t = data.times[i];
    require_valid_time(t);
    const auto row = data.features.row(i);
    if (t == 0.0) {
      // Zero-length integral; only an event at t = 0 contributes.
      double event_term = 0.0;
      if (data.events[i]) {
        const int node = graph.record_forward(net, row, 0.0);
        const double raw = graph.node_output(node);
        event_term = clamp_log_hazard(raw);
        if (std::abs(raw) < kLogHazardClamp) graph.add_output_adjoint(node, -inv_n);
      }
      total += -(event_term - 0.0);
      continue;
    }
    const double step = t / (k - 1);
    double sum = 0.0;
    double event_term = 0.0;
    for (int j = 0; j < k; ++j) {
      const double u = (j == k - 1) ? t : j * step;
      const int node = graph.record_forward(net, row, u);
      const double raw = graph.node_output(node);
      const double clamped = clamp_log_hazard(raw);
      const double hazard = std::exp(clamped);
      const double trap_weight = (j == 0 || j == k - 1) ? 0.5 : 1.0;
      sum += trap_weight * hazard;
      // d loss / d clamped = inv_n * (step * w * hazard - delta at the event node).
      double adjoint = inv_n * step * trap_weight * hazard;
      if (j == k - 1 && data.events[i]) {
        event_term = clamped;
        adjoint -= inv_n;
      }
      if (std::abs(raw) < kLogHazardClamp) graph.add_output_adjoint(node, adjoint);
    }
    total += -(event_term - sum * step);
  }
  return total / data.size();
}

}  // namespace survkan
