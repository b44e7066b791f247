#include "survkan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "survkan/errors.hpp"

namespace survkan {

double StepFunction::eval(double t) const {
  // Last jump time <= t.
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return initial_value;
  return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

double StepFunction::eval_left(double t) const {
  // Last jump time strictly < t.
  const auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return initial_value;
  return values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

StepFunction kaplan_meier(std::span<const double> times, std::span<const int> events) {
  if (times.empty()) throw InvalidInputError("Kaplan-Meier needs at least one observation");
  if (times.size() != events.size())
    throw DimensionError("times and events must have the same length");
  // deaths and total withdrawals per distinct time
  std::map<double, std::pair<int, int>> counts;
  for (std::size_t i = 0; i < times.size(); ++i) {
    auto& c = counts[times[i]];
    c.first += events[i];
    c.second += 1;
  }
  StepFunction g;
  g.initial_value = 1.0;
  double surv = 1.0;
  long at_risk = static_cast<long>(times.size());
  for (const auto& [t, c] : counts) {
    const auto [deaths, total] = c;
    if (deaths > 0) {
      surv *= 1.0 - static_cast<double>(deaths) / at_risk;
      g.jump_times.push_back(t);
      g.values.push_back(surv);
    }
    at_risk -= total;
  }
  return g;
}

ConcordanceResult concordance_index(std::span<const double> risk_scores,
                                    std::span<const double> times,
                                    std::span<const int> events) {
  const std::size_t n = times.size();
  if (risk_scores.size() != n || events.size() != n)
    throw DimensionError("risk, time and event arrays must have the same length");
  if (n < 2) throw UndefinedMetricError("concordance needs at least two subjects");
  long pairs = 0;
  double concordant = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!events[i]) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (!(times[i] < times[j])) continue;
      ++pairs;
      if (risk_scores[i] > risk_scores[j])
        concordant += 1.0;
      else if (risk_scores[i] == risk_scores[j])
        concordant += 0.5;
    }
  }
  if (pairs == 0) throw UndefinedMetricError("no comparable pairs");
  return {concordant / pairs, pairs};
}

double brier_score(const std::vector<SurvivalCurve>& curves, std::span<const double> times,
                   std::span<const int> events, double eval_time,
                   const StepFunction& censor_g) {
  const std::size_t n = times.size();
  if (curves.size() != n || events.size() != n)
    throw DimensionError("curves, times and events must have the same length");
  if (n == 0) throw InvalidInputError("Brier score needs at least one subject");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = curves[i].at(eval_time);
    if (times[i] <= eval_time) {
      if (!events[i]) continue;  // censored before tau contributes nothing
      const double g = censor_g.eval_left(times[i]);
      if (g <= 0.0) throw DegenerateWeightsError("censoring survival is zero at an event time");
      total += s * s / g;
    } else {
      const double g = censor_g.eval(eval_time);
      if (g <= 0.0)
        throw DegenerateWeightsError("censoring survival is zero at the evaluation time");
      total += (1.0 - s) * (1.0 - s) / g;
    }
  }
  return total / static_cast<double>(n);
}

double integrated_brier_score(const std::vector<SurvivalCurve>& curves,
                              std::span<const double> times, std::span<const int> events,
                              std::span<const double> grid, const StepFunction& censor_g) {
  if (grid.size() < 2) throw InvalidInputError("IBS grid needs at least two points");
  for (std::size_t j = 1; j < grid.size(); ++j)
    if (!(grid[j] > grid[j - 1])) throw InvalidInputError("IBS grid must be strictly increasing");
  double integral = 0.0;
  double prev = brier_score(curves, times, events, grid[0], censor_g);
  for (std::size_t j = 1; j < grid.size(); ++j) {
    const double next = brier_score(curves, times, events, grid[j], censor_g);
    integral += 0.5 * (prev + next) * (grid[j] - grid[j - 1]);
    prev = next;
  }
  return integral / (grid.back() - grid.front());
}

namespace {

/// Linear-interpolation percentile (numpy convention) of a sorted copy.
double percentile(std::vector<double> sorted_values, double q) {
  std::sort(sorted_values.begin(), sorted_values.end());
  const double pos = q * (sorted_values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted_values.size()) return sorted_values.back();
  const double frac = pos - lo;
  return sorted_values[lo] * (1.0 - frac) + sorted_values[lo + 1] * frac;
}

}  // namespace

EvaluationReport evaluate(const KanNetwork& net, const SurvivalDataset& test,
                          const SurvivalDataset& train_for_censoring, int integration_k) {
  test.validate();
  train_for_censoring.validate();
  if (test.size() == 0 || train_for_censoring.size() == 0)
    throw InvalidInputError("evaluation needs non-empty datasets");

  const double t_max = net.normalizer.time_scale;
  std::vector<double> risk(test.size());
  for (int i = 0; i < test.size(); ++i)
    risk[i] = cumulative_hazard(net, test.features.row(i), t_max, integration_k);

  EvaluationReport report;
  const ConcordanceResult c = concordance_index(risk, test.times, test.events);
  report.c_index = c.c_index;
  report.comparable_pairs = c.comparable_pairs;

  const double lo = percentile(test.times, 0.01);
  const double hi = percentile(test.times, 0.99);
  if (!(hi > lo)) throw InvalidInputError("test follow-up times are too concentrated for IBS");
  report.ibs_grid.resize(100);
  for (int j = 0; j < 100; ++j) report.ibs_grid[j] = lo + (hi - lo) * j / 99.0;

  // Curve grids must cover the IBS grid; anchor them at 0 for exactness of
  // the cumulative hazard accumulation.
  std::vector<double> curve_grid;
  curve_grid.reserve(101);
  if (report.ibs_grid.front() > 0.0) curve_grid.push_back(0.0);
  curve_grid.insert(curve_grid.end(), report.ibs_grid.begin(), report.ibs_grid.end());
  std::vector<SurvivalCurve> curves;
  curves.reserve(test.size());
  for (int i = 0; i < test.size(); ++i)
    curves.push_back(survival_curve(net, test.features.row(i), curve_grid, integration_k));

  // Censoring distribution: Kaplan-Meier with inverted indicators.
  std::vector<int> inverted(train_for_censoring.events.size());
  for (std::size_t i = 0; i < inverted.size(); ++i)
    inverted[i] = 1 - train_for_censoring.events[i];
  const StepFunction censor_g = kaplan_meier(train_for_censoring.times, inverted);

  report.ibs = integrated_brier_score(curves, test.times, test.events, report.ibs_grid, censor_g);
  return report;
}

}  // namespace survkan
