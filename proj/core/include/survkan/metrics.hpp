#pragma once

#include <span>
#include <vector>

#include "survkan/dataset.hpp"
#include "survkan/hazard.hpp"
#include "survkan/kan.hpp"

namespace survkan {

/// Right-continuous step function; values[k] holds on
/// [jump_times[k], jump_times[k+1]).
struct StepFunction {
  std::vector<double> jump_times;  // strictly increasing
  std::vector<double> values;      // same length
  double initial_value = 1.0;      // value before the first jump

  double eval(double t) const;       // right-continuous value at t
  double eval_left(double t) const;  // left limit at t
};

/// Product-limit estimator; ties at one time reduce the risk set together.
StepFunction kaplan_meier(std::span<const double> times, std::span<const int> events);

struct ConcordanceResult {
  double c_index = 0.0;
  long comparable_pairs = 0;
};

/// Harrell's C by the definitional O(N^2) loop: pairs with t_i < t_j and
/// delta_i = 1 are comparable; tied risk scores count one half.
ConcordanceResult concordance_index(std::span<const double> risk_scores,
                                    std::span<const double> times, std::span<const int> events);

/// IPCW Brier score at eval_time given each subject's survival curve and the
/// censoring survival function G estimated on training data.
double brier_score(const std::vector<SurvivalCurve>& curves, std::span<const double> times,
                   std::span<const int> events, double eval_time, const StepFunction& censor_g);

/// Trapezoidal average of the Brier score over the grid, normalized by the
/// grid span.
double integrated_brier_score(const std::vector<SurvivalCurve>& curves,
                              std::span<const double> times, std::span<const int> events,
                              std::span<const double> grid, const StepFunction& censor_g);

struct EvaluationReport {
  double c_index = 0.0;
  double ibs = 0.0;
  std::vector<double> ibs_grid;
  long comparable_pairs = 0;
};

/// Full evaluation of a fitted model. Risk score = cumulative hazard at the
/// maximum training time; IBS grid = 100 uniform points between the 1st and
/// 99th percentile of the test follow-up times; censoring weights from the
/// training split's Kaplan-Meier with inverted event indicators.
EvaluationReport evaluate(const KanNetwork& net, const SurvivalDataset& test,
                          const SurvivalDataset& train_for_censoring, int integration_k);

}  // namespace survkan
