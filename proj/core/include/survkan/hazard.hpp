#pragma once

#include <span>
#include <vector>

#include "survkan/dataset.hpp"
#include "survkan/kan.hpp"

namespace survkan {

/// Log-hazard outputs are clamped into [-kLogHazardClamp, +kLogHazardClamp]
/// before exponentiation; the clamp applies both to the event term of the
/// likelihood and to the hazard inside every integral.
inline constexpr double kLogHazardClamp = 20.0;

inline double clamp_log_hazard(double raw) {
  if (raw > kLogHazardClamp) return kLogHazardClamp;
  if (raw < -kLogHazardClamp) return -kLogHazardClamp;
  return raw;
}

/// Clamped log-hazard of one subject at one time.
double log_hazard(const KanNetwork& net, std::span<const double> features, double time);

/// Trapezoidal approximation of the cumulative hazard over [0, time] using
/// k uniformly spaced evaluation points (both endpoints included).
/// time == 0 yields exactly 0. Requires k >= 2.
double cumulative_hazard(const KanNetwork& net, std::span<const double> features, double time,
                         int k);

/// Time grid with the matching survival probabilities for one subject.
struct SurvivalCurve {
  std::vector<double> times;     // strictly increasing
  std::vector<double> survival;  // same length, non-increasing, in [0, 1]

  /// Linear interpolation inside the grid; errors outside it.
  double at(double time) const;
};

/// Survival probabilities over a strictly increasing time grid. The
/// cumulative hazard is accumulated segment by segment (k_per_point
/// trapezoid nodes per segment, endpoint evaluations shared), so the curve
/// is non-increasing by construction.
SurvivalCurve survival_curve(const KanNetwork& net, std::span<const double> features,
                             std::span<const double> grid_times, int k_per_point);

/// Mean censored-data negative log-likelihood
///   -(1/N) sum_i [ delta_i * log h(t_i|x_i) - H(t_i|x_i) ]
/// with the clamped log-hazard used in both terms and k trapezoid points
/// per subject for H.
double negative_log_likelihood(const KanNetwork& net, const SurvivalDataset& data, int k);

/// Same value as negative_log_likelihood, but records every network
/// evaluation and its adjoint on the graph so that backward() yields the
/// exact NLL gradient.
double record_negative_log_likelihood(const KanNetwork& net, const SurvivalDataset& data, int k,
                                      LossGraph& graph);

}  // namespace survkan
