#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "survkan/dataset.hpp"

namespace survkan {

/// Rows dropped while loading (1-based file line numbers, header = line 1).
struct CsvLoadReport {
  std::vector<int> rejected_lines;
};

/// Loads a comma-delimited, UTF-8, header-first file. Columns whose
/// non-missing cells all parse as reals become numeric features; every
/// other column is one-hot encoded with the lexicographically first level
/// dropped as the reference. Rows with missing cells (empty, "NA", "?")
/// are rejected and reported.
SurvivalDataset load_csv(const std::string& path, const std::string& time_column,
                         const std::string& event_column, CsvLoadReport* report = nullptr);

/// Writes the dataset in the same delimited format load_csv consumes.
/// Numeric cells use 17 significant digits, so a round trip is value-exact.
void write_csv(const SurvivalDataset& data, const std::string& path,
               const std::string& time_column = "time", const std::string& event_column = "event");

/// Splits events and censored subjects independently at test_fraction with
/// seeded shuffling, preserving the event rate up to one subject.
std::pair<SurvivalDataset, SurvivalDataset> stratified_split(const SurvivalDataset& data,
                                                             double test_fraction,
                                                             std::uint64_t seed);

/// Index sets of `folds` stratified cross-validation folds.
std::vector<std::vector<int>> stratified_folds(const SurvivalDataset& data, int folds,
                                               std::uint64_t seed);

struct FeatureDistribution {
  enum class Kind { normal, uniform };
  std::string name;
  Kind kind = Kind::normal;
  double p1 = 0.0;  // mean / lower
  double p2 = 1.0;  // stddev / upper
};

/// One coef * f(scale * x_j + shift) contribution to the true log-hazard.
struct ShapedTerm {
  int feature = 0;
  double coef = 0.0;
  double scale = 1.0;
  double shift = 0.0;
};

/// Ground-truth model for synthetic data:
///   h(t|x) = exp(intercept + sum_j linear[j] * x_j + sqrt terms + sin terms)
///            * weibull_shape * t^(weibull_shape - 1) * exp(time_coef * t / time_scale).
/// weibull_shape != 1 and time_coef != 0 are mutually exclusive so the
/// cumulative hazard stays in closed form.
struct SyntheticSpec {
  int n = 0;
  std::uint64_t seed = 0;
  double censoring_target = 0.0;  // in [0, 1)
  std::vector<FeatureDistribution> features;
  double intercept = 0.0;
  std::vector<double> linear;  // one per feature (may be empty = all zero)
  std::vector<ShapedTerm> sqrt_terms;
  std::vector<ShapedTerm> sin_terms;
  double time_coef = 0.0;
  double time_scale = 1.0;
  double weibull_shape = 1.0;

  void validate() const;
};

/// Exact survival quantities of the generating process, for oracle tests.
class SyntheticTruth {
 public:
  explicit SyntheticTruth(SyntheticSpec spec) : spec_(std::move(spec)) {}

  double log_hazard(std::span<const double> x, double t) const;
  double cumulative_hazard(std::span<const double> x, double t) const;  // closed form
  double survival(std::span<const double> x, double t) const;

 private:
  SyntheticSpec spec_;
};

/// Draws features, samples event times by inverse-transform sampling
/// (bisection on the exact cumulative hazard to 1e-10), and applies
/// independent exponential censoring calibrated to the target fraction.
std::pair<SurvivalDataset, SyntheticTruth> generate_synthetic(const SyntheticSpec& spec);

/// Reads a SyntheticSpec from its JSON document form.
SyntheticSpec load_synthetic_spec(const std::string& path);
/// Writes the JSON document form.
void save_synthetic_spec(const SyntheticSpec& spec, const std::string& path);

}  // namespace survkan
