#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "survkan/dataset.hpp"
#include "survkan/kan.hpp"

namespace survkan {

struct TrainConfig {
  int hidden_width = 1;         // m in {0,..,3}; 0 = single layer [d+1, 1]
  int grid_intervals = 5;       // G
  double lambda = 1e-3;         // total regularization strength
  RegWeights reg_weights;       // per-term weights inside the sum
  double learning_rate = 1e-2;
  double weight_decay = 0.0;    // decoupled: theta *= (1 - wd) before the step
  int epochs = 500;
  int batch_size = 0;           // 0 = full batch
  double early_stop_fraction = 0.15;
  int patience = 20;
  int integration_k = 50;       // trapezoid points per likelihood integral
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> split_seed;  // set to hold the split fixed across seeds
  BaseKind base_kind = BaseKind::silu;

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // loss at the parameters entering each epoch
  std::vector<double> val_nll;     // validation NLL after each epoch's update
  int stopping_epoch = 0;          // epochs actually run
  int best_epoch = -1;             // epoch whose parameters were restored
  RegBreakdown final_regularization;
  double wall_seconds = 0.0;
};

/// Sub-seeds are derived independently so that the early-stopping split and
/// the parameter initialization can be varied separately.
std::uint64_t derive_split_seed(std::uint64_t config_seed);
std::uint64_t derive_init_seed(std::uint64_t config_seed);

/// NLL + lambda * regularization total; the regularizer sees the normalized
/// [x, t] rows of the batch.
double total_loss(const KanNetwork& net, const SurvivalDataset& batch, const TrainConfig& config);

/// Fits the normalizer on the training portion, initializes the network
/// (per-column spline domains from the normalized training rows), runs
/// AdamW on the full objective with early stopping on a stratified
/// internal split, and restores the best-validation-NLL parameters.
/// Deterministic given the config seed.
std::pair<KanNetwork, TrainReport> fit(const SurvivalDataset& data, const TrainConfig& config);

/// The network fit() starts from: normalizer fitted on `train_portion`,
/// seeded initialization, no training steps.
KanNetwork initialize_network(const SurvivalDataset& train_portion, const TrainConfig& config);

/// Writes the per-epoch table as "epoch,train_loss,val_nll" CSV.
void write_train_report(const TrainReport& report, const std::string& path);

struct ParameterRange {
  double lo = 0.0;
  double hi = 0.0;
  bool log10 = false;  // sample uniformly in log10 space
};

/// Search space for the bounded random search. Discrete dimensions are
/// sampled uniformly from their choice lists, continuous ones from their
/// ranges; everything else comes from `base`.
struct SearchSpace {
  std::vector<int> hidden_widths{0, 1, 2};
  std::vector<int> grid_intervals{5};
  ParameterRange lambda{1e-5, 1e-2, true};
  ParameterRange learning_rate{3e-3, 3e-2, true};
  std::vector<double> learning_rate_choices;  // non-empty: overrides the range
  ParameterRange weight_decay{0.0, 1e-3, false};
  TrainConfig base;
};

/// Samples `trials` configs, scores each by mean validation NLL over
/// stratified cross-validation folds (diverging fits score +inf), and
/// returns the best. Deterministic given the seed; trials and folds may be
/// evaluated concurrently without changing the result.
TrainConfig random_search(const SurvivalDataset& data, const SearchSpace& space, int trials,
                          int folds, std::uint64_t seed);

/// Worker count used for concurrent search trials: the SURVKAN_THREADS
/// environment variable if set, otherwise the hardware concurrency.
int default_thread_count();

}  // namespace survkan
