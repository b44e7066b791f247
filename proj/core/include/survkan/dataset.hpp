#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace survkan {

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(i) * cols_ + j]; }

  std::span<const double> row(int i) const {
    return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
  }
  std::span<double> row(int i) {
    return {data_.data() + static_cast<std::size_t>(i) * cols_, static_cast<std::size_t>(cols_)};
  }

  const std::vector<double>& data() const { return data_; }

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

enum class ColumnKind { numeric, one_hot_level };

/// Right-censored survival data: N rows of (features, observed time, event
/// indicator) plus column metadata.
struct SurvivalDataset {
  Matrix features;                       // N x d
  std::vector<double> times;             // N, all >= 0
  std::vector<int> events;               // N, values in {0, 1}
  std::vector<std::string> column_names; // d
  std::vector<ColumnKind> column_kinds;  // d

  int size() const { return static_cast<int>(times.size()); }
  int feature_count() const { return features.cols(); }

  int event_count() const {
    int n = 0;
    for (int e : events) n += e;
    return n;
  }
  double event_rate() const { return size() == 0 ? 0.0 : static_cast<double>(event_count()) / size(); }

  /// New dataset holding the given rows, in order.
  SurvivalDataset subset(std::span<const int> indices) const;

  /// Throws InvalidInputError / DimensionError when an invariant is broken.
  void validate() const;
};

}  // namespace survkan
