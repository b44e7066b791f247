#include "survkan/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "survkan/errors.hpp"
#include "survkan/rng.hpp"
#include "survkan/textio.hpp"

namespace survkan {

// ---------------------------------------------------------------------------
// SurvivalDataset
// ---------------------------------------------------------------------------

SurvivalDataset SurvivalDataset::subset(std::span<const int> indices) const {
  SurvivalDataset out;
  out.features = Matrix(static_cast<int>(indices.size()), features.cols());
  out.times.reserve(indices.size());
  out.events.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const int src = indices[r];
    for (int c = 0; c < features.cols(); ++c) out.features(static_cast<int>(r), c) = features(src, c);
    out.times.push_back(times[src]);
    out.events.push_back(events[src]);
  }
  out.column_names = column_names;
  out.column_kinds = column_kinds;
  return out;
}

void SurvivalDataset::validate() const {
  const int n = size();
  if (features.rows() != n || static_cast<int>(events.size()) != n)
    throw DimensionError("dataset fields disagree on the row count");
  if (static_cast<int>(column_names.size()) != features.cols() ||
      static_cast<int>(column_kinds.size()) != features.cols())
    throw DimensionError("column metadata does not match the feature count");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0)
      throw InvalidInputError("observed times must be finite and >= 0");
    if (events[i] != 0 && events[i] != 1)
      throw InvalidInputError("event indicators must be 0 or 1");
  }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (ch != '\r') {
      cell.push_back(ch);
    }
  }
  cells.push_back(cell);
  for (std::string& c : cells) {
    const auto first = c.find_first_not_of(" \t");
    const auto last = c.find_last_not_of(" \t");
    c = (first == std::string::npos) ? std::string() : c.substr(first, last - first + 1);
  }
  return cells;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA" || cell == "?"; }

bool parse_real(const std::string& cell, double* out) {
  if (cell.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) return false;
  *out = v;
  return true;
}

}  // namespace

SurvivalDataset load_csv(const std::string& path, const std::string& time_column,
                         const std::string& event_column, CsvLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const std::vector<std::string> header = split_csv_line(line);

  int time_idx = -1, event_idx = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == time_column) time_idx = static_cast<int>(c);
    if (header[c] == event_column) event_idx = static_cast<int>(c);
  }
  if (time_idx < 0) throw ParseError(path + ": missing time column '" + time_column + "'");
  if (event_idx < 0) throw ParseError(path + ": missing event column '" + event_column + "'");

  std::vector<std::vector<std::string>> rows;
  std::vector<int> row_lines;
  std::vector<int> rejected;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError(path + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " +
                       std::to_string(header.size()));
    if (std::any_of(cells.begin(), cells.end(), is_missing)) {
      rejected.push_back(line_no);
      continue;
    }
    rows.push_back(std::move(cells));
    row_lines.push_back(line_no);
  }
  if (report) report->rejected_lines = rejected;
  if (rows.empty()) throw ParseError(path + ": no usable data rows");

  const int n = static_cast<int>(rows.size());
  std::vector<double> times(n), raw(n);
  std::vector<int> events(n);
  for (int r = 0; r < n; ++r) {
    double t;
    if (!parse_real(rows[r][time_idx], &t) || !std::isfinite(t))
      throw ParseError(path + ": line " + std::to_string(row_lines[r]) +
                       ": unparseable time value '" + rows[r][time_idx] + "'");
    if (t < 0.0)
      throw ParseError(path + ": line " + std::to_string(row_lines[r]) + ": negative time");
    times[r] = t;
    double e;
    if (!parse_real(rows[r][event_idx], &e) || (e != 0.0 && e != 1.0))
      throw ParseError(path + ": line " + std::to_string(row_lines[r]) +
                       ": event value '" + rows[r][event_idx] + "' is not 0 or 1");
    events[r] = static_cast<int>(e);
  }

  // Classify feature columns: numeric when every cell parses as a real.
  struct FeatureColumn {
    int source;
    bool numeric;
    std::vector<std::string> levels;  // one-hot levels (reference dropped)
  };
  std::vector<FeatureColumn> plan;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<int>(c) == time_idx || static_cast<int>(c) == event_idx) continue;
    FeatureColumn col{static_cast<int>(c), true, {}};
    double v;
    for (int r = 0; r < n && col.numeric; ++r)
      if (!parse_real(rows[r][c], &v)) col.numeric = false;
    if (!col.numeric) {
      std::set<std::string> levels;
      for (int r = 0; r < n; ++r) levels.insert(rows[r][c]);
      col.levels.assign(std::next(levels.begin()), levels.end());  // drop reference level
    }
    plan.push_back(std::move(col));
  }

  SurvivalDataset data;
  for (const FeatureColumn& col : plan) {
    if (col.numeric) {
      data.column_names.push_back(header[col.source]);
      data.column_kinds.push_back(ColumnKind::numeric);
    } else {
      for (const std::string& level : col.levels) {
        data.column_names.push_back(header[col.source] + "=" + level);
        data.column_kinds.push_back(ColumnKind::one_hot_level);
      }
    }
  }
  data.features = Matrix(n, static_cast<int>(data.column_names.size()));
  data.times = std::move(times);
  data.events = std::move(events);
  for (int r = 0; r < n; ++r) {
    int out_c = 0;
    for (const FeatureColumn& col : plan) {
      if (col.numeric) {
        double v;
        parse_real(rows[r][col.source], &v);
        if (!std::isfinite(v))
          throw ParseError(path + ": line " + std::to_string(row_lines[r]) +
                           ": non-finite value in column '" + header[col.source] + "'");
        data.features(r, out_c++) = v;
      } else {
        for (const std::string& level : col.levels)
          data.features(r, out_c++) = (rows[r][col.source] == level) ? 1.0 : 0.0;
      }
    }
  }
  data.validate();
  return data;
}

void write_csv(const SurvivalDataset& data, const std::string& path,
               const std::string& time_column, const std::string& event_column) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  for (const std::string& name : data.column_names) out << name << ',';
  out << time_column << ',' << event_column << '\n';
  for (int r = 0; r < data.size(); ++r) {
    for (int c = 0; c < data.feature_count(); ++c) out << format_g17(data.features(r, c)) << ',';
    out << format_g17(data.times[r]) << ',' << data.events[r] << '\n';
  }
}

// ---------------------------------------------------------------------------
// Stratified splitting
// ---------------------------------------------------------------------------

namespace {

std::vector<int> shuffled_stratum(const SurvivalDataset& data, int event_value, Rng& rng) {
  std::vector<int> idx;
  for (int i = 0; i < data.size(); ++i)
    if (data.events[i] == event_value) idx.push_back(i);
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

}  // namespace

std::pair<SurvivalDataset, SurvivalDataset> stratified_split(const SurvivalDataset& data,
                                                             double test_fraction,
                                                             std::uint64_t seed) {
  data.validate();
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InvalidInputError("test fraction must lie in (0, 1)");
  Rng rng(seed);
  std::vector<int> test_idx, train_idx;
  for (int event_value : {1, 0}) {
    std::vector<int> stratum = shuffled_stratum(data, event_value, rng);
    const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * stratum.size()));
    for (std::size_t i = 0; i < stratum.size(); ++i)
      (i < n_test ? test_idx : train_idx).push_back(stratum[i]);
  }
  if (test_idx.empty() || train_idx.empty())
    throw StratificationError("stratified split left one side empty");
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

std::vector<std::vector<int>> stratified_folds(const SurvivalDataset& data, int folds,
                                               std::uint64_t seed) {
  data.validate();
  if (folds < 2) throw InvalidInputError("cross-validation needs at least 2 folds");
  if (folds > data.size()) throw InvalidInputError("more folds than rows");
  Rng rng(seed);
  std::vector<std::vector<int>> out(folds);
  for (int event_value : {1, 0}) {
    std::vector<int> stratum = shuffled_stratum(data, event_value, rng);
    for (std::size_t i = 0; i < stratum.size(); ++i)
      out[i % folds].push_back(stratum[i]);
  }
  for (std::vector<int>& fold : out) {
    if (fold.empty()) throw StratificationError("a cross-validation fold is empty");
    std::sort(fold.begin(), fold.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

void SyntheticSpec::validate() const {
  if (n < 1) throw InvalidInputError("synthetic spec needs n >= 1");
  if (!(censoring_target >= 0.0 && censoring_target < 1.0))
    throw InvalidInputError("censoring target must lie in [0, 1)");
  if (time_scale <= 0.0) throw InvalidInputError("time scale must be positive");
  if (!(weibull_shape > 0.0)) throw InvalidInputError("weibull shape must be positive");
  if (weibull_shape != 1.0 && time_coef != 0.0)
    throw InvalidInputError("weibull shape and time coefficient cannot be combined");
  const int d = static_cast<int>(features.size());
  if (!linear.empty() && static_cast<int>(linear.size()) != d)
    throw DimensionError("linear coefficient count does not match the feature count");
  for (const FeatureDistribution& f : features) {
    if (f.kind == FeatureDistribution::Kind::uniform && !(f.p1 < f.p2))
      throw InvalidInputError("uniform feature needs lower < upper");
    if (f.kind == FeatureDistribution::Kind::normal && !(f.p2 > 0.0))
      throw InvalidInputError("normal feature needs a positive stddev");
  }
  for (const auto* terms : {&sqrt_terms, &sin_terms})
    for (const ShapedTerm& term : *terms)
      if (term.feature < 0 || term.feature >= d)
        throw InvalidInputError("shaped term references a feature out of range");
}

namespace {

double covariate_part(const SyntheticSpec& spec, std::span<const double> x) {
  double v = spec.intercept;
  for (std::size_t j = 0; j < spec.linear.size(); ++j) v += spec.linear[j] * x[j];
  for (const ShapedTerm& term : spec.sqrt_terms) {
    const double arg = term.scale * x[term.feature] + term.shift;
    if (arg < 0.0)
      throw InvalidInputError("sqrt term argument is negative for a sampled feature value");
    v += term.coef * std::sqrt(arg);
  }
  for (const ShapedTerm& term : spec.sin_terms)
    v += term.coef * std::sin(term.scale * x[term.feature] + term.shift);
  return v;
}

}  // namespace

double SyntheticTruth::log_hazard(std::span<const double> x, double t) const {
  double v = covariate_part(spec_, x) + spec_.time_coef * t / spec_.time_scale;
  if (spec_.weibull_shape != 1.0)
    v += std::log(spec_.weibull_shape) + (spec_.weibull_shape - 1.0) * std::log(t);
  return v;
}

double SyntheticTruth::cumulative_hazard(std::span<const double> x, double t) const {
  const double a = std::exp(covariate_part(spec_, x));
  if (spec_.weibull_shape != 1.0) return a * std::pow(t, spec_.weibull_shape);
  if (spec_.time_coef == 0.0) return a * t;
  const double rate = spec_.time_coef / spec_.time_scale;
  return a / rate * (std::exp(rate * t) - 1.0);
}

double SyntheticTruth::survival(std::span<const double> x, double t) const {
  return std::exp(-cumulative_hazard(x, t));
}

std::pair<SurvivalDataset, SyntheticTruth> generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const int d = static_cast<int>(spec.features.size());
  SyntheticTruth truth(spec);
  Rng rng(spec.seed);

  SurvivalDataset data;
  data.features = Matrix(spec.n, d);
  data.times.resize(spec.n);
  data.events.assign(spec.n, 1);
  for (const FeatureDistribution& f : spec.features) {
    data.column_names.push_back(f.name);
    data.column_kinds.push_back(ColumnKind::numeric);
  }

  // Event times by inverse-transform sampling: solve H(t|x) = -log(1 - U)
  // by bracketed bisection.
  std::vector<double> event_times(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < d; ++j) {
      const FeatureDistribution& f = spec.features[j];
      data.features(i, j) = (f.kind == FeatureDistribution::Kind::normal)
                                ? rng.normal(f.p1, f.p2)
                                : rng.uniform(f.p1, f.p2);
    }
    const auto x = data.features.row(i);
    const double target = -std::log(1.0 - rng.uniform());
    double hi = 1.0;
    int guard = 0;
    while (truth.cumulative_hazard(x, hi) < target) {
      hi *= 2.0;
      if (++guard > 200)
        throw CalibrationError("cumulative hazard does not reach the sampled quantile");
    }
    double lo = 0.0;
    while (hi - lo > 1e-10 * std::max(1.0, hi))
      (truth.cumulative_hazard(x, 0.5 * (lo + hi)) < target ? lo : hi) = 0.5 * (lo + hi);
    event_times[i] = 0.5 * (lo + hi);
  }

  if (spec.censoring_target == 0.0) {
    data.times = event_times;
    return {std::move(data), std::move(truth)};
  }

  // Calibrate the exponential censoring rate so the expected censored
  // fraction over the drawn event times hits the target.
  const auto expected_censored = [&](double rate) {
    double sum = 0.0;
    for (double t : event_times) sum += 1.0 - std::exp(-rate * t);
    return sum / spec.n;
  };
  double rate_hi = 1.0;
  int guard = 0;
  while (expected_censored(rate_hi) < spec.censoring_target) {
    rate_hi *= 2.0;
    if (++guard > 200) throw CalibrationError("cannot reach the requested censoring fraction");
  }
  double rate_lo = 0.0;
  while (rate_hi - rate_lo > 1e-12 * std::max(1.0, rate_hi)) {
    const double mid = 0.5 * (rate_lo + rate_hi);
    (expected_censored(mid) < spec.censoring_target ? rate_lo : rate_hi) = mid;
  }
  const double rate = 0.5 * (rate_lo + rate_hi);

  for (int i = 0; i < spec.n; ++i) {
    const double censor_time = -std::log(1.0 - rng.uniform()) / rate;
    if (censor_time < event_times[i]) {
      data.times[i] = censor_time;
      data.events[i] = 0;
    } else {
      data.times[i] = event_times[i];
    }
  }
  return {std::move(data), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Synthetic spec JSON form
// ---------------------------------------------------------------------------

namespace {

ShapedTerm shaped_term_from_json(const nlohmann::json& j) {
  ShapedTerm term;
  term.feature = j.at("feature").get<int>();
  term.coef = j.at("coef").get<double>();
  term.scale = j.value("scale", 1.0);
  term.shift = j.value("shift", 0.0);
  return term;
}

nlohmann::json shaped_term_to_json(const ShapedTerm& term) {
  return {{"feature", term.feature}, {"coef", term.coef}, {"scale", term.scale}, {"shift", term.shift}};
}

}  // namespace

SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    SyntheticSpec spec;
    spec.n = j.at("n").get<int>();
    spec.seed = j.value("seed", 0ULL);
    spec.censoring_target = j.value("censoring_target", 0.0);
    spec.intercept = j.value("intercept", 0.0);
    spec.time_coef = j.value("time_coef", 0.0);
    spec.time_scale = j.value("time_scale", 1.0);
    spec.weibull_shape = j.value("weibull_shape", 1.0);
    for (const nlohmann::json& f : j.at("features")) {
      FeatureDistribution dist;
      dist.name = f.at("name").get<std::string>();
      const std::string kind = f.value("dist", "normal");
      if (kind == "normal")
        dist.kind = FeatureDistribution::Kind::normal;
      else if (kind == "uniform")
        dist.kind = FeatureDistribution::Kind::uniform;
      else
        throw ParseError(path + ": unknown feature distribution '" + kind + "'");
      dist.p1 = f.value("p1", 0.0);
      dist.p2 = f.value("p2", 1.0);
      spec.features.push_back(std::move(dist));
    }
    if (j.contains("linear")) spec.linear = j.at("linear").get<std::vector<double>>();
    if (j.contains("sqrt_terms"))
      for (const nlohmann::json& t : j.at("sqrt_terms")) spec.sqrt_terms.push_back(shaped_term_from_json(t));
    if (j.contains("sin_terms"))
      for (const nlohmann::json& t : j.at("sin_terms")) spec.sin_terms.push_back(shaped_term_from_json(t));
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_synthetic_spec(const SyntheticSpec& spec, const std::string& path) {
  nlohmann::json j;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["censoring_target"] = spec.censoring_target;
  j["intercept"] = spec.intercept;
  j["time_coef"] = spec.time_coef;
  j["time_scale"] = spec.time_scale;
  j["weibull_shape"] = spec.weibull_shape;
  j["features"] = nlohmann::json::array();
  for (const FeatureDistribution& f : spec.features)
    j["features"].push_back(
        {{"name", f.name},
         {"dist", f.kind == FeatureDistribution::Kind::normal ? "normal" : "uniform"},
         {"p1", f.p1},
         {"p2", f.p2}});
  j["linear"] = spec.linear;
  j["sqrt_terms"] = nlohmann::json::array();
  for (const ShapedTerm& t : spec.sqrt_terms) j["sqrt_terms"].push_back(shaped_term_to_json(t));
  j["sin_terms"] = nlohmann::json::array();
  for (const ShapedTerm& t : spec.sin_terms) j["sin_terms"].push_back(shaped_term_to_json(t));
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << j.dump(2) << '\n';
}

}  // namespace survkan
