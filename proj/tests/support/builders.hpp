// Small constructors for hand-built networks and datasets used across the
// test suites.
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "survkan/dataio.hpp"
#include "survkan/dataset.hpp"
#include "survkan/kan.hpp"
#include "survkan/rng.hpp"

namespace testing_support {

/// Identity normalizer: mean 0, stddev 1 per feature, given time scale.
inline survkan::Normalizer unit_normalizer(int d, double time_scale = 1.0) {
  survkan::Normalizer norm;
  norm.mean.assign(d, 0.0);
  norm.stddev.assign(d, 1.0);
  norm.time_scale = time_scale;
  return norm;
}

/// Randomly initialized network with unit normalizer and [-3, 3] domains.
inline survkan::KanNetwork random_network(int d, int m, std::uint64_t seed,
                                          survkan::BaseKind base = survkan::BaseKind::silu,
                                          int grid_intervals = 5) {
  std::vector<double> lower(d + 1, -3.0), upper(d + 1, 3.0);
  lower[d] = 0.0;
  upper[d] = 1.0;
  survkan::KanNetwork net =
      survkan::build_network(d, m, grid_intervals, lower, upper, base, seed);
  net.normalizer = unit_normalizer(d);
  return net;
}

/// Sets every parameter of the network to zero.
inline void zero_parameters(survkan::KanNetwork& net) {
  for (auto& layer : net.layers)
    for (auto& edge : layer.edges) {
      edge.base_weight = 0.0;
      edge.spline_weight = 0.0;
      std::fill(edge.coefficients.begin(), edge.coefficients.end(), 0.0);
    }
}

/// Single-layer network whose output is the constant c for every input
/// (one constant spline on the time edge; constants extend polynomially).
inline survkan::KanNetwork constant_network(double c, int d = 1) {
  survkan::KanNetwork net = random_network(d, 0, 0);
  zero_parameters(net);
  survkan::EdgeFunction& edge = net.layers[0].edge(0, d);
  edge.spline_weight = 1.0;
  std::fill(edge.coefficients.begin(), edge.coefficients.end(), c);
  return net;
}

/// Single-layer network of pure identity edges: output = sum of the
/// normalized inputs.
inline survkan::KanNetwork identity_network(int d,
                                            survkan::BaseKind base = survkan::BaseKind::identity) {
  survkan::KanNetwork net = random_network(d, 0, 0, base);
  zero_parameters(net);
  for (int i = 0; i <= d; ++i) net.layers[0].edge(0, i).base_weight = 1.0;
  for (auto& edge : net.layers[0].edges) edge.base_kind = survkan::BaseKind::identity;
  return net;
}

/// Random survival dataset: N(0,1) features, exponential-ish times,
/// Bernoulli events (at least one event guaranteed).
inline survkan::SurvivalDataset random_dataset(int n, int d, std::uint64_t seed,
                                               double event_prob = 0.6) {
  survkan::Rng rng(seed);
  survkan::SurvivalDataset data;
  data.features = survkan::Matrix(n, d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < d; ++c) data.features(r, c) = rng.normal();
  data.times.resize(n);
  data.events.resize(n);
  for (int r = 0; r < n; ++r) {
    data.times[r] = -std::log(1.0 - rng.uniform());
    data.events[r] = rng.uniform() < event_prob ? 1 : 0;
  }
  data.events[0] = 1;
  for (int c = 0; c < d; ++c) {
    data.column_names.push_back("x" + std::to_string(c));
    data.column_kinds.push_back(survkan::ColumnKind::numeric);
  }
  return data;
}

}  // namespace testing_support
