#pragma once

#include <string>
#include <utility>
#include <vector>

#include "survkan/dataset.hpp"
#include "survkan/kan.hpp"

namespace survkan {

/// Column metadata carried alongside a saved model so that later commands
/// can check dataset compatibility and label interpretability output.
struct ModelMetadata {
  std::vector<std::string> feature_names;
  std::vector<ColumnKind> feature_kinds;
  std::string time_column = "time";
  std::string event_column = "event";
};

/// Writes the model as a single text document: a format line, one
/// timestamp metadata line, then a JSON body holding widths, base kinds,
/// grids, every coefficient and weight, and the normalization statistics.
/// All numerics survive a round trip exactly.
void save_model(const KanNetwork& net, const ModelMetadata& metadata, const std::string& path);

std::pair<KanNetwork, ModelMetadata> load_model(const std::string& path);

}  // namespace survkan
