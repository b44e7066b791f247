#include "survkan/serialize.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "survkan/errors.hpp"

namespace survkan {

namespace {

constexpr const char* kFormatLine = "survkan-model v1";

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

const char* base_kind_name(BaseKind kind) {
  return kind == BaseKind::identity ? "identity" : "silu";
}

BaseKind base_kind_from(const std::string& name) {
  if (name == "identity") return BaseKind::identity;
  if (name == "silu") return BaseKind::silu;
  throw ParseError("unknown base kind '" + name + "'");
}

const char* column_kind_name(ColumnKind kind) {
  return kind == ColumnKind::numeric ? "numeric" : "one_hot_level";
}

ColumnKind column_kind_from(const std::string& name) {
  if (name == "numeric") return ColumnKind::numeric;
  if (name == "one_hot_level") return ColumnKind::one_hot_level;
  throw ParseError("unknown column kind '" + name + "'");
}

}  // namespace

void save_model(const KanNetwork& net, const ModelMetadata& metadata, const std::string& path) {
  net.validate();
  nlohmann::json j;
  j["widths"] = net.widths();
  j["layers"] = nlohmann::json::array();
  for (const KanLayer& layer : net.layers) {
    nlohmann::json jl;
    jl["in_width"] = layer.in_width;
    jl["out_width"] = layer.out_width;
    jl["grids"] = nlohmann::json::array();
    for (int i = 0; i < layer.in_width; ++i) {
      const SplineGrid& grid = *layer.edge(0, i).grid;
      jl["grids"].push_back(
          {{"lower", grid.lower()}, {"upper", grid.upper()}, {"intervals", grid.intervals()}});
    }
    jl["edges"] = nlohmann::json::array();
    for (int out = 0; out < layer.out_width; ++out) {
      for (int in = 0; in < layer.in_width; ++in) {
        const EdgeFunction& edge = layer.edge(out, in);
        jl["edges"].push_back({{"base_kind", base_kind_name(edge.base_kind)},
                               {"base_weight", edge.base_weight},
                               {"spline_weight", edge.spline_weight},
                               {"coefficients", edge.coefficients}});
      }
    }
    j["layers"].push_back(std::move(jl));
  }
  j["normalizer"] = {{"mean", net.normalizer.mean},
                     {"stddev", net.normalizer.stddev},
                     {"time_scale", net.normalizer.time_scale}};
  nlohmann::json jc;
  jc["names"] = metadata.feature_names;
  jc["kinds"] = nlohmann::json::array();
  for (ColumnKind kind : metadata.feature_kinds) jc["kinds"].push_back(column_kind_name(kind));
  jc["time"] = metadata.time_column;
  jc["event"] = metadata.event_column;
  j["columns"] = std::move(jc);

  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << kFormatLine << '\n';
  out << "# written " << iso_timestamp() << '\n';
  out << j.dump(2) << '\n';
}

std::pair<KanNetwork, ModelMetadata> load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kFormatLine)
    throw ParseError(path + ": not a survkan model file");
  std::ostringstream body;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') continue;  // metadata lines
    body << line << '\n';
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }

  try {
    KanNetwork net;
    for (const nlohmann::json& jl : j.at("layers")) {
      KanLayer layer;
      layer.in_width = jl.at("in_width").get<int>();
      layer.out_width = jl.at("out_width").get<int>();
      std::vector<std::shared_ptr<const SplineGrid>> grids;
      for (const nlohmann::json& jg : jl.at("grids"))
        grids.push_back(std::make_shared<SplineGrid>(jg.at("lower").get<double>(),
                                                     jg.at("upper").get<double>(),
                                                     jg.at("intervals").get<int>()));
      if (static_cast<int>(grids.size()) != layer.in_width)
        throw ParseError(path + ": grid count does not match the layer width");
      const nlohmann::json& edges = jl.at("edges");
      if (static_cast<int>(edges.size()) != layer.in_width * layer.out_width)
        throw ParseError(path + ": edge count does not match the layer widths");
      layer.edges.resize(edges.size());
      for (int out = 0; out < layer.out_width; ++out) {
        for (int in = 0; in < layer.in_width; ++in) {
          const nlohmann::json& je = edges[static_cast<std::size_t>(out) * layer.in_width + in];
          EdgeFunction& edge = layer.edge(out, in);
          edge.grid = grids[in];
          edge.base_kind = base_kind_from(je.at("base_kind").get<std::string>());
          edge.base_weight = je.at("base_weight").get<double>();
          edge.spline_weight = je.at("spline_weight").get<double>();
          edge.coefficients = je.at("coefficients").get<std::vector<double>>();
        }
      }
      net.layers.push_back(std::move(layer));
    }
    const nlohmann::json& jn = j.at("normalizer");
    net.normalizer.mean = jn.at("mean").get<std::vector<double>>();
    net.normalizer.stddev = jn.at("stddev").get<std::vector<double>>();
    net.normalizer.time_scale = jn.at("time_scale").get<double>();
    net.validate();

    ModelMetadata metadata;
    if (j.contains("columns")) {
      const nlohmann::json& jc = j.at("columns");
      metadata.feature_names = jc.at("names").get<std::vector<std::string>>();
      for (const nlohmann::json& k : jc.at("kinds"))
        metadata.feature_kinds.push_back(column_kind_from(k.get<std::string>()));
      metadata.time_column = jc.value("time", "time");
      metadata.event_column = jc.value("event", "event");
    }
    return {std::move(net), std::move(metadata)};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace survkan
