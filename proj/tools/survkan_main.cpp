// survkan command-line interface: train, eval, predict, interpret,
// plot-export, synth, search.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "survkan/dataio.hpp"
#include "survkan/errors.hpp"
#include "survkan/hazard.hpp"
#include "survkan/interpret.hpp"
#include "survkan/metrics.hpp"
#include "survkan/serialize.hpp"
#include "survkan/textio.hpp"
#include "survkan/training.hpp"

namespace fs = std::filesystem;
using namespace survkan;

namespace {

struct DataFlags {
  std::string path;
  std::string time_col = "time";
  std::string event_col = "event";
};

void add_data_flags(CLI::App* cmd, DataFlags& flags, const char* name = "--data") {
  cmd->add_option(name, flags.path, "input dataset (CSV)")->required();
  cmd->add_option("--time-col", flags.time_col, "time column name");
  cmd->add_option("--event-col", flags.event_col, "event indicator column name");
}

SurvivalDataset load_data(const DataFlags& flags) {
  CsvLoadReport report;
  SurvivalDataset data = load_csv(flags.path, flags.time_col, flags.event_col, &report);
  if (!report.rejected_lines.empty()) {
    std::cerr << "note: rejected " << report.rejected_lines.size()
              << " row(s) with missing values (lines";
    for (int line : report.rejected_lines) std::cerr << ' ' << line;
    std::cerr << ")\n";
  }
  return data;
}

void apply_config_json(const nlohmann::json& j, TrainConfig& cfg) {
  if (j.contains("hidden_width")) cfg.hidden_width = j["hidden_width"].get<int>();
  if (j.contains("grid_intervals")) cfg.grid_intervals = j["grid_intervals"].get<int>();
  if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
  if (j.contains("reg_weights")) {
    const auto& w = j["reg_weights"];
    if (w.contains("l1")) cfg.reg_weights.l1 = w["l1"].get<double>();
    if (w.contains("entropy")) cfg.reg_weights.entropy = w["entropy"].get<double>();
    if (w.contains("coeff_norm")) cfg.reg_weights.coeff_norm = w["coeff_norm"].get<double>();
    if (w.contains("smoothness")) cfg.reg_weights.smoothness = w["smoothness"].get<double>();
  }
  if (j.contains("learning_rate")) cfg.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("weight_decay")) cfg.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<int>();
  if (j.contains("batch_size")) cfg.batch_size = j["batch_size"].get<int>();
  if (j.contains("early_stop_fraction"))
    cfg.early_stop_fraction = j["early_stop_fraction"].get<double>();
  if (j.contains("patience")) cfg.patience = j["patience"].get<int>();
  if (j.contains("integration_k")) cfg.integration_k = j["integration_k"].get<int>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("base_kind"))
    cfg.base_kind = j["base_kind"].get<std::string>() == "identity" ? BaseKind::identity
                                                                    : BaseKind::silu;
}

void apply_config_file(const std::string& path, TrainConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  apply_config_json(j, cfg);
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["hidden_width"] = cfg.hidden_width;
  j["grid_intervals"] = cfg.grid_intervals;
  j["lambda"] = cfg.lambda;
  j["reg_weights"] = {{"l1", cfg.reg_weights.l1},
                      {"entropy", cfg.reg_weights.entropy},
                      {"coeff_norm", cfg.reg_weights.coeff_norm},
                      {"smoothness", cfg.reg_weights.smoothness}};
  j["learning_rate"] = cfg.learning_rate;
  j["weight_decay"] = cfg.weight_decay;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["early_stop_fraction"] = cfg.early_stop_fraction;
  j["patience"] = cfg.patience;
  j["integration_k"] = cfg.integration_k;
  j["seed"] = cfg.seed;
  j["base_kind"] = cfg.base_kind == BaseKind::identity ? "identity" : "silu";
  return j;
}

void check_columns(const ModelMetadata& metadata, const SurvivalDataset& data) {
  if (metadata.feature_names.empty()) return;
  if (metadata.feature_names != data.column_names)
    throw InvalidInputError(
        "dataset columns do not match the columns the model was trained on");
}

std::string sanitize_filename(std::string name) {
  for (char& c : name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return name;
}

void write_edge_table(const EdgeSampleTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open file for writing: " + path);
  out << "x_raw,x_norm,phi\n";
  for (std::size_t s = 0; s < table.phi.size(); ++s)
    out << format_g17(table.x_raw[s]) << ',' << format_g17(table.x_norm[s]) << ','
        << format_g17(table.phi[s]) << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int run_train(const DataFlags& data_flags, const TrainConfig& cfg, const std::string& out_model,
              const std::string& out_report) {
  const SurvivalDataset data = load_data(data_flags);
  auto [net, report] = fit(data, cfg);

  ModelMetadata metadata;
  metadata.feature_names = data.column_names;
  metadata.feature_kinds = data.column_kinds;
  metadata.time_column = data_flags.time_col;
  metadata.event_column = data_flags.event_col;
  save_model(net, metadata, out_model);
  write_train_report(report, out_report.empty() ? out_model + ".report.csv" : out_report);

  std::cout << "trained " << report.stopping_epoch << " epoch(s) in "
            << format_g17(report.wall_seconds) << " s";
  if (report.best_epoch >= 0)
    std::cout << "; best validation NLL " << format_g17(report.val_nll[report.best_epoch])
              << " at epoch " << report.best_epoch;
  std::cout << "\nmodel written to " << out_model << '\n';
  return 0;
}

int run_eval(const DataFlags& test_flags, const DataFlags& train_flags, const std::string& model,
             const std::string& out_report, int integration_k) {
  const auto [net, metadata] = load_model(model);
  DataFlags test = test_flags, train = train_flags;
  test.time_col = train.time_col = metadata.time_column;
  test.event_col = train.event_col = metadata.event_column;
  const SurvivalDataset test_data = load_data(test);
  const SurvivalDataset train_data = load_data(train);
  check_columns(metadata, test_data);
  check_columns(metadata, train_data);

  const EvaluationReport report = evaluate(net, test_data, train_data, integration_k);
  std::ofstream out(out_report);
  if (!out) throw ParseError("cannot open file for writing: " + out_report);
  // Display convention: metric values scaled by 100.
  out << "c_index " << format_g17(100.0 * report.c_index) << '\n';
  out << "ibs " << format_g17(100.0 * report.ibs) << '\n';
  out << "comparable_pairs " << report.comparable_pairs << '\n';
  out << "n_test " << test_data.size() << '\n';
  out << "ibs_grid_lo " << format_g17(report.ibs_grid.front()) << '\n';
  out << "ibs_grid_hi " << format_g17(report.ibs_grid.back()) << '\n';
  out << "ibs_grid_points " << report.ibs_grid.size() << '\n';
  std::cout << "c_index " << format_g17(100.0 * report.c_index) << "  ibs "
            << format_g17(100.0 * report.ibs) << "  (x100 scale)\n";
  return 0;
}

int run_predict(const DataFlags& data_flags, const std::string& model, double grid_start,
                double grid_end, int grid_points, int k_per_point, const std::string& out_path) {
  const auto [net, metadata] = load_model(model);
  DataFlags flags = data_flags;
  flags.time_col = metadata.time_column;
  flags.event_col = metadata.event_column;
  const SurvivalDataset data = load_data(flags);
  check_columns(metadata, data);

  if (!(grid_end > grid_start) || grid_points < 2)
    throw InvalidInputError("prediction grid must be increasing with at least 2 points");
  std::vector<double> grid(grid_points);
  for (int s = 0; s < grid_points; ++s)
    grid[s] = grid_start + (grid_end - grid_start) * s / (grid_points - 1);

  const bool extrapolated = grid_end > net.normalizer.time_scale;
  std::ofstream out(out_path);
  if (!out) throw ParseError("cannot open file for writing: " + out_path);
  if (extrapolated) {
    out << "# warning: grid extends beyond the maximum training time t_max="
        << format_g17(net.normalizer.time_scale) << '\n';
    std::cerr << "warning: predicting beyond the maximum training time t_max="
              << format_g17(net.normalizer.time_scale) << '\n';
  }
  out << "subject,time,survival\n";
  for (int i = 0; i < data.size(); ++i) {
    const SurvivalCurve curve = survival_curve(net, data.features.row(i), grid, k_per_point);
    for (std::size_t s = 0; s < curve.times.size(); ++s)
      out << i << ',' << format_g17(curve.times[s]) << ',' << format_g17(curve.survival[s])
          << '\n';
  }
  std::cout << "curves for " << data.size() << " subject(s) written to " << out_path << '\n';
  return 0;
}

int run_interpret(const DataFlags& data_flags, const std::string& model, double prune_threshold,
                  const std::string& out_dir, int n_points) {
  const auto [net, metadata] = load_model(model);
  DataFlags flags = data_flags;
  flags.time_col = metadata.time_column;
  flags.event_col = metadata.event_column;
  const SurvivalDataset data = load_data(flags);
  check_columns(metadata, data);

  fs::create_directories(out_dir);
  Matrix rows(data.size(), net.input_width());
  for (int r = 0; r < data.size(); ++r)
    net.normalizer.normalize(data.features.row(r), data.times[r], rows.row(r));

  const std::vector<EdgeAttribution> scores = attribute(net, rows);
  {
    std::ofstream out(fs::path(out_dir) / "attribution.csv");
    out << "layer,output,input,name,score\n";
    for (const EdgeAttribution& a : scores) {
      std::string name = "hidden";
      if (a.layer == 0)
        name = a.input == data.feature_count() ? metadata.time_column
                                               : data.column_names[a.input];
      out << a.layer << ',' << a.output << ',' << a.input << ',' << name << ','
          << format_g17(a.score) << '\n';
    }
  }

  const KanNetwork pruned = prune(net, rows, prune_threshold);
  const SymbolicModel formula = extract_formula(pruned, data, metadata.time_column);

  {
    std::ofstream out(fs::path(out_dir) / "formula.txt");
    out << render_formula(formula) << '\n';
    out << "fidelity_r2 " << format_g17(formula.fidelity) << '\n';
  }
  {
    nlohmann::json j;
    j["constant"] = formula.constant;
    j["fidelity_r2"] = formula.fidelity;
    j["terms"] = nlohmann::json::array();
    for (const SymbolicTerm& term : formula.terms)
      j["terms"].push_back({{"kind", function_kind_name(term.kind)},
                            {"input", term.input_name},
                            {"input_index", term.input_index},
                            {"inner_scale", term.inner_scale},
                            {"inner_shift", term.inner_shift},
                            {"outer_scale", term.outer_scale},
                            {"outer_shift", term.outer_shift},
                            {"r_squared", term.r_squared}});
    std::ofstream out(fs::path(out_dir) / "terms.json");
    out << j.dump(2) << '\n';
  }

  const fs::path edges_dir = fs::path(out_dir) / "edges";
  fs::create_directories(edges_dir);
  for (std::size_t l = 0; l < pruned.layers.size(); ++l) {
    const KanLayer& layer = pruned.layers[l];
    for (int j = 0; j < layer.out_width; ++j) {
      for (int i = 0; i < layer.in_width; ++i) {
        if (layer.edge(j, i).is_zero()) continue;
        std::string name = "hidden" + std::to_string(i);
        if (l == 0)
          name = i == data.feature_count() ? metadata.time_column : data.column_names[i];
        const EdgeSampleTable table = export_edge_samples(
            pruned, data, {static_cast<int>(l), j, i}, n_points);
        std::ostringstream file;
        file << "edge_l" << l << "_o" << j << "_i" << i << "_" << sanitize_filename(name)
             << ".csv";
        write_edge_table(table, (edges_dir / file.str()).string());
      }
    }
  }

  std::cout << render_formula(formula) << '\n'
            << "fidelity R^2 = " << format_g17(formula.fidelity) << '\n'
            << "artifacts written to " << out_dir << '\n';
  return 0;
}

int run_plot_export(const DataFlags& data_flags, const std::string& model,
                    const std::string& out_dir, int n_points, std::optional<int> layer,
                    std::optional<int> output, std::optional<int> input) {
  const auto [net, metadata] = load_model(model);
  DataFlags flags = data_flags;
  flags.time_col = metadata.time_column;
  flags.event_col = metadata.event_column;
  const SurvivalDataset data = load_data(flags);
  check_columns(metadata, data);
  fs::create_directories(out_dir);

  const auto export_one = [&](int l, int j, int i) {
    const EdgeSampleTable table = export_edge_samples(net, data, {l, j, i}, n_points);
    std::string name = "hidden" + std::to_string(i);
    if (l == 0)
      name = i == data.feature_count() ? metadata.time_column : data.column_names[i];
    std::ostringstream file;
    file << "edge_l" << l << "_o" << j << "_i" << i << "_" << sanitize_filename(name) << ".csv";
    write_edge_table(table, (fs::path(out_dir) / file.str()).string());
  };

  if (layer.has_value()) {
    if (!output.has_value() || !input.has_value())
      throw InvalidInputError("--layer requires --output and --input");
    export_one(*layer, *output, *input);
  } else {
    for (std::size_t l = 0; l < net.layers.size(); ++l)
      for (int j = 0; j < net.layers[l].out_width; ++j)
        for (int i = 0; i < net.layers[l].in_width; ++i)
          if (!net.layers[l].edge(j, i).is_zero()) export_one(static_cast<int>(l), j, i);
  }
  std::cout << "edge samples written to " << out_dir << '\n';
  return 0;
}

int run_synth(const std::string& spec_path, const std::string& out_path) {
  const SyntheticSpec spec = load_synthetic_spec(spec_path);
  auto [data, truth] = generate_synthetic(spec);
  (void)truth;
  write_csv(data, out_path);
  save_synthetic_spec(spec, out_path + ".spec.json");
  std::cout << "generated " << data.size() << " rows (event rate "
            << format_g17(data.event_rate()) << ") to " << out_path << '\n';
  return 0;
}

int run_search(const DataFlags& data_flags, int trials, int folds, std::uint64_t seed,
               const std::string& out_config, const std::string& space_path) {
  const SurvivalDataset data = load_data(data_flags);
  SearchSpace space;
  if (!space_path.empty()) {
    std::ifstream in(space_path);
    if (!in) throw ParseError("cannot open search space file: " + space_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(space_path + ": " + e.what());
    }
    if (j.contains("hidden_widths")) space.hidden_widths = j["hidden_widths"].get<std::vector<int>>();
    if (j.contains("grid_intervals")) space.grid_intervals = j["grid_intervals"].get<std::vector<int>>();
    const auto read_range = [&](const char* key, ParameterRange& r) {
      if (!j.contains(key)) return;
      r.lo = j[key].at("lo").get<double>();
      r.hi = j[key].at("hi").get<double>();
      r.log10 = j[key].value("log10", r.log10);
    };
    read_range("lambda", space.lambda);
    read_range("learning_rate", space.learning_rate);
    read_range("weight_decay", space.weight_decay);
    if (j.contains("base")) apply_config_json(j["base"], space.base);
  }
  const TrainConfig best = random_search(data, space, trials, folds, seed);
  std::ofstream out(out_config);
  if (!out) throw ParseError("cannot open file for writing: " + out_config);
  out << config_to_json(best).dump(2) << '\n';
  std::cout << "best config written to " << out_config << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SurvKAN: parametric time-continuous survival modelling with "
               "Kolmogorov-Arnold networks"};
  app.require_subcommand(1);

  // train ---------------------------------------------------------------
  DataFlags train_data;
  TrainConfig train_cfg;
  std::string train_out_model, train_out_report, train_config_path;
  auto* train_cmd = app.add_subcommand("train", "fit a model and write it to disk");
  add_data_flags(train_cmd, train_data);
  train_cmd->add_option("--out-model", train_out_model, "output model file")->required();
  train_cmd->add_option("--out-report", train_out_report,
                        "training report CSV (default: <out-model>.report.csv)");
  auto* opt_config = train_cmd->add_option("--config", train_config_path, "JSON config file");
  auto* opt_seed = train_cmd->add_option("--seed", train_cfg.seed, "RNG seed");
  auto* opt_epochs = train_cmd->add_option("--epochs", train_cfg.epochs, "max epochs");
  auto* opt_lambda = train_cmd->add_option("--lambda", train_cfg.lambda, "regularization strength");
  auto* opt_hidden = train_cmd->add_option("--hidden", train_cfg.hidden_width, "hidden width m (0-3)");
  auto* opt_grid = train_cmd->add_option("--grid", train_cfg.grid_intervals, "spline grid intervals G");
  auto* opt_lr = train_cmd->add_option("--learning-rate", train_cfg.learning_rate, "AdamW learning rate");
  auto* opt_wd = train_cmd->add_option("--weight-decay", train_cfg.weight_decay, "decoupled weight decay");
  auto* opt_k = train_cmd->add_option("--integration-k", train_cfg.integration_k, "trapezoid points");
  auto* opt_patience = train_cmd->add_option("--patience", train_cfg.patience, "early stopping patience");

  // eval ----------------------------------------------------------------
  DataFlags eval_data, eval_train;
  std::string eval_model, eval_out;
  int eval_k = 50;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model (C-index, IBS)");
  add_data_flags(eval_cmd, eval_data);
  eval_cmd->add_option("--model", eval_model, "model file")->required();
  eval_cmd->add_option("--train-data", eval_train.path,
                       "training dataset (for censoring weights)")->required();
  eval_cmd->add_option("--out-report", eval_out, "report file")->required();
  eval_cmd->add_option("--integration-k", eval_k, "trapezoid points");

  // predict ---------------------------------------------------------------
  DataFlags predict_data;
  std::string predict_model, predict_out;
  double grid_start = 0.0, grid_end = 0.0;
  int grid_points = 0, predict_k = 50;
  auto* predict_cmd = app.add_subcommand("predict", "write survival curves over a time grid");
  add_data_flags(predict_cmd, predict_data);
  predict_cmd->add_option("--model", predict_model, "model file")->required();
  predict_cmd->add_option("--grid-start", grid_start, "first grid time")->required();
  predict_cmd->add_option("--grid-end", grid_end, "last grid time")->required();
  predict_cmd->add_option("--grid-points", grid_points, "grid size")->required();
  predict_cmd->add_option("--integration-k", predict_k, "trapezoid points per segment");
  predict_cmd->add_option("--out", predict_out, "output CSV")->required();

  // interpret -------------------------------------------------------------
  DataFlags interpret_data;
  std::string interpret_model, interpret_out_dir;
  double prune_threshold = 0.05;
  int interpret_points = 101;
  auto* interpret_cmd =
      app.add_subcommand("interpret", "prune and extract the symbolic formula");
  add_data_flags(interpret_cmd, interpret_data);
  interpret_cmd->add_option("--model", interpret_model, "model file")->required();
  interpret_cmd->add_option("--prune-threshold", prune_threshold,
                            "relative attribution threshold");
  interpret_cmd->add_option("--out-dir", interpret_out_dir, "output directory")->required();
  interpret_cmd->add_option("--points", interpret_points, "edge sample points");

  // plot-export -----------------------------------------------------------
  DataFlags plot_data;
  std::string plot_model, plot_out_dir;
  int plot_points = 101;
  int plot_layer = -1, plot_output = -1, plot_input = -1;
  auto* plot_cmd = app.add_subcommand("plot-export", "export edge-function sample tables");
  add_data_flags(plot_cmd, plot_data);
  plot_cmd->add_option("--model", plot_model, "model file")->required();
  plot_cmd->add_option("--out-dir", plot_out_dir, "output directory")->required();
  plot_cmd->add_option("--points", plot_points, "sample points per edge");
  auto* opt_layer = plot_cmd->add_option("--layer", plot_layer, "layer of a single edge");
  auto* opt_output = plot_cmd->add_option("--output", plot_output, "output index of a single edge");
  auto* opt_input = plot_cmd->add_option("--input", plot_input, "input index of a single edge");

  // synth -------------------------------------------------------------------
  std::string synth_spec, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic survival dataset");
  synth_cmd->add_option("--spec", synth_spec, "synthetic spec JSON")->required();
  synth_cmd->add_option("--out", synth_out, "output CSV")->required();

  // search --------------------------------------------------------------
  DataFlags search_data;
  std::string search_out, search_space_path;
  int search_trials = 25, search_folds = 5;
  std::uint64_t search_seed = 0;
  auto* search_cmd = app.add_subcommand("search", "bounded random hyperparameter search");
  add_data_flags(search_cmd, search_data);
  search_cmd->add_option("--trials", search_trials, "number of sampled configs");
  search_cmd->add_option("--folds", search_folds, "cross-validation folds");
  search_cmd->add_option("--seed", search_seed, "RNG seed");
  search_cmd->add_option("--out-config", search_out, "winning config JSON")->required();
  search_cmd->add_option("--space", search_space_path, "search space JSON (optional)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      // Precedence: defaults < config file < explicit flags.
      TrainConfig cfg;
      if (opt_config->count()) apply_config_file(train_config_path, cfg);
      if (opt_seed->count()) cfg.seed = train_cfg.seed;
      if (opt_epochs->count()) cfg.epochs = train_cfg.epochs;
      if (opt_lambda->count()) cfg.lambda = train_cfg.lambda;
      if (opt_hidden->count()) cfg.hidden_width = train_cfg.hidden_width;
      if (opt_grid->count()) cfg.grid_intervals = train_cfg.grid_intervals;
      if (opt_lr->count()) cfg.learning_rate = train_cfg.learning_rate;
      if (opt_wd->count()) cfg.weight_decay = train_cfg.weight_decay;
      if (opt_k->count()) cfg.integration_k = train_cfg.integration_k;
      if (opt_patience->count()) cfg.patience = train_cfg.patience;
      return run_train(train_data, cfg, train_out_model, train_out_report);
    }
    if (eval_cmd->parsed())
      return run_eval(eval_data, eval_train, eval_model, eval_out, eval_k);
    if (predict_cmd->parsed())
      return run_predict(predict_data, predict_model, grid_start, grid_end, grid_points,
                         predict_k, predict_out);
    if (interpret_cmd->parsed())
      return run_interpret(interpret_data, interpret_model, prune_threshold, interpret_out_dir,
                           interpret_points);
    if (plot_cmd->parsed())
      return run_plot_export(plot_data, plot_model, plot_out_dir, plot_points,
                             opt_layer->count() ? std::optional<int>(plot_layer) : std::nullopt,
                             opt_output->count() ? std::optional<int>(plot_output) : std::nullopt,
                             opt_input->count() ? std::optional<int>(plot_input) : std::nullopt);
    if (synth_cmd->parsed()) return run_synth(synth_spec, synth_out);
    if (search_cmd->parsed())
      return run_search(search_data, search_trials, search_folds, search_seed, search_out,
                        search_space_path);
  } catch (const Error& e) {
    std::cerr << "error: " << app.get_subcommands().front()->get_name() << ": " << e.what()
              << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
