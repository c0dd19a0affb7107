// vimkit: variable importance estimation, testing and simulation on CSV data.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimation
// degeneracy. Errors go to stderr with stable prefixes E_CONFIG / E_DATA /
// E_DEGENERATE.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vimkit/vimkit.hpp"

namespace {

using vimkit::EstimationConfig;
using vimkit::FeatureSet;
using vimkit::GroupResult;
using vimkit::Json;
using vimkit::MeasureKind;

struct CommonOptions {
  std::string input;
  std::string outcome;
  std::optional<std::string> treatment_column;
  std::optional<std::string> missing_column;
  std::string groups_file;
  std::vector<std::string> group_specs;
  std::string measure = "accuracy";
  std::string learner = "stack";
  int folds = 5;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  double beta = 0.0;
  std::string fold_mode = "balanced";
  double split_fraction = 0.5;
  bool stratify = false;
  double deviance_clip = 1e-3;
  bool auc_strict = false;
  bool no_crossfit = false;
  std::string output;
  std::string format = "json";
};

MeasureKind measure_from_name(const std::string& name) {
  static const std::map<std::string, MeasureKind> table = {
      {"r_squared", MeasureKind::r_squared},
      {"deviance", MeasureKind::deviance},
      {"accuracy", MeasureKind::accuracy},
      {"auc", MeasureKind::auc}};
  const auto it = table.find(name);
  if (it == table.end())
    throw vimkit::ConfigError("unknown measure '" + name +
                              "' (expected r_squared, deviance, accuracy or auc)");
  return it->second;
}

vimkit::LearnerPtr learner_from_name(const std::string& name) {
  if (name == "stack") return nullptr;  // resolved per outcome kind
  if (name == "mean") return vimkit::make_intercept_learner();
  if (name == "logistic") return vimkit::make_logistic_learner();
  if (name == "linear") return vimkit::make_linear_learner();
  if (name == "stumps") return vimkit::make_boosted_stumps_learner();
  throw vimkit::ConfigError("unknown learner '" + name +
                            "' (expected stack, mean, logistic, linear or stumps)");
}

void add_common_flags(CLI::App* cmd, CommonOptions& o, bool test) {
  cmd->add_option("--input", o.input, "input CSV file")->required();
  cmd->add_option("--outcome", o.outcome, "outcome column name")->required();
  cmd->add_option("--treatment-column", o.treatment_column,
                  "0/1 treatment column (rule-value measure)");
  cmd->add_option("--missing-column", o.missing_column,
                  "0/1 outcome-observed indicator column");
  cmd->add_option("--groups", o.groups_file,
                  "JSON file mapping group names to column-name arrays");
  cmd->add_option("--group", o.group_specs,
                  "inline group, e.g. --group geo=x1,x2 (repeatable)");
  cmd->add_option("--measure", o.measure, "r_squared | deviance | accuracy | auc");
  cmd->add_option("--learner", o.learner, "stack | mean | logistic | linear | stumps");
  cmd->add_option("--folds", o.folds, "cross-fitting folds K");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--alpha", o.alpha, "level for intervals and tests");
  if (test) {
    cmd->add_option("--beta", o.beta, "beta-null threshold");
    cmd->add_option("--split-fraction", o.split_fraction,
                    "fraction of data in the reduced-model half");
  } else {
    cmd->add_flag("--no-crossfit", o.no_crossfit,
                  "plug-in estimator without cross-fitting");
  }
  cmd->add_option("--fold-mode", o.fold_mode, "balanced | iid");
  cmd->add_flag("--stratify", o.stratify, "preserve outcome prevalence per fold");
  cmd->add_option("--deviance-clip", o.deviance_clip, "probability clip for deviance");
  cmd->add_flag("--auc-strict", o.auc_strict, "strict-inequality AUC (no tie credit)");
  cmd->add_option("--output", o.output, "report file (default: stdout)");
  cmd->add_option("--format", o.format, "json | csv");
}

EstimationConfig config_from(const CommonOptions& o, bool test) {
  EstimationConfig cfg;
  cfg.measure = measure_from_name(o.measure);
  cfg.folds = o.folds;
  cfg.seed = o.seed;
  cfg.alpha = o.alpha;
  cfg.beta = o.beta;
  cfg.cross_fit = !o.no_crossfit;
  cfg.sample_split = test;
  cfg.learner = learner_from_name(o.learner);
  if (o.fold_mode == "balanced")
    cfg.fold_mode = vimkit::FoldAssignMode::balanced;
  else if (o.fold_mode == "iid")
    cfg.fold_mode = vimkit::FoldAssignMode::iid_with_replacement;
  else
    throw vimkit::ConfigError("unknown fold mode '" + o.fold_mode + "'");
  cfg.split_fraction = o.split_fraction;
  cfg.stratify_folds = o.stratify;
  cfg.measure_options.deviance_clip = o.deviance_clip;
  cfg.measure_options.auc_strict_ties = o.auc_strict;
  return cfg;
}

// Groups resolve against the feature columns; the outcome and role columns
// are never features, so a group naming one is a config error.
std::vector<std::pair<std::string, std::vector<std::string>>> resolve_group_names(
    const CommonOptions& o, const std::vector<std::string>& feature_names) {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  if (!o.groups_file.empty()) {
    std::ifstream in(o.groups_file);
    if (!in) throw vimkit::ConfigError("cannot open groups file '" + o.groups_file + "'");
    Json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw vimkit::ConfigError("groups file is not valid JSON: " + std::string(e.what()));
    }
    if (!j.is_object()) throw vimkit::ConfigError("groups file must be a JSON object");
    for (const auto& [name, cols] : j.items()) {
      if (!cols.is_array()) throw vimkit::ConfigError("group '" + name + "' must be an array");
      std::vector<std::string> names;
      for (const auto& c : cols) names.push_back(c.get<std::string>());
      groups.emplace_back(name, std::move(names));
    }
  }
  for (const std::string& spec : o.group_specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw vimkit::ConfigError("inline group '" + spec + "' must look like name=col1,col2");
    std::vector<std::string> names;
    const std::string rest = spec.substr(eq + 1);
    std::size_t pos = 0;
    while (pos <= rest.size()) {
      const auto comma = rest.find(',', pos);
      names.push_back(rest.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    groups.emplace_back(spec.substr(0, eq), std::move(names));
  }
  // Default: one group per feature column.
  if (groups.empty())
    for (const std::string& f : feature_names)
      groups.emplace_back(f, std::vector<std::string>{f});

  for (const auto& [name, cols] : groups) {
    if (cols.empty()) throw vimkit::ConfigError("group '" + name + "' is empty");
    for (const std::string& c : cols) {
      if (c == o.outcome)
        throw vimkit::ConfigError("group '" + name +
                                  "' references the outcome column '" + c + "'");
      bool found = false;
      for (const std::string& f : feature_names) found = found || f == c;
      if (!found)
        throw vimkit::ConfigError("group '" + name +
                                  "' references unknown column '" + c + "'");
    }
  }
  return groups;
}

FeatureSet feature_set_of(const std::vector<std::string>& cols,
                          const std::vector<std::string>& feature_names) {
  std::vector<int> idx;
  for (const std::string& c : cols)
    for (std::size_t j = 0; j < feature_names.size(); ++j)
      if (feature_names[j] == c) idx.push_back(static_cast<int>(j) + 1);
  return FeatureSet::of(std::move(idx));
}

void emit_report(const std::string& output, const std::string& format,
                 const Json& json_report, const std::string& csv_report) {
  if (format != "csv" && format != "json")
    throw vimkit::ConfigError("unknown output format '" + format + "'");
  const std::string text = format == "csv" ? csv_report : json_report.dump(2) + "\n";
  if (output.empty())
    std::cout << text;
  else
    vimkit::write_text_file(output, text);
}

int run_group_command(const CommonOptions& o, bool test) {
  const EstimationConfig cfg = config_from(o, test);

  vimkit::IngestOptions ingest;
  ingest.outcome_column = o.outcome;
  ingest.treatment_column = o.treatment_column;
  ingest.missing_column = o.missing_column;
  const vimkit::IngestedData data = vimkit::ingest_csv(o.input, ingest);
  const auto groups = resolve_group_names(o, data.feature_names);

  std::vector<GroupResult> results;
  for (const auto& [name, cols] : groups) {
    const FeatureSet s = feature_set_of(cols, data.feature_names);
    GroupResult g;
    g.name = name;
    g.columns = cols;
    if (std::holds_alternative<vimkit::Dataset>(data.data))
      g.result = vimkit::estimate_vim(std::get<vimkit::Dataset>(data.data), s, cfg);
    else if (std::holds_alternative<vimkit::TreatmentDataset>(data.data))
      g.result =
          vimkit::coarsened_rule_vim(std::get<vimkit::TreatmentDataset>(data.data), s, cfg);
    else
      g.result = vimkit::coarsened_missing_vim(
          std::get<vimkit::MissingnessDataset>(data.data), s, cfg);
    results.push_back(std::move(g));
  }

  vimkit::ReportMeta meta;
  meta.subcommand = test ? "test" : "estimate";
  meta.measure = o.measure;
  meta.alpha = o.alpha;
  meta.beta = o.beta;
  meta.folds = o.folds;
  meta.seed = o.seed;
  meta.input = o.input;
  emit_report(o.output, o.format, vimkit::group_report_json(meta, results),
              vimkit::group_report_csv(meta, results));
  return 0;
}

struct SimulateOptions {
  int scenario = 2;
  std::string measure = "accuracy";
  int feature = 1;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 300;
  std::string learner = "stack";
  int folds = 5;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  double beta = 0.0;
  std::string output;
  std::string format = "json";
};

int run_simulate(const SimulateOptions& o) {
  vimkit::ExperimentConfig xc;
  if (!o.n_grid.empty()) xc.n_grid = o.n_grid;
  xc.n_reps = o.reps;
  xc.estimation.folds = o.folds;
  xc.estimation.alpha = o.alpha;
  xc.estimation.beta = o.beta;
  xc.estimation.cross_fit = true;
  xc.estimation.sample_split = true;
  xc.estimation.learner = learner_from_name(o.learner);
  const vimkit::SimScenario sc = vimkit::scenario(o.scenario);
  const FeatureSet s = FeatureSet::of({o.feature});
  const auto rows =
      vimkit::run_experiment(sc, measure_from_name(o.measure), s, xc, o.seed);

  vimkit::ReportMeta meta;
  meta.subcommand = "simulate";
  meta.measure = o.measure;
  meta.alpha = o.alpha;
  meta.beta = o.beta;
  meta.folds = o.folds;
  meta.seed = o.seed;
  emit_report(o.output, o.format,
              vimkit::simulation_report_json(meta, o.scenario, s.to_string(), rows),
              vimkit::simulation_report_csv(rows));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Algorithm-agnostic variable importance: estimation, "
               "beta-null testing and simulation"};
  app.require_subcommand(1);

  CommonOptions est_opt, test_opt;
  SimulateOptions sim_opt;

  CLI::App* est = app.add_subcommand(
      "estimate", "cross-fitted importance estimates with Wald intervals");
  add_common_flags(est, est_opt, false);

  CLI::App* test = app.add_subcommand(
      "test", "sample-split cross-fitted test of the beta-null");
  add_common_flags(test, test_opt, true);

  CLI::App* sim =
      app.add_subcommand("simulate", "Monte Carlo operating characteristics");
  sim->add_option("--scenario", sim_opt.scenario, "data-generating scenario (1 or 2)");
  sim->add_option("--measure", sim_opt.measure, "r_squared | deviance | accuracy | auc");
  sim->add_option("--feature", sim_opt.feature, "feature under study (1 or 2)");
  sim->add_option("--n", sim_opt.n_grid, "sample size(s); repeatable");
  sim->add_option("--reps", sim_opt.reps, "replications per sample size");
  sim->add_option("--learner", sim_opt.learner, "stack | mean | logistic | linear | stumps");
  sim->add_option("--folds", sim_opt.folds, "cross-fitting folds K");
  sim->add_option("--seed", sim_opt.seed, "random seed");
  sim->add_option("--alpha", sim_opt.alpha, "test level");
  sim->add_option("--beta", sim_opt.beta, "beta-null threshold");
  sim->add_option("--output", sim_opt.output, "report file (default: stdout)");
  sim->add_option("--format", sim_opt.format, "json | csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) return run_group_command(est_opt, false);
    if (test->parsed()) return run_group_command(test_opt, true);
    if (sim->parsed()) return run_simulate(sim_opt);
  } catch (const vimkit::DegeneracyError& e) {
    std::cerr << "E_DEGENERATE: " << e.what() << "\n";
    return 4;
  } catch (const vimkit::DataError& e) {
    std::cerr << "E_DATA: " << e.what() << "\n";
    return 3;
  } catch (const vimkit::ConfigError& e) {
    std::cerr << "E_CONFIG: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "E_CONFIG: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
