#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vimkit/errors.hpp"
#include "vimkit/estimators.hpp"
#include "vimkit/simulation.hpp"

namespace vimkit {

using Json = nlohmann::ordered_json;

inline constexpr const char* kReportSchema = "vim-report/1";

// 17 significant digits: enough to reproduce any double bit for bit.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct GroupResult {
  std::string name;
  std::vector<std::string> columns;
  VimResult result;
};

struct ReportMeta {
  std::string subcommand;  // estimate | test | simulate
  std::string measure;
  double alpha = 0.05;
  double beta = 0.0;
  int folds = 5;
  std::uint64_t seed = 0;
  std::string input;
};

inline Json report_header(const ReportMeta& meta) {
  Json j;
  j["schema"] = kReportSchema;
  j["subcommand"] = meta.subcommand;
  j["measure"] = meta.measure;
  j["alpha"] = meta.alpha;
  j["beta"] = meta.beta;
  j["folds"] = meta.folds;
  j["seed"] = meta.seed;
  if (!meta.input.empty()) j["input"] = meta.input;
  return j;
}

inline Json group_report_json(const ReportMeta& meta,
                              const std::vector<GroupResult>& groups) {
  Json j = report_header(meta);
  j["groups"] = Json::array();
  for (const GroupResult& g : groups) {
    Json e;
    e["name"] = g.name;
    e["columns"] = g.columns;
    e["psi"] = g.result.psi;
    e["psi_clamped"] = g.result.psi_clamped();
    e["se"] = g.result.std_error;
    e["ci_lo"] = g.result.ci_lower;
    e["ci_hi"] = g.result.ci_upper;
    if (meta.subcommand == "test") {
      e["ci_one_sided_lo"] = g.result.ci_one_sided_lower;
      e["t_stat"] = g.result.test_stat ? Json(*g.result.test_stat) : Json();
      e["p_value"] = g.result.p_value ? Json(*g.result.p_value) : Json();
      e["reject"] = g.result.reject;
    }
    e["n_full"] = g.result.n_full;
    e["n_reduced"] = g.result.n_reduced;
    if (!g.result.notes.empty()) e["notes"] = g.result.notes;
    j["groups"].push_back(std::move(e));
  }
  return j;
}

// Flat projection of the JSON report.
inline std::string group_report_csv(const ReportMeta& meta,
                                    const std::vector<GroupResult>& groups) {
  const bool test = meta.subcommand == "test";
  std::string out = "name,psi,se,ci_lo,ci_hi";
  if (test) out += ",t_stat,p_value,reject";
  out += "\n";
  for (const GroupResult& g : groups) {
    out += g.name + "," + format_double(g.result.psi) + "," +
           format_double(g.result.std_error) + "," +
           format_double(g.result.ci_lower) + "," + format_double(g.result.ci_upper);
    if (test) {
      out += "," + (g.result.test_stat ? format_double(*g.result.test_stat) : "");
      out += "," + (g.result.p_value ? format_double(*g.result.p_value) : "");
      out += std::string(",") + (g.result.reject ? "true" : "false");
    }
    out += "\n";
  }
  return out;
}

inline Json simulation_report_json(const ReportMeta& meta, int scenario,
                                   const std::string& feature_set,
                                   const std::vector<OperatingCharacteristics>& rows) {
  Json j = report_header(meta);
  j["scenario"] = scenario;
  j["feature_set"] = feature_set;
  j["rows"] = Json::array();
  for (const OperatingCharacteristics& oc : rows) {
    Json e;
    e["n"] = oc.n;
    e["n_reps"] = oc.n_reps;
    e["failures"] = oc.failures;
    e["truth"] = oc.truth;
    e["psi"] = oc.mean_psi;
    e["psi_mc_se"] = oc.mean_psi_mc_se;
    e["scaled_mse"] = oc.scaled_mse;
    e["scaled_mse_mc_se"] = oc.scaled_mse_mc_se;
    e["coverage"] = oc.coverage;
    e["coverage_mc_se"] = oc.coverage_mc_se;
    e["rejection_rate"] = oc.rejection_rate;
    e["rejection_mc_se"] = oc.rejection_mc_se;
    j["rows"].push_back(std::move(e));
  }
  return j;
}

inline std::string simulation_report_csv(
    const std::vector<OperatingCharacteristics>& rows) {
  std::string out =
      "n,n_reps,failures,truth,psi,psi_mc_se,scaled_mse,scaled_mse_mc_se,"
      "coverage,coverage_mc_se,rejection_rate,rejection_mc_se\n";
  for (const OperatingCharacteristics& oc : rows) {
    out += std::to_string(oc.n) + "," + std::to_string(oc.n_reps) + "," +
           std::to_string(oc.failures) + "," + format_double(oc.truth) + "," +
           format_double(oc.mean_psi) + "," + format_double(oc.mean_psi_mc_se) + "," +
           format_double(oc.scaled_mse) + "," + format_double(oc.scaled_mse_mc_se) +
           "," + format_double(oc.coverage) + "," + format_double(oc.coverage_mc_se) +
           "," + format_double(oc.rejection_rate) + "," +
           format_double(oc.rejection_mc_se) + "\n";
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open output file '" + path + "'");
  out << text;
  if (!out) throw DataError("failed writing output file '" + path + "'");
}

}  // namespace vimkit
