#pragma once

#include <optional>
#include <string>
#include <vector>

#include "carht/inference.hpp"
#include "carht/sim.hpp"

namespace carht {

// CSV with header; required columns: outcome (real), treatment (0/1),
// stratum (string or integer, mapped to dense ids in appearance order);
// optional covariate columns prefixed cov_.
TrialData load_dataset(const std::string& path);
TrialData parse_dataset_csv(const std::string& text);

// stratum labels in dense-id order, kept for report round-trips
struct DatasetLabels {
  std::vector<std::string> stratum_names;
};
TrialData parse_dataset_csv(const std::string& text, DatasetLabels* labels);

struct RunConfig {
  std::vector<EstimatorKind> estimators = {EstimatorKind::kTdim, EstimatorKind::kStr};
  DesignConfig design;
  EstimatorConfig estimator_config;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  bool pi_known = true;  // false: estimate the treated probability as n1/n
};

// strict JSON parse: unknown keys are errors
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

SimConfig parse_sim_config(const std::string& json_text);
SimConfig load_sim_config(const std::string& path);

struct AnalysisRow {
  std::string estimator;
  std::optional<EstimateReport> report;  // absent when this estimator failed
  std::string error;
};

// Runs every requested estimator; a failure in one is recorded in its row and
// does not abort the others.
std::vector<AnalysisRow> analyze(const TrialData& data, const RunConfig& config);

// serialization: floats rendered with 6 significant digits
std::string format_double(double v);
std::string analysis_to_csv(const std::vector<AnalysisRow>& rows);
std::string analysis_to_json(const std::vector<AnalysisRow>& rows);
std::string sim_result_to_csv(const SimResult& result);
std::string sim_result_to_json(const SimResult& result);
std::string assignment_to_csv(const AssignmentVector& a, const std::vector<int>& strata);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace carht
