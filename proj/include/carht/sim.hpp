#pragma once

#include <optional>
#include <string>
#include <vector>

#include "carht/designs.hpp"
#include "carht/estimators.hpp"
#include "carht/inference.hpp"

namespace carht {

enum class Tail { kNormal, kLaplace, kCauchy };

std::string tail_name(Tail t);
Tail tail_from_name(const std::string& name);

struct OutcomeModelSpec {
  int model_id = 1;  // 1: linear, 2: nonlinear, 3: nonlinear with exp covariate
  Tail tail = Tail::kNormal;
  double tau = 0.0;
  std::size_t n = 1000;
  double pi = 0.5;

  void validate() const;
};

struct PotentialOutcomes {
  std::vector<double> y0;
  std::vector<double> y1;
  std::vector<int> strata;                    // index of the discrete covariate
  std::vector<std::vector<int>> min_factors;  // dichotomized factors for minimization
};

PotentialOutcomes generate(const OutcomeModelSpec& spec, Rng& rng);

enum class EstimatorKind {
  kDiffMedians,
  kDiffWeightedMedians,
  kStratifiedDiffMedians,
  kNaiveDim,
  kStratifiedDim,
  kTdim,
  kStr,
};

std::string estimator_name(EstimatorKind k);
EstimatorKind estimator_from_name(const std::string& name);

struct SimConfig {
  OutcomeModelSpec outcome;
  DesignConfig design;
  std::vector<EstimatorKind> estimators = {
      EstimatorKind::kDiffMedians, EstimatorKind::kNaiveDim, EstimatorKind::kTdim,
      EstimatorKind::kStr};
  EstimatorConfig estimator_config;
  std::size_t reps = 500;
  double alpha = 0.05;
  std::uint64_t master_seed = 0;
  int threads = 1;

  void validate() const;
};

struct RepRecord {
  double tau_hat = 0.0;
  std::optional<double> sigma2;  // absent: no variance defined for the estimator
  std::optional<double> se;
  std::optional<bool> covers;
  std::optional<double> length;
  std::optional<double> conservative;  // {pi(1-pi)I}^-1, transformed estimators only
  std::string note;                    // reason when sigma2 is absent
};

struct ReplicationOutput {
  std::vector<RepRecord> per_estimator;  // aligned with config.estimators
  int retries = 0;
};

ReplicationOutput run_replication(const SimConfig& config, std::uint64_t rep_seed);

struct EstimatorSummary {
  std::string name;
  double bias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
  std::optional<double> se;
  std::optional<double> cp;
  std::optional<double> length;
  std::optional<double> mean_sigma2;
  std::optional<double> mean_conservative;
  std::string note;
};

struct SimResult {
  std::vector<EstimatorSummary> estimators;
  std::size_t reps = 0;
  int total_retries = 0;
};

SimResult aggregate(const std::vector<ReplicationOutput>& outputs,
                    const std::vector<EstimatorKind>& kinds, double true_tau);

// full harness: derived per-replication seeds, optional worker threads,
// deterministic reduction regardless of completion order
SimResult run_simulation(const SimConfig& config);

// Resampling check on a real dataset: bootstrap units, impute the missing
// potential outcome with a constant shift, reassign treatment by the design,
// and re-estimate over replications.
SimResult synthetic_resample(const TrialData& real_data, double tau_hat_assumed,
                             const DesignConfig& design,
                             const std::vector<EstimatorKind>& kinds, std::size_t reps,
                             double alpha, std::uint64_t seed, int threads = 1);

}  // namespace carht
