#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "carht/designs.hpp"
#include "carht/score.hpp"

namespace carht {

struct TrialData {
  std::vector<double> y;              // observed outcomes
  AssignmentVector a;                 // treatment indicators
  std::vector<int> strata;            // dense stratum ids {0..K-1}
  std::vector<std::vector<int>> covariates;  // optional, per-unit categories

  std::size_t size() const { return y.size(); }
  int stratum_count() const;
  void validate() const;  // lengths, binary treatment
};

// fold id per unit, in {1, 2}
struct FoldSplit {
  std::vector<int> fold_of;
};

enum class SplitMode { kCAR, kSR };
enum class InitialEstimator { kDiffMedians, kDiffWeightedMedians, kStratifiedDiffMedians };
enum class FisherEstimator { kSquaredScore, kAltSecondDeriv };
enum class ScoreFitArm { kControl, kPooled };

struct EstimatorConfig {
  InitialEstimator initial = InitialEstimator::kDiffWeightedMedians;
  SplitMode splitting = SplitMode::kCAR;
  FisherEstimator fisher = FisherEstimator::kSquaredScore;
  ScoreFitArm fit_arm = ScoreFitArm::kControl;
  KernelKind kernel = KernelKind::kTriweight;
  std::optional<double> pi;       // known target probability; nullopt = estimate n1/n
  std::optional<TruncationThresholds> thresholds;  // explicit override
  double bandwidth = 0.0;         // 0 = auto
  double var_bandwidth_scale = 1.0;
  bool fold_specific_initial = false;  // average of fold-wise one-step updates
  std::uint64_t seed = 0;
};

FoldSplit split_samples(const TrialData& data, SplitMode mode, std::uint64_t seed);

// initial estimators
double diff_in_medians(const TrialData& data);
double diff_in_weighted_medians(const TrialData& data);
double diff_in_weighted_medians(const TrialData& data, const std::vector<double>& pi_nk);
double stratified_diff_in_medians(const TrialData& data);

// comparators
double naive_dim(const TrialData& data);
double stratified_dim(const TrialData& data);

double weighted_median(std::vector<double> values, std::vector<double> weights);
double median(std::vector<double> values);

std::vector<double> stratum_treated_fractions(const TrialData& data);
std::vector<double> stratum_proportions(const TrialData& data);

struct TransformedOutcomes {
  std::vector<double> z_hat;
  std::vector<int> model_fold_used;  // fold whose model produced each value
};

// Cross-fitted transformed outcomes: unit i in fold j is evaluated with the
// fold-(3-j) model; treated outcomes are shifted by -tau_tilde first.
TransformedOutcomes transformed_outcomes(const TrialData& data, const FoldSplit& split,
                                         const ScoreModel& model_fold1,
                                         const ScoreModel& model_fold2,
                                         double tau_tilde, double fisher_hat);

struct FitDiagnostics {
  double tau_tilde = 0.0;
  double fisher_hat = 0.0;
  bool fisher_degenerate = false;
  std::size_t fold1_size = 0;
  std::size_t fold2_size = 0;
  double pi_used = 0.0;
  double bandwidth_fold1 = 0.0;
  double bandwidth_fold2 = 0.0;
};

struct PointEstimate {
  double tau_hat = 0.0;
  FitDiagnostics diagnostics;
  TransformedOutcomes z;       // for downstream variance estimation
  FoldSplit split;
};

// Transformed difference-in-means estimator (one-step update of the initial
// estimator with the cross-fitted estimated score).
PointEstimate tdim(const TrialData& data, const EstimatorConfig& config);

// Stratified transformed difference-in-means estimator (stratum-size-weighted
// update with stratum-specific treated fractions).
PointEstimate str(const TrialData& data, const EstimatorConfig& config);

}  // namespace carht
