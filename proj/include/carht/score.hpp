#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace carht {

enum class KernelKind { kGaussian, kTriweight };

struct KernelSpec {
  KernelKind kind = KernelKind::kTriweight;
  // For the triweight kernel the bandwidth is the support half-width; for the
  // Gaussian kernel it is the standard deviation.
  double bandwidth = 0.0;
};

// Truncation field of the estimated score: the score is the kernel ratio
// f'/f only where the density is high enough and the ratio well behaved,
// and 0 elsewhere.
struct TruncationThresholds {
  double b = 0.0;  // cap on |f''|/f
  double c = 0.0;  // cap on |f'|/f (hence on |score|)
  double d = 0.0;  // density floor
  double e = 0.0;  // domain half-width, score(y) = 0 for |y| > e
};

struct DensityEval {
  double f = 0.0;
  double df = 0.0;
  double d2f = 0.0;
};

class ScoreModel {
 public:
  ScoreModel(std::vector<double> sample, KernelSpec kernel,
             TruncationThresholds thresholds);

  double density(double y) const;
  double density_deriv(double y) const;
  double density_deriv2(double y) const;
  DensityEval density_all(double y) const;  // single pass over the sample

  // truncated score estimate; 0 outside the truncation field
  double score(double y) const;
  // (f'/f)' = f''/f - (f'/f)^2 on the truncation field, 0 outside
  double score_deriv(double y) const;
  bool in_domain(double y) const;

  const KernelSpec& kernel() const { return kernel_; }
  const TruncationThresholds& thresholds() const { return thresholds_; }
  const std::vector<double>& sample() const { return sample_; }
  std::size_t sample_size() const { return sample_.size(); }

 private:
  std::vector<double> sample_;  // sorted
  KernelSpec kernel_;
  TruncationThresholds thresholds_;
};

// Bandwidth/threshold defaults, resolved from the fitting sample. Bandwidth
// uses a robust scale (MAD) with a one-step refinement that re-measures the
// scale on the central 98% of the sample, so heavy tails do not inflate it.
ScoreModel fit_score(const std::vector<double>& sample,
                     KernelKind kind = KernelKind::kTriweight);
ScoreModel fit_score(const std::vector<double>& sample, KernelKind kind,
                     const TruncationThresholds& thresholds,
                     double bandwidth = 0.0 /* 0 = auto */);

double auto_bandwidth(const std::vector<double>& sample, KernelKind kind);

struct RateReport {
  bool bandwidth_cap_ok = false;  // sigma * c < 0.5
  bool growth_ok = false;         // e * sigma^-5 < n
  bool positive_ok = false;       // sigma, d positive and small
  bool degenerate_score = false;  // c == 0 means the score is identically 0
  bool ok = false;
  std::string message;
};

RateReport validate_rates(std::size_t n, const TruncationThresholds& thresholds,
                          double sigma);

// I(f0) estimate from cross-fitted score evaluations on control outcomes:
// mean of squares. Returns 0 (flagged by the caller) when all scores are 0.
double fisher_info_hat(const std::vector<double>& score_values_on_control);

// Remark-style alternative: -(1/m) sum (f f'' - f'^2)/f^2 over the points
// inside the truncation field; points outside contribute 0.
double fisher_info_alt(const ScoreModel& model,
                       const std::vector<double>& control_outcomes_in_fold);

}  // namespace carht
