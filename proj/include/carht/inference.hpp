#pragma once

#include <optional>
#include <string>
#include <vector>

#include "carht/estimators.hpp"

namespace carht {

struct VarianceComponents {
  double v_z2 = 0.0;  // within-stratum
  double v_h2 = 0.0;  // between-stratum heterogeneity
  // assignment-imbalance component; absent when the design's q values are
  // undefined (minimization), which forces stratified-variance inference
  std::optional<double> v_a2;
};

// Per-stratum q values for the design, or nullopt when the design does not
// admit one (Pocock–Simon minimization).
std::optional<std::vector<double>> q_for_design(const DesignConfig& config, double pi,
                                                int stratum_count);

VarianceComponents variance_components(const TransformedOutcomes& z, const TrialData& data,
                                       double pi,
                                       const std::optional<std::vector<double>>& q_k);

double variance_tdim(const VarianceComponents& components);  // v_z2+v_h2+v_a2
double variance_str(const VarianceComponents& components);   // v_z2+v_h2
double variance_conservative(double fisher_hat, double pi);  // 1/(pi(1-pi)I)

struct EstimateReport {
  double tau_hat = 0.0;
  double sigma2 = 0.0;
  double se = 0.0;  // sqrt(sigma2 / n)
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double alpha = 0.05;
  std::string method;
};

EstimateReport wald_ci(double tau_hat, double sigma2, std::size_t n, double alpha);

}  // namespace carht
