#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "carht/rng.hpp"

namespace carht {

// Treatment assignment indicators, one per unit (1 = treatment).
using AssignmentVector = std::vector<std::uint8_t>;

enum class Scheme {
  kSimpleRandomization,
  kStratifiedPermutedBlock,
  kStratifiedBiasedCoin,
  kPocockSimonMinimization,
};

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct DesignConfig {
  Scheme scheme = Scheme::kSimpleRandomization;
  double pi = 0.5;                  // target treated probability
  int block_size = 4;               // permuted-block scheme
  double coin_p = 0.85;             // biased coin & minimization
  std::vector<double> weights;      // minimization, one per covariate
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument
};

// strata: dense stratum id per unit, in {0, ..., K-1}
AssignmentVector assign_simple(const std::vector<int>& strata, double pi, std::uint64_t seed);

AssignmentVector assign_stratified_block(const std::vector<int>& strata, double pi,
                                         int block_size, std::uint64_t seed);

AssignmentVector assign_biased_coin(const std::vector<int>& strata, double pi,
                                    double coin_p, std::uint64_t seed);

// covariates: per-unit category index for each weighted covariate
// (covariates[i][f] is unit i's level of factor f).
AssignmentVector assign_minimization(const std::vector<std::vector<int>>& covariates,
                                     std::vector<double> weights, double coin_p,
                                     double pi, std::uint64_t seed);

AssignmentVector assign(const DesignConfig& config, const std::vector<int>& strata,
                        const std::vector<std::vector<int>>& covariates);

struct DesignDiagnostics {
  // per-stratum mean imbalance D_{n[k]} = n_{[k]1} - pi * n_{[k]} over replications
  std::vector<double> mean_imbalance;
  // per-stratum empirical Var(D_{n[k]}) / n_{[k]} over replications
  std::vector<double> q_hat;
};

DesignDiagnostics design_diagnostics(const std::vector<AssignmentVector>& replications,
                                     const std::vector<int>& strata, double pi);

int stratum_count(const std::vector<int>& strata);

}  // namespace carht
