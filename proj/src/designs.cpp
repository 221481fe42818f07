#include "carht/designs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace carht {

namespace {

constexpr std::uint64_t kMinimizationStream = 0xa11000001ULL;

std::vector<Rng> stratum_streams(std::uint64_t seed, int k_count) {
  std::vector<Rng> streams;
  streams.reserve(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    streams.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(k)));
  }
  return streams;
}

}  // namespace

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::kSimpleRandomization: return "simple";
    case Scheme::kStratifiedPermutedBlock: return "stratified-block";
    case Scheme::kStratifiedBiasedCoin: return "biased-coin";
    case Scheme::kPocockSimonMinimization: return "minimization";
  }
  throw std::invalid_argument("unknown scheme");
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "simple" || name == "sr") return Scheme::kSimpleRandomization;
  if (name == "stratified-block" || name == "block" || name == "str")
    return Scheme::kStratifiedPermutedBlock;
  if (name == "biased-coin" || name == "efron") return Scheme::kStratifiedBiasedCoin;
  if (name == "minimization" || name == "min") return Scheme::kPocockSimonMinimization;
  throw std::invalid_argument("unknown randomization scheme: " + name);
}

void DesignConfig::validate() const {
  // simple randomization tolerates the forced-assignment endpoints
  const bool endpoints_ok = scheme == Scheme::kSimpleRandomization;
  if (!(pi >= 0.0 && pi <= 1.0) || (!endpoints_ok && !(pi > 0.0 && pi < 1.0)))
    throw std::invalid_argument("pi must lie in (0,1)");
  if (scheme == Scheme::kStratifiedPermutedBlock && block_size < 1)
    throw std::invalid_argument("block_size must be >= 1");
  if ((scheme == Scheme::kStratifiedBiasedCoin ||
       scheme == Scheme::kPocockSimonMinimization) &&
      !(coin_p >= 0.5 && coin_p < 1.0))
    throw std::invalid_argument("coin_p must lie in [0.5, 1)");
}

int stratum_count(const std::vector<int>& strata) {
  int k_count = 0;
  for (int k : strata) {
    if (k < 0) throw std::invalid_argument("stratum ids must be non-negative");
    k_count = std::max(k_count, k + 1);
  }
  return k_count;
}

AssignmentVector assign_simple(const std::vector<int>& strata, double pi,
                               std::uint64_t seed) {
  const int k_count = stratum_count(strata);
  auto streams = stratum_streams(seed, std::max(k_count, 1));
  AssignmentVector a(strata.size());
  for (std::size_t i = 0; i < strata.size(); ++i) {
    a[i] = streams[static_cast<std::size_t>(strata[i])].bernoulli(pi) ? 1 : 0;
  }
  return a;
}

AssignmentVector assign_stratified_block(const std::vector<int>& strata, double pi,
                                         int block_size, std::uint64_t seed) {
  if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
  const int k_count = stratum_count(strata);
  auto streams = stratum_streams(seed, std::max(k_count, 1));
  const int treated_per_block = static_cast<int>(std::lround(pi * block_size));

  // unit positions per stratum, in arrival order
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k_count));
  for (std::size_t i = 0; i < strata.size(); ++i)
    members[static_cast<std::size_t>(strata[i])].push_back(i);

  AssignmentVector a(strata.size(), 0);
  for (int k = 0; k < k_count; ++k) {
    Rng& rng = streams[static_cast<std::size_t>(k)];
    const auto& idx = members[static_cast<std::size_t>(k)];
    std::size_t pos = 0;
    while (pos < idx.size()) {
      const std::size_t take = std::min<std::size_t>(block_size, idx.size() - pos);
      // full block of labels, Fisher-Yates shuffled; a partial final block is
      // the first `take` slots of a shuffled full block, which keeps the
      // marginal treated probability at pi per slot
      std::vector<std::uint8_t> block(static_cast<std::size_t>(block_size), 0);
      std::fill_n(block.begin(), treated_per_block, std::uint8_t{1});
      for (std::size_t j = block.size(); j > 1; --j) {
        std::swap(block[j - 1], block[rng.below(j)]);
      }
      for (std::size_t j = 0; j < take; ++j) a[idx[pos + j]] = block[j];
      pos += take;
    }
  }
  return a;
}

AssignmentVector assign_biased_coin(const std::vector<int>& strata, double pi,
                                    double coin_p, std::uint64_t seed) {
  if (!(coin_p >= 0.5 && coin_p < 1.0))
    throw std::invalid_argument("coin_p must lie in [0.5, 1)");
  const int k_count = stratum_count(strata);
  auto streams = stratum_streams(seed, std::max(k_count, 1));

  std::vector<long> n_k(static_cast<std::size_t>(k_count), 0);
  std::vector<long> n_k1(static_cast<std::size_t>(k_count), 0);
  AssignmentVector a(strata.size(), 0);
  for (std::size_t i = 0; i < strata.size(); ++i) {
    const auto k = static_cast<std::size_t>(strata[i]);
    // generalized Efron rule: imbalance relative to the target fraction
    const double d = static_cast<double>(n_k1[k]) - pi * static_cast<double>(n_k[k]);
    double p;
    if (d > 1e-9) {
      p = 1.0 - coin_p;
    } else if (d < -1e-9) {
      p = coin_p;
    } else {
      p = pi;
    }
    const bool treat = streams[k].bernoulli(p);
    a[i] = treat ? 1 : 0;
    n_k[k] += 1;
    if (treat) n_k1[k] += 1;
  }
  return a;
}

AssignmentVector assign_minimization(const std::vector<std::vector<int>>& covariates,
                                     std::vector<double> weights, double coin_p,
                                     double pi, std::uint64_t seed) {
  if (!(coin_p >= 0.5 && coin_p < 1.0))
    throw std::invalid_argument("coin_p must lie in [0.5, 1)");
  const std::size_t n = covariates.size();
  const std::size_t n_factors = weights.size();
  for (const auto& row : covariates) {
    if (row.size() != n_factors)
      throw std::invalid_argument("every unit needs a category for every weighted covariate");
  }
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (wsum <= 0.0) throw std::invalid_argument("minimization weights must have positive sum");
  for (auto& w : weights) w /= wsum;  // normalize; caller warned at config layer

  // marginal counts[factor][level][arm]
  std::vector<std::vector<std::array<long, 2>>> counts(n_factors);
  Rng rng(derive_seed(seed, kMinimizationStream));
  AssignmentVector a(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double imb[2] = {0.0, 0.0};
    for (std::size_t f = 0; f < n_factors; ++f) {
      const auto lev = static_cast<std::size_t>(covariates[i][f]);
      if (counts[f].size() <= lev) counts[f].resize(lev + 1, {0, 0});
      const auto& c = counts[f][lev];
      for (int arm = 0; arm < 2; ++arm) {
        const long c1 = c[1] + (arm == 1 ? 1 : 0);
        const long c0 = c[0] + (arm == 0 ? 1 : 0);
        imb[arm] += weights[f] * static_cast<double>(std::labs(c1 - c0));
      }
    }
    double p;
    if (imb[1] < imb[0] - 1e-12) {
      p = coin_p;
    } else if (imb[1] > imb[0] + 1e-12) {
      p = 1.0 - coin_p;
    } else {
      p = pi;
    }
    const bool treat = rng.bernoulli(p);
    a[i] = treat ? 1 : 0;
    for (std::size_t f = 0; f < n_factors; ++f) {
      counts[f][static_cast<std::size_t>(covariates[i][f])][treat ? 1 : 0] += 1;
    }
  }
  return a;
}

AssignmentVector assign(const DesignConfig& config, const std::vector<int>& strata,
                        const std::vector<std::vector<int>>& covariates) {
  config.validate();
  switch (config.scheme) {
    case Scheme::kSimpleRandomization:
      return assign_simple(strata, config.pi, config.seed);
    case Scheme::kStratifiedPermutedBlock:
      return assign_stratified_block(strata, config.pi, config.block_size, config.seed);
    case Scheme::kStratifiedBiasedCoin:
      return assign_biased_coin(strata, config.pi, config.coin_p, config.seed);
    case Scheme::kPocockSimonMinimization:
      return assign_minimization(covariates, config.weights, config.coin_p, config.pi,
                                 config.seed);
  }
  throw std::invalid_argument("unknown scheme");
}

DesignDiagnostics design_diagnostics(const std::vector<AssignmentVector>& replications,
                                     const std::vector<int>& strata, double pi) {
  if (replications.size() < 2)
    throw std::invalid_argument("design_diagnostics needs at least 2 replications");
  const int k_count = stratum_count(strata);
  std::vector<long> n_k(static_cast<std::size_t>(k_count), 0);
  for (int k : strata) n_k[static_cast<std::size_t>(k)] += 1;

  const auto r = replications.size();
  std::vector<std::vector<double>> d(static_cast<std::size_t>(k_count),
                                     std::vector<double>(r, 0.0));
  for (std::size_t rep = 0; rep < r; ++rep) {
    const auto& a = replications[rep];
    if (a.size() != strata.size())
      throw std::invalid_argument("assignment length does not match strata");
    std::vector<long> n_k1(static_cast<std::size_t>(k_count), 0);
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i]) n_k1[static_cast<std::size_t>(strata[i])] += 1;
    for (int k = 0; k < k_count; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      d[ks][rep] = static_cast<double>(n_k1[ks]) - pi * static_cast<double>(n_k[ks]);
    }
  }

  DesignDiagnostics out;
  out.mean_imbalance.resize(static_cast<std::size_t>(k_count));
  out.q_hat.resize(static_cast<std::size_t>(k_count));
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    double mean = 0.0;
    for (double v : d[ks]) mean += v;
    mean /= static_cast<double>(r);
    double var = 0.0;
    for (double v : d[ks]) var += (v - mean) * (v - mean);
    var /= static_cast<double>(r - 1);
    out.mean_imbalance[ks] = mean;
    out.q_hat[ks] = n_k[ks] > 0 ? var / static_cast<double>(n_k[ks]) : 0.0;
  }
  return out;
}

}  // namespace carht
