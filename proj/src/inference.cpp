#include "carht/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "carht/rng.hpp"

namespace carht {

std::optional<std::vector<double>> q_for_design(const DesignConfig& config, double pi,
                                                int stratum_count) {
  if (stratum_count < 1) throw std::invalid_argument("need at least one stratum");
  switch (config.scheme) {
    case Scheme::kSimpleRandomization:
      return std::vector<double>(static_cast<std::size_t>(stratum_count), pi * (1.0 - pi));
    case Scheme::kStratifiedPermutedBlock:
    case Scheme::kStratifiedBiasedCoin:
      return std::vector<double>(static_cast<std::size_t>(stratum_count), 0.0);
    case Scheme::kPocockSimonMinimization:
      // no per-stratum imbalance variance exists for minimization; callers
      // must fall back to the stratified variance
      return std::nullopt;
  }
  throw std::invalid_argument("unknown scheme");
}

VarianceComponents variance_components(const TransformedOutcomes& z, const TrialData& data,
                                       double pi,
                                       const std::optional<std::vector<double>>& q_k) {
  data.validate();
  if (z.z_hat.size() != data.size())
    throw std::invalid_argument("transformed outcomes do not match dataset");
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("pi must lie in (0,1)");

  const int k_count = data.stratum_count();
  if (q_k && q_k->size() != static_cast<std::size_t>(k_count))
    throw std::invalid_argument("q values must match the stratum count");

  std::vector<double> sum1(static_cast<std::size_t>(k_count), 0.0);
  std::vector<double> sum0(static_cast<std::size_t>(k_count), 0.0);
  std::vector<long> n1(static_cast<std::size_t>(k_count), 0);
  std::vector<long> n0(static_cast<std::size_t>(k_count), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto k = static_cast<std::size_t>(data.strata[i]);
    if (data.a[i]) { sum1[k] += z.z_hat[i]; n1[k] += 1; }
    else { sum0[k] += z.z_hat[i]; n0[k] += 1; }
  }
  double grand1 = 0.0, grand0 = 0.0;
  long tot1 = 0, tot0 = 0;
  std::vector<double> mean1(static_cast<std::size_t>(k_count), 0.0);
  std::vector<double> mean0(static_cast<std::size_t>(k_count), 0.0);
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (n1[ks] < 2 || n0[ks] < 2)
      throw std::runtime_error("stratum " + std::to_string(k) + ", arm " +
                               (n1[ks] < 2 ? "1" : "0") +
                               " has fewer than 2 units; variance undefined");
    mean1[ks] = sum1[ks] / static_cast<double>(n1[ks]);
    mean0[ks] = sum0[ks] / static_cast<double>(n0[ks]);
    grand1 += sum1[ks]; tot1 += n1[ks];
    grand0 += sum0[ks]; tot0 += n0[ks];
  }
  grand1 /= static_cast<double>(tot1);
  grand0 /= static_cast<double>(tot0);

  std::vector<double> ss1(static_cast<std::size_t>(k_count), 0.0);
  std::vector<double> ss0(static_cast<std::size_t>(k_count), 0.0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto k = static_cast<std::size_t>(data.strata[i]);
    if (data.a[i]) {
      const double d = z.z_hat[i] - mean1[k];
      ss1[k] += d * d;
    } else {
      const double d = z.z_hat[i] - mean0[k];
      ss0[k] += d * d;
    }
  }

  VarianceComponents out;
  if (q_k) out.v_a2 = 0.0;
  const double n = static_cast<double>(data.size());
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const double p_nk = static_cast<double>(n1[ks] + n0[ks]) / n;
    out.v_z2 += p_nk * (ss1[ks] / static_cast<double>(n1[ks]) / pi +
                        ss0[ks] / static_cast<double>(n0[ks]) / (1.0 - pi));
    const double dev1 = mean1[ks] - grand1;
    const double dev0 = mean0[ks] - grand0;
    out.v_h2 += p_nk * (dev1 - dev0) * (dev1 - dev0);
    if (q_k) {
      const double t = dev1 / pi + dev0 / (1.0 - pi);
      *out.v_a2 += p_nk * (*q_k)[ks] * t * t;
    }
  }
  return out;
}

double variance_tdim(const VarianceComponents& components) {
  if (!components.v_a2)
    throw std::runtime_error(
        "transformed difference-in-means variance is not universally applicable "
        "under minimization; use the stratified variance");
  return components.v_z2 + components.v_h2 + *components.v_a2;
}

double variance_str(const VarianceComponents& components) {
  return components.v_z2 + components.v_h2;
}

double variance_conservative(double fisher_hat, double pi) {
  if (!(fisher_hat > 0.0)) throw std::runtime_error("degenerate Fisher information");
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("pi must lie in (0,1)");
  return 1.0 / (pi * (1.0 - pi) * fisher_hat);
}

EstimateReport wald_ci(double tau_hat, double sigma2, std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("variance must be non-negative");
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  EstimateReport r;
  r.tau_hat = tau_hat;
  r.sigma2 = sigma2;
  r.alpha = alpha;
  r.se = std::sqrt(sigma2 / static_cast<double>(n));
  const double q = normal_quantile(1.0 - alpha / 2.0);
  r.ci_lo = tau_hat - q * r.se;
  r.ci_hi = tau_hat + q * r.se;
  return r;
}

}  // namespace carht
