#include "carht/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace carht {

namespace {

constexpr std::uint64_t kSplitStreamBase = 0x51u;

std::vector<double> arm_values(const TrialData& data, int arm) {
  std::vector<double> out;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.a[i] == arm) out.push_back(data.y[i]);
  return out;
}

}  // namespace

int TrialData::stratum_count() const { return carht::stratum_count(strata); }

void TrialData::validate() const {
  if (a.size() != y.size() || strata.size() != y.size())
    throw std::invalid_argument("outcome, treatment, and stratum vectors must have equal length");
  if (y.empty()) throw std::invalid_argument("empty dataset");
  for (auto v : a)
    if (v != 0 && v != 1) throw std::invalid_argument("treatment indicators must be 0 or 1");
  for (int k : strata)
    if (k < 0) throw std::invalid_argument("stratum ids must be non-negative");
  if (!covariates.empty() && covariates.size() != y.size())
    throw std::invalid_argument("covariate rows must match unit count");
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double weighted_median(std::vector<double> values, std::vector<double> weights) {
  if (values.empty()) throw std::invalid_argument("weighted median of empty set");
  if (values.size() != weights.size())
    throw std::invalid_argument("values and weights must have equal length");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("weights must have positive sum");
  const double half = 0.5 * total;
  double cum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    cum += weights[order[r]];
    if (cum >= half - 1e-12 * total) {
      // exactly half the weight at or below this value: midpoint with the
      // next order statistic (matches the even-count unweighted median)
      if (std::abs(cum - half) <= 1e-12 * total && r + 1 < order.size())
        return 0.5 * (values[order[r]] + values[order[r + 1]]);
      return values[order[r]];
    }
  }
  return values[order.back()];
}

std::vector<double> stratum_treated_fractions(const TrialData& data) {
  const int k_count = data.stratum_count();
  std::vector<long> n_k(static_cast<std::size_t>(k_count), 0);
  std::vector<long> n_k1(static_cast<std::size_t>(k_count), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto k = static_cast<std::size_t>(data.strata[i]);
    n_k[k] += 1;
    if (data.a[i]) n_k1[k] += 1;
  }
  std::vector<double> pi_nk(static_cast<std::size_t>(k_count), 0.0);
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (n_k[ks] == 0) throw std::invalid_argument("empty stratum " + std::to_string(k));
    pi_nk[ks] = static_cast<double>(n_k1[ks]) / static_cast<double>(n_k[ks]);
  }
  return pi_nk;
}

std::vector<double> stratum_proportions(const TrialData& data) {
  const int k_count = data.stratum_count();
  std::vector<double> p(static_cast<std::size_t>(k_count), 0.0);
  for (int k : data.strata) p[static_cast<std::size_t>(k)] += 1.0;
  for (auto& v : p) v /= static_cast<double>(data.size());
  return p;
}

double diff_in_medians(const TrialData& data) {
  auto t = arm_values(data, 1);
  auto c = arm_values(data, 0);
  if (t.empty() || c.empty()) throw std::invalid_argument("both arms must be non-empty");
  return median(std::move(t)) - median(std::move(c));
}

double diff_in_weighted_medians(const TrialData& data, const std::vector<double>& pi_nk) {
  std::vector<double> yt, wt, yc, wc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double p = pi_nk.at(static_cast<std::size_t>(data.strata[i]));
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument("stratum " + std::to_string(data.strata[i]) +
                                  " has a degenerate treated fraction");
    if (data.a[i]) {
      yt.push_back(data.y[i]);
      wt.push_back(1.0 / p);
    } else {
      yc.push_back(data.y[i]);
      wc.push_back(1.0 / (1.0 - p));
    }
  }
  if (yt.empty() || yc.empty()) throw std::invalid_argument("both arms must be non-empty");
  return weighted_median(std::move(yt), std::move(wt)) -
         weighted_median(std::move(yc), std::move(wc));
}

double diff_in_weighted_medians(const TrialData& data) {
  return diff_in_weighted_medians(data, stratum_treated_fractions(data));
}

double stratified_diff_in_medians(const TrialData& data) {
  const int k_count = data.stratum_count();
  std::vector<std::vector<double>> yt(static_cast<std::size_t>(k_count));
  std::vector<std::vector<double>> yc(static_cast<std::size_t>(k_count));
  for (std::size_t i = 0; i < data.size(); ++i) {
    (data.a[i] ? yt : yc)[static_cast<std::size_t>(data.strata[i])].push_back(data.y[i]);
  }
  const auto p = stratum_proportions(data);
  double acc = 0.0;
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (yt[ks].empty() || yc[ks].empty())
      throw std::invalid_argument("stratum " + std::to_string(k) + ", arm " +
                                  (yt[ks].empty() ? "1" : "0") + " is empty");
    acc += p[ks] * (median(yt[ks]) - median(yc[ks]));
  }
  return acc;
}

double naive_dim(const TrialData& data) {
  double st = 0.0, sc = 0.0;
  long nt = 0, nc = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.a[i]) { st += data.y[i]; nt += 1; }
    else { sc += data.y[i]; nc += 1; }
  }
  if (nt == 0 || nc == 0) throw std::invalid_argument("both arms must be non-empty");
  return st / static_cast<double>(nt) - sc / static_cast<double>(nc);
}

double stratified_dim(const TrialData& data) {
  const int k_count = data.stratum_count();
  std::vector<double> st(static_cast<std::size_t>(k_count), 0.0);
  std::vector<double> sc(static_cast<std::size_t>(k_count), 0.0);
  std::vector<long> nt(static_cast<std::size_t>(k_count), 0);
  std::vector<long> nc(static_cast<std::size_t>(k_count), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto k = static_cast<std::size_t>(data.strata[i]);
    if (data.a[i]) { st[k] += data.y[i]; nt[k] += 1; }
    else { sc[k] += data.y[i]; nc[k] += 1; }
  }
  const auto p = stratum_proportions(data);
  double acc = 0.0;
  for (int k = 0; k < k_count; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    if (nt[ks] == 0 || nc[ks] == 0)
      throw std::invalid_argument("stratum " + std::to_string(k) + ", arm " +
                                  (nt[ks] == 0 ? "1" : "0") + " is empty");
    acc += p[ks] * (st[ks] / static_cast<double>(nt[ks]) - sc[ks] / static_cast<double>(nc[ks]));
  }
  return acc;
}

FoldSplit split_samples(const TrialData& data, SplitMode mode, std::uint64_t seed) {
  data.validate();
  FoldSplit split;
  split.fold_of.assign(data.size(), 2);
  if (mode == SplitMode::kSR) {
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(seed, kSplitStreamBase));
    for (std::size_t j = idx.size(); j > 1; --j) std::swap(idx[j - 1], idx[rng.below(j)]);
    const std::size_t half = data.size() / 2;
    for (std::size_t r = 0; r < half; ++r) split.fold_of[idx[r]] = 1;
    return split;
  }
  // CAR splitting: independent uniform split within each (stratum, arm) cell,
  // fold 1 receiving floor(cell size / 2)
  const int k_count = data.stratum_count();
  for (int k = 0; k < k_count; ++k) {
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (data.strata[i] == k && data.a[i] == arm) idx.push_back(i);
      if (idx.empty()) continue;
      Rng rng(derive_seed(seed, kSplitStreamBase + 2 * static_cast<std::uint64_t>(k) +
                                    static_cast<std::uint64_t>(arm) + 1));
      for (std::size_t j = idx.size(); j > 1; --j) std::swap(idx[j - 1], idx[rng.below(j)]);
      const std::size_t half = idx.size() / 2;
      for (std::size_t r = 0; r < half; ++r) split.fold_of[idx[r]] = 1;
    }
  }
  return split;
}

TransformedOutcomes transformed_outcomes(const TrialData& data, const FoldSplit& split,
                                         const ScoreModel& model_fold1,
                                         const ScoreModel& model_fold2,
                                         double tau_tilde, double fisher_hat) {
  if (!(fisher_hat > 0.0)) throw std::runtime_error("degenerate Fisher information");
  if (split.fold_of.size() != data.size())
    throw std::invalid_argument("fold split does not match dataset");
  TransformedOutcomes out;
  out.z_hat.resize(data.size());
  out.model_fold_used.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int opp = 3 - split.fold_of[i];
    const ScoreModel& m = opp == 1 ? model_fold1 : model_fold2;
    const double arg = data.y[i] - (data.a[i] ? tau_tilde : 0.0);
    out.z_hat[i] = -m.score(arg) / fisher_hat;
    out.model_fold_used[i] = opp;
  }
  return out;
}

namespace {

double initial_estimate(const TrialData& data, InitialEstimator which) {
  switch (which) {
    case InitialEstimator::kDiffMedians: return diff_in_medians(data);
    case InitialEstimator::kDiffWeightedMedians: return diff_in_weighted_medians(data);
    case InitialEstimator::kStratifiedDiffMedians: return stratified_diff_in_medians(data);
  }
  throw std::invalid_argument("unknown initial estimator");
}

struct FittedModels {
  ScoreModel m1;
  ScoreModel m2;
  double fisher = 0.0;
  bool degenerate = false;
  std::size_t fold1 = 0;
  std::size_t fold2 = 0;
};

FittedModels fit_fold_models(const TrialData& data, const FoldSplit& split,
                             const EstimatorConfig& config, double tau_tilde) {
  std::vector<double> fit1, fit2, ctrl1, ctrl2;
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto& fit = split.fold_of[i] == 1 ? fit1 : fit2;
    auto& ctrl = split.fold_of[i] == 1 ? ctrl1 : ctrl2;
    if (data.a[i] == 0) {
      fit.push_back(data.y[i]);
      ctrl.push_back(data.y[i]);
    } else if (config.fit_arm == ScoreFitArm::kPooled) {
      fit.push_back(data.y[i] - tau_tilde);
    }
  }

  auto fit_one = [&](const std::vector<double>& sample) {
    if (config.thresholds)
      return fit_score(sample, config.kernel, *config.thresholds, config.bandwidth);
    if (config.bandwidth > 0.0 || config.var_bandwidth_scale != 1.0) {
      double h = config.bandwidth > 0.0 ? config.bandwidth
                                        : auto_bandwidth(sample, config.kernel);
      h *= config.var_bandwidth_scale;
      ScoreModel base = fit_score(sample, config.kernel);
      return fit_score(sample, config.kernel, base.thresholds(), h);
    }
    return fit_score(sample, config.kernel);
  };

  FittedModels out{fit_one(fit1), fit_one(fit2), 0.0, false, fit1.size(), fit2.size()};

  // cross-fitted Fisher information: each control outcome scored with the
  // opposite fold's model, then mean of squares over all controls
  std::vector<double> g;
  g.reserve(ctrl1.size() + ctrl2.size());
  if (config.fisher == FisherEstimator::kSquaredScore) {
    for (double y : ctrl1) g.push_back(out.m2.score(y));
    for (double y : ctrl2) g.push_back(out.m1.score(y));
    out.fisher = fisher_info_hat(g);
  } else {
    const double i1 = fisher_info_alt(out.m1, ctrl1);
    const double i2 = fisher_info_alt(out.m2, ctrl2);
    out.fisher = 0.5 * (i1 + i2);
  }
  if (!(out.fisher > 0.0)) out.degenerate = true;
  return out;
}

PointEstimate one_step(const TrialData& data, const EstimatorConfig& config, bool stratified) {
  data.validate();
  const double pi_target =
      config.pi ? *config.pi
                : static_cast<double>(std::count(data.a.begin(), data.a.end(), 1)) /
                      static_cast<double>(data.size());
  const double tau_tilde = initial_estimate(data, config.initial);
  const FoldSplit split = split_samples(data, config.splitting, config.seed);
  const FittedModels models = fit_fold_models(data, split, config, tau_tilde);

  PointEstimate est;
  est.split = split;
  est.diagnostics.tau_tilde = tau_tilde;
  est.diagnostics.fisher_hat = models.fisher;
  est.diagnostics.fisher_degenerate = models.degenerate;
  est.diagnostics.fold1_size = models.fold1;
  est.diagnostics.fold2_size = models.fold2;
  est.diagnostics.pi_used = pi_target;
  est.diagnostics.bandwidth_fold1 = models.m1.kernel().bandwidth;
  est.diagnostics.bandwidth_fold2 = models.m2.kernel().bandwidth;

  if (models.degenerate) {
    // estimated score identically zero: the one-step update vanishes and the
    // initial estimator is returned unchanged
    est.tau_hat = tau_tilde;
    est.z.z_hat.assign(data.size(), 0.0);
    est.z.model_fold_used.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      est.z.model_fold_used[i] = 3 - split.fold_of[i];
    return est;
  }

  est.z = transformed_outcomes(data, split, models.m1, models.m2, tau_tilde, models.fisher);

  if (!stratified) {
    double update = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      update += data.a[i] ? est.z.z_hat[i] / pi_target
                          : -est.z.z_hat[i] / (1.0 - pi_target);
    }
    est.tau_hat = tau_tilde + update / static_cast<double>(data.size());
  } else {
    const auto pi_nk = stratum_treated_fractions(data);
    const auto p_nk = stratum_proportions(data);
    const int k_count = data.stratum_count();
    std::vector<double> update(static_cast<std::size_t>(k_count), 0.0);
    std::vector<long> n_k(static_cast<std::size_t>(k_count), 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto k = static_cast<std::size_t>(data.strata[i]);
      if (!(pi_nk[k] > 0.0 && pi_nk[k] < 1.0))
        throw std::invalid_argument("stratum " + std::to_string(data.strata[i]) +
                                    " lacks units in one arm");
      update[k] += data.a[i] ? est.z.z_hat[i] / pi_nk[k]
                             : -est.z.z_hat[i] / (1.0 - pi_nk[k]);
      n_k[k] += 1;
    }
    double acc = tau_tilde;
    for (int k = 0; k < k_count; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      acc += p_nk[ks] * update[ks] / static_cast<double>(n_k[ks]);
    }
    est.tau_hat = acc;
  }
  return est;
}

// fold-specific variant: each fold gets its own initial estimate from the
// opposite fold's data and a one-step update over its own units; the two
// fold estimates are averaged
PointEstimate fold_averaged(const TrialData& data, const EstimatorConfig& config,
                            bool stratified) {
  data.validate();
  const FoldSplit split = split_samples(data, config.splitting, config.seed);
  const double pi_target =
      config.pi ? *config.pi
                : static_cast<double>(std::count(data.a.begin(), data.a.end(), 1)) /
                      static_cast<double>(data.size());

  TrialData fold_data[2];
  for (std::size_t i = 0; i < data.size(); ++i) {
    TrialData& fd = fold_data[split.fold_of[i] - 1];
    fd.y.push_back(data.y[i]);
    fd.a.push_back(data.a[i]);
    fd.strata.push_back(data.strata[i]);
  }
  const double tau_fold[2] = {initial_estimate(fold_data[0], config.initial),
                              initial_estimate(fold_data[1], config.initial)};
  const double tau_tilde = 0.5 * (tau_fold[0] + tau_fold[1]);
  const FittedModels models = fit_fold_models(data, split, config, tau_tilde);

  PointEstimate est;
  est.split = split;
  est.diagnostics.tau_tilde = tau_tilde;
  est.diagnostics.fisher_hat = models.fisher;
  est.diagnostics.fisher_degenerate = models.degenerate;
  est.diagnostics.fold1_size = models.fold1;
  est.diagnostics.fold2_size = models.fold2;
  est.diagnostics.pi_used = pi_target;
  est.diagnostics.bandwidth_fold1 = models.m1.kernel().bandwidth;
  est.diagnostics.bandwidth_fold2 = models.m2.kernel().bandwidth;
  est.z.z_hat.assign(data.size(), 0.0);
  est.z.model_fold_used.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    est.z.model_fold_used[i] = 3 - split.fold_of[i];
  if (models.degenerate) {
    est.tau_hat = tau_tilde;
    return est;
  }

  double fold_hat[2] = {0.0, 0.0};
  for (int j = 1; j <= 2; ++j) {
    const ScoreModel& m = j == 1 ? models.m2 : models.m1;  // opposite fold
    // the fold-specific initial estimate shifts the treated outcomes
    const double tj = tau_fold[j - 1];
    double update = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (split.fold_of[i] != j) continue;
      const double z = -m.score(data.y[i] - (data.a[i] ? tj : 0.0)) / models.fisher;
      est.z.z_hat[i] = z;
      update += data.a[i] ? z / pi_target : -z / (1.0 - pi_target);
      count += 1;
    }
    fold_hat[j - 1] = tj + (count ? update / static_cast<double>(count) : 0.0);
  }
  (void)stratified;  // fold-averaged form is defined for the unstratified update
  est.tau_hat = 0.5 * (fold_hat[0] + fold_hat[1]);
  return est;
}

}  // namespace

PointEstimate tdim(const TrialData& data, const EstimatorConfig& config) {
  if (config.fold_specific_initial) return fold_averaged(data, config, false);
  return one_step(data, config, false);
}

PointEstimate str(const TrialData& data, const EstimatorConfig& config) {
  return one_step(data, config, true);
}

}  // namespace carht
