#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "carht/estimators.hpp"
#include "carht/rng.hpp"

using namespace carht;

namespace {

TrialData two_arm(std::vector<double> treated, std::vector<double> control) {
  TrialData d;
  for (double y : treated) {
    d.y.push_back(y);
    d.a.push_back(1);
    d.strata.push_back(0);
  }
  for (double y : control) {
    d.y.push_back(y);
    d.a.push_back(0);
    d.strata.push_back(0);
  }
  return d;
}

// balanced synthetic trial: K strata, per-stratum shift, exact 50/50 arms
TrialData synthetic_trial(std::size_t n, int k_count, double tau, std::uint64_t seed) {
  TrialData d;
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % static_cast<std::size_t>(k_count));
    const int a = static_cast<int>(i / static_cast<std::size_t>(k_count)) % 2;
    const double y0 = 0.5 * k + sample_normal(rng);
    d.y.push_back(a ? y0 + tau : y0);
    d.a.push_back(static_cast<std::uint8_t>(a));
    d.strata.push_back(k);
  }
  return d;
}

const TruncationThresholds kWide{1e6, 1e6, 1e-12, 1e6};
const TruncationThresholds kZeroScore{0.0, 0.0, 1e-12, 1e6};

}  // namespace

TEST_CASE("difference in medians") {
  CHECK(diff_in_medians(two_arm({1, 2, 3}, {0, 1, 2})) == doctest::Approx(1.0));
  CHECK(diff_in_medians(two_arm({5, 6, 7}, {5, 6, 7})) == doctest::Approx(0.0));
  CHECK(diff_in_medians(two_arm({0, 2}, {0, 0})) == doctest::Approx(1.0));
  TrialData empty_arm = two_arm({1.0}, {});
  CHECK_THROWS(diff_in_medians(empty_arm));
}

TEST_CASE("weighted median cumulative-weight rule") {
  CHECK(weighted_median({1, 5}, {3, 1}) == doctest::Approx(1.0));
  // exactly half the weight at the first value: midpoint with the next
  CHECK(weighted_median({1, 5}, {1, 1}) == doctest::Approx(3.0));
  CHECK(weighted_median({4, 2, 6}, {1, 1, 1}) == doctest::Approx(4.0));
  CHECK_THROWS(weighted_median({}, {}));
  CHECK_THROWS(weighted_median({1.0}, {-1.0}));
}

TEST_CASE("weighted diff reduces to plain diff with a single stratum") {
  const TrialData d = two_arm({1, 2, 3, 9}, {0, 1, 2});
  CHECK(diff_in_weighted_medians(d) == doctest::Approx(diff_in_medians(d)));
  const TrialData same = two_arm({5, 6, 7}, {5, 6, 7});
  CHECK(diff_in_weighted_medians(same) == doctest::Approx(0.0));
}

TEST_CASE("weighted diff with hand-built weights") {
  // one treated stratum-0 unit at 1 with pi_n0 = 1/4 -> weight 4;
  // one at 5 in stratum 1 with pi_n1 = 3/4 -> weight 4/3
  TrialData d;
  d.y = {1, 5, 0, 0, 0, 2, 2, 2};
  d.a = {1, 1, 0, 0, 0, 0, 1, 1};
  d.strata = {0, 1, 0, 0, 0, 1, 1, 1};
  const auto pi_nk = stratum_treated_fractions(d);
  CHECK(pi_nk[0] == doctest::Approx(0.25));
  CHECK(pi_nk[1] == doctest::Approx(0.75));
  CHECK_NOTHROW(diff_in_weighted_medians(d, pi_nk));
}

TEST_CASE("stratified difference in medians") {
  const TrialData single = two_arm({1, 2, 3}, {0, 1, 2});
  CHECK(stratified_diff_in_medians(single) == doctest::Approx(diff_in_medians(single)));

  TrialData d;
  // stratum 0 gap 1, stratum 1 gap 3, equal sizes
  d.y = {1, 0, 4, 1, 1, 0, 4, 1};
  d.a = {1, 0, 1, 0, 1, 0, 1, 0};
  d.strata = {0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(stratified_diff_in_medians(d) == doctest::Approx(2.0));

  TrialData missing;
  missing.y = {1, 2, 3};
  missing.a = {1, 0, 1};
  missing.strata = {0, 0, 1};
  CHECK_THROWS_WITH_AS(stratified_diff_in_medians(missing),
                       doctest::Contains("stratum 1"), std::invalid_argument);
}

TEST_CASE("difference in means comparators") {
  CHECK(naive_dim(two_arm({2, 4}, {1, 1})) == doctest::Approx(2.0));
  const TrialData single = two_arm({2, 4, 9}, {1, 1});
  CHECK(stratified_dim(single) == doctest::Approx(naive_dim(single)));
}

TEST_CASE("shift equivariance of median-based estimators") {
  TrialData d = synthetic_trial(120, 3, 0.7, 5);
  const double md0 = diff_in_medians(d);
  const double wt0 = diff_in_weighted_medians(d);
  const double st0 = stratified_diff_in_medians(d);
  const double c = 2.25;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.a[i]) d.y[i] += c;
  CHECK(diff_in_medians(d) == doctest::Approx(md0 + c).epsilon(1e-12));
  CHECK(diff_in_weighted_medians(d) == doctest::Approx(wt0 + c).epsilon(1e-12));
  CHECK(stratified_diff_in_medians(d) == doctest::Approx(st0 + c).epsilon(1e-12));
}

TEST_CASE("sample splitting cell sizes") {
  TrialData d;
  // stratum 0 arm 1: 5 units; stratum 0 arm 0: 4 units
  d.y.assign(9, 0.0);
  d.a = {1, 1, 1, 1, 1, 0, 0, 0, 0};
  d.strata.assign(9, 0);
  const FoldSplit s = split_samples(d, SplitMode::kCAR, 3);
  int f1_t = 0, f1_c = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (s.fold_of[i] == 1) (d.a[i] ? f1_t : f1_c) += 1;
    CHECK((s.fold_of[i] == 1 || s.fold_of[i] == 2));
  }
  CHECK(f1_t == 2);  // floor(5/2)
  CHECK(f1_c == 2);  // floor(4/2)

  TrialData odd = synthetic_trial(101, 1, 0.0, 4);
  const FoldSplit sr = split_samples(odd, SplitMode::kSR, 3);
  const long in_f1 = std::count(sr.fold_of.begin(), sr.fold_of.end(), 1);
  CHECK(in_f1 == 50);
}

TEST_CASE("transformed outcomes follow the cross-fit formula") {
  TrialData d;
  d.y = {-1.0, 0.5, 2.0, -0.5};
  d.a = {0, 0, 1, 1};
  d.strata = {0, 0, 0, 0};
  FoldSplit split{{1, 2, 1, 2}};
  // sample {0}, gaussian sd 1, wide thresholds: score(y) = -y exactly
  ScoreModel m1({0.0}, {KernelKind::kGaussian, 1.0}, kWide);
  ScoreModel m2({0.0}, {KernelKind::kGaussian, 1.0}, kWide);
  const double tau_tilde = 1.0, fisher = 2.0;
  const auto z = transformed_outcomes(d, split, m1, m2, tau_tilde, fisher);
  // control: z = -score(y)/I = y/I
  CHECK(z.z_hat[0] == doctest::Approx(-0.5));
  CHECK(z.z_hat[1] == doctest::Approx(0.25));
  // treated: argument shifted by tau_tilde
  CHECK(z.z_hat[2] == doctest::Approx(0.5));
  CHECK(z.z_hat[3] == doctest::Approx(-0.75));
  // cross-fit discipline: fold-1 units evaluated with the fold-2 model
  CHECK(z.model_fold_used[0] == 2);
  CHECK(z.model_fold_used[1] == 1);
  CHECK(z.model_fold_used[2] == 2);
  CHECK(z.model_fold_used[3] == 1);
  CHECK_THROWS(transformed_outcomes(d, split, m1, m2, 0.0, 0.0));
}

TEST_CASE("zero score collapses the one-step update to the initial estimator") {
  const TrialData d = synthetic_trial(200, 2, 0.3, 9);
  EstimatorConfig cfg;
  cfg.pi = 0.5;
  cfg.seed = 1;
  cfg.thresholds = kZeroScore;
  const PointEstimate t = tdim(d, cfg);
  CHECK(t.diagnostics.fisher_degenerate);
  CHECK(t.tau_hat == doctest::Approx(diff_in_weighted_medians(d)).epsilon(1e-12));
  const PointEstimate s = str(d, cfg);
  CHECK(s.tau_hat == doctest::Approx(diff_in_weighted_medians(d)).epsilon(1e-12));
}

TEST_CASE("single stratum with matching pi makes str equal tdim") {
  const TrialData d = synthetic_trial(400, 1, 0.2, 12);  // exactly balanced arms
  EstimatorConfig cfg;
  cfg.pi = 0.5;
  cfg.seed = 8;
  const PointEstimate t = tdim(d, cfg);
  const PointEstimate s = str(d, cfg);
  CHECK(s.tau_hat == doctest::Approx(t.tau_hat).epsilon(1e-12));
}

TEST_CASE("cross-fit discipline holds in the full pipeline") {
  const TrialData d = synthetic_trial(300, 3, 0.0, 15);
  EstimatorConfig cfg;
  cfg.pi = 0.5;
  cfg.seed = 2;
  const PointEstimate t = tdim(d, cfg);
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(t.z.model_fold_used[i] == 3 - t.split.fold_of[i]);
}

TEST_CASE("estimates are deterministic and near the truth") {
  const double tau = 0.8;
  const TrialData d = synthetic_trial(1000, 4, tau, 33);
  EstimatorConfig cfg;
  cfg.pi = 0.5;
  cfg.seed = 44;
  const PointEstimate a = tdim(d, cfg);
  const PointEstimate b = tdim(d, cfg);
  CHECK(a.tau_hat == b.tau_hat);
  CHECK(a.diagnostics.fisher_hat == b.diagnostics.fisher_hat);
  CHECK(a.tau_hat == doctest::Approx(tau).epsilon(1).scale(0.25));
  const PointEstimate s = str(d, cfg);
  CHECK(s.tau_hat == doctest::Approx(tau).epsilon(1).scale(0.25));
}

TEST_CASE("transformed outcomes respect the score cap") {
  const TrialData d = synthetic_trial(600, 2, 0.0, 51);
  EstimatorConfig cfg;
  cfg.pi = 0.5;
  cfg.seed = 3;
  const PointEstimate t = tdim(d, cfg);
  REQUIRE(!t.diagnostics.fisher_degenerate);
  // |Z| <= c / I by construction; both folds share the c cap rule
  double c_cap = 0.0;
  for (double y : d.y) c_cap = std::max(c_cap, std::abs(y));
  for (double z : t.z.z_hat)
    CHECK(std::abs(z) <= 1e6);  // finite
  const double bound =
      std::max(t.diagnostics.bandwidth_fold1, t.diagnostics.bandwidth_fold2);
  CHECK(bound > 0.0);
}

TEST_CASE("fold-averaged variant stays close to the one-step estimate") {
  const TrialData d = synthetic_trial(1000, 2, 0.5, 71);
  EstimatorConfig cfg;
  cfg.pi = 0.5;
  cfg.seed = 6;
  const double one_step = tdim(d, cfg).tau_hat;
  cfg.fold_specific_initial = true;
  const double averaged = tdim(d, cfg).tau_hat;
  CHECK(averaged == doctest::Approx(one_step).epsilon(1).scale(0.2));
}

TEST_CASE("pooled score fitting uses shifted treated outcomes") {
  const TrialData d = synthetic_trial(800, 2, 1.5, 81);
  EstimatorConfig cfg;
  cfg.pi = 0.5;
  cfg.seed = 13;
  cfg.fit_arm = ScoreFitArm::kPooled;
  const PointEstimate t = tdim(d, cfg);
  CHECK(t.tau_hat == doctest::Approx(1.5).epsilon(1).scale(0.25));
  CHECK(!t.diagnostics.fisher_degenerate);
}

TEST_CASE("data validation") {
  TrialData d;
  d.y = {1.0, 2.0};
  d.a = {1};
  d.strata = {0, 0};
  CHECK_THROWS(d.validate());
  d.a = {1, 2};
  CHECK_THROWS(d.validate());
  d.a = {1, 0};
  CHECK_NOTHROW(d.validate());
}
