#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "carht/rng.hpp"
#include "carht/score.hpp"

using namespace carht;

namespace {

const TruncationThresholds kWide{1e6, 1e6, 1e-12, 1e6};

std::vector<double> normal_draws(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = sample_normal(rng);
  return v;
}

}  // namespace

TEST_CASE("density matches single-point kernel values") {
  ScoreModel gauss({0.0}, {KernelKind::kGaussian, 1.0}, kWide);
  CHECK(gauss.density(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));
  CHECK(gauss.density(1.0) == doctest::Approx(0.24197072451914337).epsilon(1e-12));

  ScoreModel tri({0.0}, {KernelKind::kTriweight, 1.0}, kWide);
  CHECK(tri.density(2.0) == doctest::Approx(0.0));
  CHECK(tri.density(0.0) == doctest::Approx(35.0 / 32.0).epsilon(1e-12));

  ScoreModel two({-1.0, 1.0}, {KernelKind::kGaussian, 1.0}, kWide);
  CHECK(two.density(0.0) == doctest::Approx(0.24197072451914337).epsilon(1e-12));
}

TEST_CASE("analytic derivatives of the gaussian kernel") {
  ScoreModel gauss({0.0}, {KernelKind::kGaussian, 1.0}, kWide);
  CHECK(gauss.density_deriv(0.0) == doctest::Approx(0.0));
  CHECK(gauss.density_deriv(1.0) == doctest::Approx(-0.24197072451914337).epsilon(1e-12));
  CHECK(gauss.density_deriv2(0.0) == doctest::Approx(-0.3989422804014327).epsilon(1e-12));
}

TEST_CASE("density derivative matches finite differences") {
  const auto sample = normal_draws(400, 11);
  for (KernelKind kind : {KernelKind::kGaussian, KernelKind::kTriweight}) {
    ScoreModel m(sample, {kind, 0.7}, kWide);
    Rng rng(5);
    const double eps = 1e-6;
    for (int i = 0; i < 100; ++i) {
      const double y = 6.0 * rng.uniform() - 3.0;
      const double fd = (m.density(y + eps) - m.density(y - eps)) / (2.0 * eps);
      const double an = m.density_deriv(y);
      if (std::abs(an) > 1e-8) {
        CHECK(std::abs(fd - an) / std::abs(an) < 1e-5);
      } else {
        CHECK(std::abs(fd - an) < 1e-8);
      }
    }
  }
}

TEST_CASE("gaussian kernel density integrates to one") {
  const auto sample = normal_draws(300, 21);
  ScoreModel m(sample, {KernelKind::kGaussian, 0.5}, kWide);
  const auto [mn, mx] = std::minmax_element(sample.begin(), sample.end());
  const double lo = *mn - 6.0 * 0.5, hi = *mx + 6.0 * 0.5;
  const int steps = 4000;
  const double dx = (hi - lo) / steps;
  double integral = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    integral += w * m.density(lo + i * dx) * dx;
  }
  CHECK(integral > 0.999);
  CHECK(integral < 1.001);
}

TEST_CASE("score truncation clauses") {
  const auto sample = normal_draws(500, 3);
  TruncationThresholds t{100.0, 2.0, 0.05, 1.5};
  ScoreModel m(sample, {KernelKind::kGaussian, 0.4}, t);
  CHECK(m.score(5.0) == doctest::Approx(0.0));    // |y| > e
  CHECK(m.score(-1.6) == doctest::Approx(0.0));   // |y| > e
  CHECK(m.score_deriv(5.0) == doctest::Approx(0.0));
  // density floor: thresholds with huge d zero the score everywhere
  TruncationThresholds high_floor{100.0, 2.0, 10.0, 10.0};
  ScoreModel m2(sample, {KernelKind::kGaussian, 0.4}, high_floor);
  for (double y : {-1.0, 0.0, 0.7}) CHECK(m2.score(y) == doctest::Approx(0.0));
  // hard cap |score| <= c everywhere
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const double y = 8.0 * rng.uniform() - 4.0;
    CHECK(std::abs(m.score(y)) <= t.c + 1e-12);
  }
}

TEST_CASE("fitted score approximates the normal score") {
  const auto sample = normal_draws(4000, 17);
  const ScoreModel m = fit_score(sample, KernelKind::kTriweight);
  CHECK(m.score(1.0) == doctest::Approx(-1.0).epsilon(0.15));
  CHECK(m.score(-1.0) == doctest::Approx(1.0).epsilon(0.15));
  // the pointwise second derivative needs more smoothing than the score
  // itself; evaluate it at a wider bandwidth
  const ScoreModel wide = fit_score(sample, KernelKind::kTriweight, m.thresholds(), 1.2);
  CHECK(wide.score_deriv(0.0) == doctest::Approx(-1.0).epsilon(0.25));
}

TEST_CASE("single-point gaussian model has unit negative score derivative") {
  ScoreModel m({0.0}, {KernelKind::kGaussian, 1.0}, kWide);
  CHECK(m.score_deriv(0.0) == doctest::Approx(-1.0).epsilon(1e-10));
}

TEST_CASE("fit_score validates and is order-invariant") {
  CHECK_THROWS(fit_score({1.0, 2.0, 3.0}, KernelKind::kTriweight));

  auto sample = normal_draws(200, 31);
  const ScoreModel m1 = fit_score(sample, KernelKind::kTriweight);
  std::reverse(sample.begin(), sample.end());
  const ScoreModel m2 = fit_score(sample, KernelKind::kTriweight);
  for (double y : {-2.0, -0.5, 0.0, 0.3, 1.7}) {
    CHECK(m1.density(y) == m2.density(y));
    CHECK(m1.score(y) == m2.score(y));
  }

  TruncationThresholds t{3.0, 1.5, 0.01, 4.0};
  const ScoreModel m3 = fit_score(sample, KernelKind::kGaussian, t, 0.5);
  CHECK(m3.thresholds().b == 3.0);
  CHECK(m3.thresholds().c == 1.5);
  CHECK(m3.thresholds().d == 0.01);
  CHECK(m3.thresholds().e == 4.0);
  CHECK(m3.kernel().bandwidth == 0.5);
}

TEST_CASE("rate validation clauses") {
  // e * sigma^-5 = 10 * 0.3^-5 ~ 4115 > 1000: growth clause fails
  RateReport r1 = validate_rates(1000, {1.0, 1.0, 0.001, 10.0}, 0.3);
  CHECK_FALSE(r1.growth_ok);
  CHECK_FALSE(r1.ok);
  CHECK(!r1.message.empty());
  // e * sigma^-5 = 5 * 32 = 160 < 1000: growth clause passes
  RateReport r2 = validate_rates(1000, {0.25, 0.5, 0.001, 5.0}, 0.5);
  CHECK(r2.growth_ok);
  CHECK(r2.bandwidth_cap_ok);  // 0.5 * 0.5 = 0.25 < 0.5
  CHECK(r2.ok);
  // degenerate score cap
  RateReport r3 = validate_rates(1000, {1.0, 0.0, 0.001, 5.0}, 0.5);
  CHECK(r3.degenerate_score);
  CHECK_FALSE(r3.ok);
}

TEST_CASE("fisher information estimators") {
  CHECK(fisher_info_hat({1.0, -1.0}) == doctest::Approx(1.0));
  CHECK(fisher_info_hat({0.0, 0.0, 0.0}) == doctest::Approx(0.0));
  CHECK_THROWS(fisher_info_hat({}));

  ScoreModel m({0.0}, {KernelKind::kGaussian, 1.0}, kWide);
  CHECK(fisher_info_alt(m, {0.0}) == doctest::Approx(1.0).epsilon(1e-10));

  // all points outside the domain contribute zero
  TruncationThresholds tiny_domain{1e6, 1e6, 1e-12, 0.001};
  ScoreModel m2({0.0}, {KernelKind::kGaussian, 1.0}, tiny_domain);
  CHECK(fisher_info_alt(m2, {2.0, 3.0}) == doctest::Approx(0.0));
}

TEST_CASE("alt fisher estimator is close on laplace data") {
  Rng rng(77);
  std::vector<double> sample(2000);
  for (auto& x : sample) x = sample_laplace(rng);
  const ScoreModel m = fit_score(sample, KernelKind::kTriweight);
  const double info = fisher_info_alt(m, sample);
  CHECK(info == doctest::Approx(1.0).epsilon(0.25));
}

TEST_CASE("fisher estimate is translation-equivariant with shifted thresholds") {
  const auto sample = normal_draws(800, 41);
  const ScoreModel m = fit_score(sample, KernelKind::kTriweight);
  const double shift = 37.5;
  std::vector<double> shifted = sample;
  for (auto& x : shifted) x += shift;
  // same bandwidth, same caps; the domain window follows the data
  TruncationThresholds t = m.thresholds();
  const double lo = -t.e + shift, hi = t.e + shift;
  TruncationThresholds ts = t;
  ts.e = std::max(std::abs(lo), std::abs(hi));
  const ScoreModel ms = fit_score(shifted, KernelKind::kTriweight, ts,
                                  m.kernel().bandwidth);
  std::vector<double> g, gs;
  for (double y : sample) {
    if (std::abs(y) > t.e) continue;  // stay inside both windows
    g.push_back(m.score(y));
    gs.push_back(ms.score(y + shift));
  }
  CHECK(fisher_info_hat(g) == doctest::Approx(fisher_info_hat(gs)).epsilon(1e-10));
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(ScoreModel({}, {KernelKind::kGaussian, 1.0}, kWide), std::invalid_argument);
  CHECK_THROWS(ScoreModel({0.0}, {KernelKind::kGaussian, 0.0}, kWide));
}
