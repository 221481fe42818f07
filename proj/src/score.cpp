#include "carht/score.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace carht {

namespace {

constexpr double kTriweightPeak = 35.0 / 32.0;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

// quantile with linear interpolation on the sorted sample
double quantile_sorted(const std::vector<double>& s, double p) {
  if (s.empty()) throw std::invalid_argument("quantile of empty sample");
  if (s.size() == 1) return s[0];
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= s.size()) return s.back();
  const double frac = pos - static_cast<double>(lo);
  return s[lo] + frac * (s[lo + 1] - s[lo]);
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// MAD-based scale of the central 98% quantile range
double robust_scale(const std::vector<double>& sorted) {
  const double q01 = quantile_sorted(sorted, 0.01);
  const double q99 = quantile_sorted(sorted, 0.99);
  std::vector<double> central;
  central.reserve(sorted.size());
  for (double v : sorted)
    if (v >= q01 && v <= q99) central.push_back(v);
  if (central.empty()) central = sorted;
  const double med = median_of(central);
  for (auto& v : central) v = std::abs(v - med);
  const double mad = median_of(std::move(central));
  return mad > 0 ? mad / 0.6745 : 0.0;
}

}  // namespace

double auto_bandwidth(const std::vector<double>& sample, KernelKind kind) {
  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());
  double scale = robust_scale(sorted);
  if (scale <= 0.0) {
    // degenerate (near-constant) sample; fall back to the full range
    scale = std::max(1e-8, (sorted.back() - sorted.front()) / 4.0);
  }
  const double m = static_cast<double>(sample.size());
  // support half-width for the triweight kernel
  const double h = 2.0 * scale * std::pow(m, -0.16);
  // a Gaussian kernel with sd h/3 smooths comparably to a triweight with
  // support half-width h (triweight sd = h/3)
  return kind == KernelKind::kTriweight ? h : h / 3.0;
}

ScoreModel::ScoreModel(std::vector<double> sample, KernelSpec kernel,
                       TruncationThresholds thresholds)
    : sample_(std::move(sample)), kernel_(kernel), thresholds_(thresholds) {
  if (sample_.empty()) throw std::invalid_argument("no fitting data");
  if (!(kernel_.bandwidth > 0.0))
    throw std::invalid_argument("bandwidth must be positive");
  std::sort(sample_.begin(), sample_.end());
}

DensityEval ScoreModel::density_all(double y) const {
  const double h = kernel_.bandwidth;
  const double m = static_cast<double>(sample_.size());
  DensityEval out;
  if (kernel_.kind == KernelKind::kTriweight) {
    // only points with |y - Y_i| < h contribute; the sample is sorted
    const auto lo = std::lower_bound(sample_.begin(), sample_.end(), y - h);
    const auto hi = std::upper_bound(lo, sample_.end(), y + h);
    double k0 = 0.0, k1 = 0.0, k2 = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double u = (y - *it) / h;
      const double t = 1.0 - u * u;
      if (t <= 0.0) continue;
      k0 += t * t * t;
      k1 += -6.0 * u * t * t;
      k2 += -6.0 * t * t + 24.0 * u * u * t;
    }
    out.f = kTriweightPeak * k0 / (m * h);
    out.df = kTriweightPeak * k1 / (m * h * h);
    out.d2f = kTriweightPeak * k2 / (m * h * h * h);
  } else {
    double k0 = 0.0, k1 = 0.0, k2 = 0.0;
    for (double yi : sample_) {
      const double u = (y - yi) / h;
      const double phi = kInvSqrt2Pi * std::exp(-0.5 * u * u);
      k0 += phi;
      k1 += -u * phi;
      k2 += (u * u - 1.0) * phi;
    }
    out.f = k0 / (m * h);
    out.df = k1 / (m * h * h);
    out.d2f = k2 / (m * h * h * h);
  }
  return out;
}

double ScoreModel::density(double y) const { return density_all(y).f; }
double ScoreModel::density_deriv(double y) const { return density_all(y).df; }
double ScoreModel::density_deriv2(double y) const { return density_all(y).d2f; }

bool ScoreModel::in_domain(double y) const {
  if (std::abs(y) > thresholds_.e) return false;
  const DensityEval ev = density_all(y);
  return ev.f >= thresholds_.d && std::abs(ev.df) <= thresholds_.c * ev.f &&
         std::abs(ev.d2f) <= thresholds_.b * ev.f;
}

double ScoreModel::score(double y) const {
  if (std::abs(y) > thresholds_.e) return 0.0;
  const DensityEval ev = density_all(y);
  if (ev.f < thresholds_.d) return 0.0;
  if (std::abs(ev.df) > thresholds_.c * ev.f) return 0.0;
  if (std::abs(ev.d2f) > thresholds_.b * ev.f) return 0.0;
  return ev.df / ev.f;
}

double ScoreModel::score_deriv(double y) const {
  if (std::abs(y) > thresholds_.e) return 0.0;
  const DensityEval ev = density_all(y);
  if (ev.f < thresholds_.d) return 0.0;
  if (std::abs(ev.df) > thresholds_.c * ev.f) return 0.0;
  if (std::abs(ev.d2f) > thresholds_.b * ev.f) return 0.0;
  const double ratio = ev.df / ev.f;
  return ev.d2f / ev.f - ratio * ratio;
}

ScoreModel fit_score(const std::vector<double>& sample, KernelKind kind) {
  if (sample.size() < 20)
    throw std::invalid_argument("insufficient data for score estimation (need >= 20)");
  std::vector<double> sorted = sample;
  std::sort(sorted.begin(), sorted.end());

  const double h = auto_bandwidth(sample, kind);
  double scale = robust_scale(sorted);
  if (scale <= 0.0) scale = std::max(1e-8, (sorted.back() - sorted.front()) / 4.0);

  TruncationThresholds t;
  t.e = std::max(std::abs(quantile_sorted(sorted, 0.005)),
                 std::abs(quantile_sorted(sorted, 0.995)));
  if (t.e <= 0.0) t.e = 1.0;
  t.c = 5.0 / scale;
  t.b = t.c * t.c;
  // floor: whichever is larger, the global floor or ~3 overlapping kernel
  // bumps; keeps isolated outliers in heavy tails from leaking score noise
  const double m = static_cast<double>(sample.size());
  const double peak =
      (kind == KernelKind::kTriweight ? kTriweightPeak : kInvSqrt2Pi) / (m * h);
  t.d = std::max(0.01 / t.e, 3.0 * peak);
  return ScoreModel(sorted, KernelSpec{kind, h}, t);
}

ScoreModel fit_score(const std::vector<double>& sample, KernelKind kind,
                     const TruncationThresholds& thresholds, double bandwidth) {
  if (sample.size() < 20)
    throw std::invalid_argument("insufficient data for score estimation (need >= 20)");
  const double h = bandwidth > 0.0 ? bandwidth : auto_bandwidth(sample, kind);
  return ScoreModel(sample, KernelSpec{kind, h}, thresholds);
}

RateReport validate_rates(std::size_t n, const TruncationThresholds& t, double sigma) {
  RateReport r;
  r.bandwidth_cap_ok = sigma * t.c < 0.5;
  r.growth_ok = t.e * std::pow(sigma, -5.0) < static_cast<double>(n);
  r.positive_ok = sigma > 0.0 && sigma < 1.0 && t.d > 0.0 && t.d < 1.0;
  r.degenerate_score = t.c == 0.0;
  r.ok = r.bandwidth_cap_ok && r.growth_ok && r.positive_ok && !r.degenerate_score;

  std::ostringstream msg;
  msg << "sigma*c=" << sigma * t.c << (r.bandwidth_cap_ok ? " (<0.5 ok)" : " (>=0.5 FAIL)")
      << "; e*sigma^-5=" << t.e * std::pow(sigma, -5.0)
      << (r.growth_ok ? " (<n ok)" : " (>=n FAIL)") << "; sigma=" << sigma
      << ", d=" << t.d << (r.positive_ok ? " (ok)" : " (FAIL)");
  if (r.degenerate_score) msg << "; c=0: score identically zero";
  r.message = msg.str();
  return r;
}

double fisher_info_hat(const std::vector<double>& score_values_on_control) {
  if (score_values_on_control.empty())
    throw std::invalid_argument("fisher_info_hat needs score evaluations");
  double acc = 0.0;
  for (double g : score_values_on_control) acc += g * g;
  return acc / static_cast<double>(score_values_on_control.size());
}

double fisher_info_alt(const ScoreModel& model,
                       const std::vector<double>& control_outcomes_in_fold) {
  if (control_outcomes_in_fold.empty())
    throw std::invalid_argument("fisher_info_alt needs control outcomes");
  double acc = 0.0;
  for (double y : control_outcomes_in_fold) {
    if (!model.in_domain(y)) continue;
    const DensityEval ev = model.density_all(y);
    acc += (ev.f * ev.d2f - ev.df * ev.df) / (ev.f * ev.f);
  }
  return -acc / static_cast<double>(control_outcomes_in_fold.size());
}

}  // namespace carht
