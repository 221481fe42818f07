#include "carht/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace carht {

namespace {

constexpr std::uint64_t kGenStream = 0xdadaULL;
constexpr std::uint64_t kAssignStream = 0xa551ULL;
constexpr std::uint64_t kSplitStream = 0x5b17ULL;
constexpr std::uint64_t kRetryStream = 0x4e547259ULL;
constexpr std::uint64_t kBootStream = 0xb007ULL;
constexpr int kMaxRetries = 5;

const double kX2Values[4] = {-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0};

}  // namespace

std::string tail_name(Tail t) {
  switch (t) {
    case Tail::kNormal: return "normal";
    case Tail::kLaplace: return "laplace";
    case Tail::kCauchy: return "cauchy";
  }
  throw std::invalid_argument("unknown tail");
}

Tail tail_from_name(const std::string& name) {
  if (name == "normal") return Tail::kNormal;
  if (name == "laplace") return Tail::kLaplace;
  if (name == "cauchy") return Tail::kCauchy;
  throw std::invalid_argument("unknown tail distribution: " + name);
}

std::string estimator_name(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::kDiffMedians: return "diff-medians";
    case EstimatorKind::kDiffWeightedMedians: return "diff-weighted-medians";
    case EstimatorKind::kStratifiedDiffMedians: return "stratified-diff-medians";
    case EstimatorKind::kNaiveDim: return "naive-dim";
    case EstimatorKind::kStratifiedDim: return "stratified-dim";
    case EstimatorKind::kTdim: return "tdim";
    case EstimatorKind::kStr: return "str";
  }
  throw std::invalid_argument("unknown estimator");
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "diff-medians" || name == "md") return EstimatorKind::kDiffMedians;
  if (name == "diff-weighted-medians" || name == "wt-md")
    return EstimatorKind::kDiffWeightedMedians;
  if (name == "stratified-diff-medians" || name == "str-md")
    return EstimatorKind::kStratifiedDiffMedians;
  if (name == "naive-dim" || name == "dim") return EstimatorKind::kNaiveDim;
  if (name == "stratified-dim" || name == "str-dim") return EstimatorKind::kStratifiedDim;
  if (name == "tdim") return EstimatorKind::kTdim;
  if (name == "str") return EstimatorKind::kStr;
  throw std::invalid_argument("unknown estimator: " + name);
}

void OutcomeModelSpec::validate() const {
  if (model_id < 1 || model_id > 3) throw std::invalid_argument("model_id must be 1, 2, or 3");
  if (!(pi > 0.0 && pi < 1.0)) throw std::invalid_argument("pi must lie in (0,1)");
  if (n < 16) throw std::invalid_argument("n too small to populate stratum cells");
}

void SimConfig::validate() const {
  outcome.validate();
  design.validate();
  if (reps < 1) throw std::invalid_argument("reps must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
  if (estimators.empty()) throw std::invalid_argument("no estimators requested");
}

PotentialOutcomes generate(const OutcomeModelSpec& spec, Rng& rng) {
  spec.validate();
  PotentialOutcomes out;
  out.y0.resize(spec.n);
  out.y1.resize(spec.n);
  out.strata.resize(spec.n);
  out.min_factors.resize(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double u = 2.0 * rng.uniform() - 1.0;
    const int s = static_cast<int>(rng.below(4));
    const double x2 = kX2Values[s];
    double eps;
    switch (spec.tail) {
      case Tail::kNormal: eps = sample_normal(rng); break;
      case Tail::kLaplace: eps = sample_laplace(rng); break;
      default: eps = sample_cauchy(rng); break;
    }
    double y0;
    int f1;
    if (spec.model_id == 1) {
      y0 = 0.75 * u + x2 + eps;
      f1 = u > 0.0 ? 1 : 0;
    } else if (spec.model_id == 2) {
      const double z = 0.75 * u + x2;
      y0 = 0.5 * (std::exp(z) + std::exp(0.5 * z)) + eps;
      f1 = u > 0.0 ? 1 : 0;
    } else {
      const double x1 = std::exp(u);
      const double z = x1 * (1.0 + x2);
      if (z < 0.0) throw std::logic_error("negative argument in model 3");
      y0 = 0.5 * (z + std::sqrt(z)) + eps;
      f1 = x1 > 1.0 ? 1 : 0;  // split at the median of e^u
    }
    out.y0[i] = y0;
    out.y1[i] = y0 + spec.tau;
    out.strata[i] = s;
    out.min_factors[i] = {f1, x2 > 0.0 ? 1 : 0};
  }
  return out;
}

namespace {

std::vector<RepRecord> analyze_dataset(const TrialData& data, const DesignConfig& design,
                                       const std::vector<EstimatorKind>& kinds,
                                       EstimatorConfig ec, double pi, double alpha,
                                       double true_tau) {
  std::vector<RepRecord> records;
  records.reserve(kinds.size());
  const auto q_k = q_for_design(design, pi, data.stratum_count());
  for (EstimatorKind kind : kinds) {
    RepRecord r;
    switch (kind) {
      case EstimatorKind::kDiffMedians: r.tau_hat = diff_in_medians(data); break;
      case EstimatorKind::kDiffWeightedMedians:
        r.tau_hat = diff_in_weighted_medians(data);
        break;
      case EstimatorKind::kStratifiedDiffMedians:
        r.tau_hat = stratified_diff_in_medians(data);
        break;
      case EstimatorKind::kNaiveDim: r.tau_hat = naive_dim(data); break;
      case EstimatorKind::kStratifiedDim: r.tau_hat = stratified_dim(data); break;
      case EstimatorKind::kTdim:
      case EstimatorKind::kStr: {
        const PointEstimate pe =
            kind == EstimatorKind::kTdim ? tdim(data, ec) : str(data, ec);
        r.tau_hat = pe.tau_hat;
        const auto vc = variance_components(pe.z, data, pi, q_k);
        bool have_var = true;
        double sigma2 = 0.0;
        if (kind == EstimatorKind::kTdim) {
          if (q_k) {
            sigma2 = variance_tdim(vc);
          } else {
            have_var = false;
            r.note =
                "variance not universally applicable under minimization; "
                "use the stratified estimator";
          }
        } else {
          sigma2 = variance_str(vc);
        }
        if (have_var) {
          const auto report = wald_ci(pe.tau_hat, sigma2, data.size(), alpha);
          r.sigma2 = sigma2;
          r.se = report.se;
          r.covers = report.ci_lo <= true_tau && true_tau <= report.ci_hi;
          r.length = report.ci_hi - report.ci_lo;
        }
        if (pe.diagnostics.fisher_hat > 0.0)
          r.conservative = variance_conservative(pe.diagnostics.fisher_hat, pi);
        break;
      }
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace

ReplicationOutput run_replication(const SimConfig& config, std::uint64_t rep_seed) {
  config.validate();
  std::string last_error;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    const std::uint64_t seed =
        attempt == 0 ? rep_seed
                     : derive_seed(rep_seed, kRetryStream + static_cast<std::uint64_t>(attempt));
    try {
      Rng gen(derive_seed(seed, kGenStream));
      const PotentialOutcomes po = generate(config.outcome, gen);

      DesignConfig design = config.design;
      design.seed = derive_seed(seed, kAssignStream);
      const AssignmentVector a = assign(design, po.strata, po.min_factors);

      TrialData data;
      data.a = a;
      data.strata = po.strata;
      data.covariates = po.min_factors;
      data.y.resize(po.y0.size());
      for (std::size_t i = 0; i < data.y.size(); ++i)
        data.y[i] = a[i] ? po.y1[i] : po.y0[i];

      EstimatorConfig ec = config.estimator_config;
      if (!ec.pi) ec.pi = config.outcome.pi;
      ec.seed = derive_seed(seed, kSplitStream);

      ReplicationOutput out;
      out.retries = attempt;
      out.per_estimator = analyze_dataset(data, design, config.estimators, ec,
                                          config.outcome.pi, config.alpha,
                                          config.outcome.tau);
      return out;
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  throw std::runtime_error("replication failed after " + std::to_string(kMaxRetries) +
                           " retries: " + last_error);
}

SimResult aggregate(const std::vector<ReplicationOutput>& outputs,
                    const std::vector<EstimatorKind>& kinds, double true_tau) {
  if (outputs.size() < 2) throw std::invalid_argument("aggregate needs >= 2 replications");
  SimResult result;
  result.reps = outputs.size();
  for (const auto& o : outputs) result.total_retries += o.retries;
  const double r = static_cast<double>(outputs.size());

  for (std::size_t e = 0; e < kinds.size(); ++e) {
    EstimatorSummary s;
    s.name = estimator_name(kinds[e]);
    double mean = 0.0;
    for (const auto& o : outputs) mean += o.per_estimator[e].tau_hat;
    mean /= r;
    double ss = 0.0;
    for (const auto& o : outputs) {
      const double d = o.per_estimator[e].tau_hat - mean;
      ss += d * d;
    }
    s.bias = mean - true_tau;
    s.sd = std::sqrt(ss / (r - 1.0));
    s.rmse = std::sqrt(s.bias * s.bias + ss / r);

    double se_sum = 0.0, cp_sum = 0.0, len_sum = 0.0, s2_sum = 0.0, cons_sum = 0.0;
    std::size_t n_ci = 0, n_cons = 0;
    for (const auto& o : outputs) {
      const RepRecord& rec = o.per_estimator[e];
      if (rec.se) {
        se_sum += *rec.se;
        cp_sum += *rec.covers ? 1.0 : 0.0;
        len_sum += *rec.length;
        s2_sum += *rec.sigma2;
        n_ci += 1;
      }
      if (rec.note.size() > s.note.size()) s.note = rec.note;
      if (rec.conservative) {
        cons_sum += *rec.conservative;
        n_cons += 1;
      }
    }
    if (n_ci == outputs.size()) {
      s.se = se_sum / r;
      s.cp = cp_sum / r;
      s.length = len_sum / r;
      s.mean_sigma2 = s2_sum / r;
    }
    if (n_cons == outputs.size()) s.mean_conservative = cons_sum / r;
    result.estimators.push_back(std::move(s));
  }
  return result;
}

namespace {

// deterministic worker pool over replication indices; each replication's seed
// is derived from (master_seed, rep index), so results are independent of
// thread count and completion order
template <typename Fn>
std::vector<ReplicationOutput> run_reps(std::size_t reps, int threads, Fn&& one_rep) {
  std::vector<ReplicationOutput> outputs(reps);
  const int n_threads = std::max(1, threads);
  if (n_threads == 1) {
    for (std::size_t rep = 0; rep < reps; ++rep) outputs[rep] = one_rep(rep);
    return outputs;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        const std::size_t rep = next.fetch_add(1);
        if (rep >= reps) break;
        try {
          outputs[rep] = one_rep(rep);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!failed.exchange(true)) first_error = e.what();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed) throw std::runtime_error(first_error);
  return outputs;
}

}  // namespace

SimResult run_simulation(const SimConfig& config) {
  config.validate();
  const auto outputs = run_reps(config.reps, config.threads, [&](std::size_t rep) {
    return run_replication(config, derive_seed(config.master_seed, rep));
  });
  return aggregate(outputs, config.estimators, config.outcome.tau);
}

SimResult synthetic_resample(const TrialData& real_data, double tau_hat_assumed,
                             const DesignConfig& design,
                             const std::vector<EstimatorKind>& kinds, std::size_t reps,
                             double alpha, std::uint64_t seed, int threads) {
  real_data.validate();
  if (reps < 2) throw std::invalid_argument("reps must be >= 2");
  const std::size_t n = real_data.size();
  // imputed potential outcomes under a constant shift
  std::vector<double> y0(n), y1(n);
  for (std::size_t i = 0; i < n; ++i) {
    y0[i] = real_data.a[i] ? real_data.y[i] - tau_hat_assumed : real_data.y[i];
    y1[i] = y0[i] + tau_hat_assumed;
  }

  auto one_rep = [&](std::size_t rep) {
    const std::uint64_t rep_seed = derive_seed(seed, rep);
    std::string last_error;
    for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
      const std::uint64_t s =
          attempt == 0
              ? rep_seed
              : derive_seed(rep_seed, kRetryStream + static_cast<std::uint64_t>(attempt));
      try {
        Rng boot(derive_seed(s, kBootStream));
        TrialData data;
        data.y.resize(n);
        data.strata.resize(n);
        std::vector<double> by0(n), by1(n);
        const bool has_cov = !real_data.covariates.empty();
        if (has_cov) data.covariates.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t pick = static_cast<std::size_t>(boot.below(n));
          by0[i] = y0[pick];
          by1[i] = y1[pick];
          data.strata[i] = real_data.strata[pick];
          if (has_cov) data.covariates[i] = real_data.covariates[pick];
        }
        DesignConfig d = design;
        d.seed = derive_seed(s, kAssignStream);
        data.a = assign(d, data.strata, data.covariates);
        for (std::size_t i = 0; i < n; ++i) data.y[i] = data.a[i] ? by1[i] : by0[i];

        EstimatorConfig ec;
        ec.pi = design.pi;
        ec.seed = derive_seed(s, kSplitStream);
        ReplicationOutput out;
        out.retries = attempt;
        out.per_estimator =
            analyze_dataset(data, d, kinds, ec, design.pi, alpha, tau_hat_assumed);
        return out;
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    throw std::runtime_error("resample replication failed after " +
                             std::to_string(kMaxRetries) + " retries: " + last_error);
  };

  const auto outputs = run_reps(reps, threads, one_rep);
  return aggregate(outputs, kinds, tau_hat_assumed);
}

}  // namespace carht
