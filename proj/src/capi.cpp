#include "carht.h"

#include <cstring>
#include <new>
#include <stdexcept>
#include <string>

#include "carht/io.hpp"

struct carht_dataset {
  carht::TrialData data;
};

namespace {

thread_local std::string g_last_error;

int set_error(int code, const char* what) {
  g_last_error = what != nullptr ? what : "unknown error";
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return CARHT_OK;
  } catch (const std::invalid_argument& e) {
    return set_error(CARHT_EINVAL, e.what());
  } catch (const std::bad_alloc& e) {
    return set_error(CARHT_ERUNTIME, e.what());
  } catch (const std::exception& e) {
    return set_error(CARHT_ERUNTIME, e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* carht_version(void) { return "1.0.0"; }

const char* carht_last_error(void) { return g_last_error.c_str(); }

int carht_dataset_load(const char* path, carht_dataset** out) {
  return guarded([&] {
    if (path == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    auto* ds = new carht_dataset{carht::load_dataset(path)};
    *out = ds;
  });
}

int carht_dataset_parse(const char* csv_text, carht_dataset** out) {
  return guarded([&] {
    if (csv_text == nullptr || out == nullptr)
      throw std::invalid_argument("null argument");
    auto* ds = new carht_dataset{carht::parse_dataset_csv(csv_text)};
    *out = ds;
  });
}

void carht_dataset_free(carht_dataset* data) { delete data; }

int carht_dataset_size(const carht_dataset* data, size_t* out) {
  return guarded([&] {
    if (data == nullptr || out == nullptr) throw std::invalid_argument("null argument");
    *out = data->data.size();
  });
}

int carht_dataset_stratum_count(const carht_dataset* data, int* out) {
  return guarded([&] {
    if (data == nullptr || out == nullptr) throw std::invalid_argument("null argument");
    *out = data->data.stratum_count();
  });
}

int carht_assign(const char* scheme, double pi, int block_size, double coin_p,
                 const double* weights, size_t n_weights, const int* strata,
                 const int* covariates, size_t n, unsigned long long seed,
                 unsigned char* out_assignments) {
  return guarded([&] {
    if (scheme == nullptr || strata == nullptr || out_assignments == nullptr)
      throw std::invalid_argument("null argument");
    carht::DesignConfig cfg;
    cfg.scheme = carht::scheme_from_name(scheme);
    cfg.pi = pi;
    cfg.block_size = block_size;
    cfg.coin_p = coin_p;
    cfg.seed = seed;
    if (weights != nullptr) cfg.weights.assign(weights, weights + n_weights);
    std::vector<int> s(strata, strata + n);
    std::vector<std::vector<int>> cov;
    if (covariates != nullptr && n_weights > 0) {
      cov.resize(n);
      for (size_t i = 0; i < n; ++i)
        cov[i].assign(covariates + i * n_weights, covariates + (i + 1) * n_weights);
    } else if (cfg.scheme == carht::Scheme::kPocockSimonMinimization) {
      throw std::invalid_argument("minimization requires covariates and weights");
    }
    const carht::AssignmentVector a = carht::assign(cfg, s, cov);
    for (size_t i = 0; i < n; ++i) out_assignments[i] = a[i];
  });
}

int carht_analyze(const carht_dataset* data, const char* config_json,
                  const char* format, char** out_text) {
  return guarded([&] {
    if (data == nullptr || config_json == nullptr || format == nullptr ||
        out_text == nullptr)
      throw std::invalid_argument("null argument");
    const carht::RunConfig cfg = carht::parse_run_config(config_json);
    const auto rows = carht::analyze(data->data, cfg);
    const std::string fmt(format);
    std::string text;
    if (fmt == "csv") text = carht::analysis_to_csv(rows);
    else if (fmt == "json") text = carht::analysis_to_json(rows);
    else throw std::invalid_argument("format must be \"csv\" or \"json\"");
    *out_text = dup_string(text);
  });
}

int carht_simulate(const char* config_json, long long reps_override,
                   long long seed_override, int threads_override,
                   const char* format, char** out_text) {
  return guarded([&] {
    if (config_json == nullptr || format == nullptr || out_text == nullptr)
      throw std::invalid_argument("null argument");
    carht::SimConfig cfg = carht::parse_sim_config(config_json);
    if (reps_override > 0) cfg.reps = static_cast<std::size_t>(reps_override);
    if (seed_override >= 0) cfg.master_seed = static_cast<std::uint64_t>(seed_override);
    if (threads_override > 0) cfg.threads = threads_override;
    cfg.validate();
    const carht::SimResult result = carht::run_simulation(cfg);
    const std::string fmt(format);
    std::string text;
    if (fmt == "csv") text = carht::sim_result_to_csv(result);
    else if (fmt == "json") text = carht::sim_result_to_json(result);
    else throw std::invalid_argument("format must be \"csv\" or \"json\"");
    *out_text = dup_string(text);
  });
}

void carht_string_free(char* text) { delete[] text; }

}  // extern "C"
