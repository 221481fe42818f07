#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carht.h"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << content;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

struct Units {
  std::vector<int> strata;
  std::vector<std::string> stratum_names;  // dense-id order
  std::vector<int> covariates;             // row-major, n x n_factors
  size_t n_factors = 0;
};

// reads `stratum` and cov_* columns; labels become dense ids in appearance order
Units load_units(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty input file");
  const auto header = split_line(line);
  int col_stratum = -1;
  std::vector<int> cov_cols;
  for (size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "stratum") col_stratum = static_cast<int>(c);
    else if (header[c].rfind("cov_", 0) == 0) cov_cols.push_back(static_cast<int>(c));
  }
  if (col_stratum < 0) throw std::runtime_error("missing column: stratum");

  Units units;
  units.n_factors = cov_cols.size();
  std::vector<std::vector<std::string>> level_names(cov_cols.size());
  size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    row += 1;
    const auto fields = split_line(line);
    if (fields.size() != header.size())
      throw std::runtime_error("row " + std::to_string(row) + ": wrong field count");
    const std::string& label = fields[static_cast<size_t>(col_stratum)];
    int id = -1;
    for (size_t k = 0; k < units.stratum_names.size(); ++k)
      if (units.stratum_names[k] == label) { id = static_cast<int>(k); break; }
    if (id < 0) {
      id = static_cast<int>(units.stratum_names.size());
      units.stratum_names.push_back(label);
    }
    units.strata.push_back(id);
    for (size_t f = 0; f < cov_cols.size(); ++f) {
      const std::string& lev = fields[static_cast<size_t>(cov_cols[f])];
      int lid = -1;
      for (size_t k = 0; k < level_names[f].size(); ++k)
        if (level_names[f][k] == lev) { lid = static_cast<int>(k); break; }
      if (lid < 0) {
        lid = static_cast<int>(level_names[f].size());
        level_names[f].push_back(lev);
      }
      units.covariates.push_back(lid);
    }
  }
  if (units.strata.empty()) throw std::runtime_error("no data rows in input file");
  return units;
}

int fail(int code) {
  std::cerr << "error: " << carht_last_error() << "\n";
  return code;
}

int env_threads(int flag_value) {
  const char* env = std::getenv("CAR_THREADS");
  if (env != nullptr && *env != '\0') {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return flag_value;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"covariate-adaptive randomization & heavy-tailed treatment effects"};
  app.require_subcommand(1);

  // ---- assign ----
  auto* cmd_assign = app.add_subcommand("assign", "generate treatment assignments");
  std::string in_path, out_path, scheme = "simple", weights_arg;
  double pi = 0.5, coin_p = 0.85;
  int block_size = 4;
  unsigned long long seed = 0;
  cmd_assign->add_option("--input", in_path, "units CSV (stratum, optional cov_*)")
      ->required();
  cmd_assign->add_option("--output", out_path, "output CSV path (default stdout)");
  cmd_assign->add_option("--scheme", scheme,
                         "simple | stratified-block | biased-coin | minimization");
  cmd_assign->add_option("--pi", pi, "target treated probability");
  cmd_assign->add_option("--block-size", block_size, "permuted block size");
  cmd_assign->add_option("--coin-p", coin_p, "biased-coin probability");
  cmd_assign->add_option("--weights", weights_arg,
                         "comma-separated minimization weights, one per cov_ column");
  cmd_assign->add_option("--seed", seed, "RNG seed");

  // ---- analyze ----
  auto* cmd_analyze = app.add_subcommand("analyze", "estimate treatment effects");
  std::string data_path, config_path, format = "csv", analyze_out;
  cmd_analyze->add_option("--data", data_path, "dataset CSV")->required();
  cmd_analyze->add_option("--config", config_path, "run configuration JSON");
  cmd_analyze->add_option("--format", format, "csv | json");
  cmd_analyze->add_option("--output", analyze_out, "output path (default stdout)");

  // ---- simulate ----
  auto* cmd_sim = app.add_subcommand("simulate", "Monte Carlo replication harness");
  std::string sim_config, sim_format = "csv", sim_out;
  long long reps = -1, sim_seed = -1;
  int threads = 0;
  cmd_sim->add_option("--config", sim_config, "simulation configuration JSON")->required();
  cmd_sim->add_option("--reps", reps, "override replication count");
  cmd_sim->add_option("--seed", sim_seed, "override master seed");
  cmd_sim->add_option("--threads", threads, "worker threads (CAR_THREADS overrides)");
  cmd_sim->add_option("--format", sim_format, "csv | json");
  cmd_sim->add_option("--output", sim_out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (cmd_assign->parsed()) {
      const Units units = load_units(in_path);
      std::vector<double> weights;
      if (!weights_arg.empty()) {
        std::istringstream ws(weights_arg);
        std::string tok;
        while (std::getline(ws, tok, ',')) weights.push_back(std::stod(tok));
      }
      if (scheme == "minimization" && weights.empty())
        weights.assign(units.n_factors, 1.0 / static_cast<double>(
                                                  units.n_factors ? units.n_factors : 1));
      std::vector<unsigned char> a(units.strata.size());
      const int rc = carht_assign(
          scheme.c_str(), pi, block_size, coin_p,
          weights.empty() ? nullptr : weights.data(), weights.size(),
          units.strata.data(),
          units.covariates.empty() ? nullptr : units.covariates.data(),
          units.strata.size(), seed, a.data());
      if (rc != CARHT_OK) return fail(rc);
      std::ostringstream out;
      out << "unit,stratum,treatment\n";
      for (size_t i = 0; i < a.size(); ++i)
        out << (i + 1) << ',' << units.stratum_names[static_cast<size_t>(units.strata[i])]
            << ',' << static_cast<int>(a[i]) << '\n';
      write_output(out_path, out.str());
      return 0;
    }

    if (cmd_analyze->parsed()) {
      carht_dataset* ds = nullptr;
      int rc = carht_dataset_load(data_path.c_str(), &ds);
      if (rc != CARHT_OK) return fail(rc);
      const std::string config = config_path.empty() ? "{}" : read_file(config_path);
      char* text = nullptr;
      rc = carht_analyze(ds, config.c_str(), format.c_str(), &text);
      carht_dataset_free(ds);
      if (rc != CARHT_OK) return fail(rc);
      write_output(analyze_out, text);
      carht_string_free(text);
      return 0;
    }

    if (cmd_sim->parsed()) {
      const std::string config = read_file(sim_config);
      char* text = nullptr;
      const int rc = carht_simulate(config.c_str(), reps, sim_seed, env_threads(threads),
                                    sim_format.c_str(), &text);
      if (rc != CARHT_OK) return fail(rc);
      write_output(sim_out, text);
      carht_string_free(text);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
