#include "carht/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace carht {

namespace {

using nlohmann::json;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, const std::string& column, std::size_t row) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("row " + std::to_string(row) + ": non-numeric " + column +
                                " value \"" + s + "\"");
  }
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key()))
      throw std::invalid_argument("unknown key \"" + it.key() + "\" in " + where);
  }
}

DesignConfig parse_design(const json& obj) {
  reject_unknown_keys(obj, {"scheme", "pi", "block_size", "coin_p", "weights", "seed"},
                      "design");
  DesignConfig d;
  if (obj.contains("scheme")) d.scheme = scheme_from_name(obj.at("scheme").get<std::string>());
  if (obj.contains("pi")) d.pi = obj.at("pi").get<double>();
  if (obj.contains("block_size")) d.block_size = obj.at("block_size").get<int>();
  if (obj.contains("coin_p")) d.coin_p = obj.at("coin_p").get<double>();
  if (obj.contains("weights")) d.weights = obj.at("weights").get<std::vector<double>>();
  if (obj.contains("seed")) d.seed = obj.at("seed").get<std::uint64_t>();
  d.validate();
  return d;
}

void parse_score_options(const json& obj, EstimatorConfig& ec) {
  reject_unknown_keys(obj, {"kernel", "bandwidth", "thresholds", "var_bandwidth_scale"},
                      "score");
  if (obj.contains("kernel")) {
    const auto name = obj.at("kernel").get<std::string>();
    if (name == "gaussian") ec.kernel = KernelKind::kGaussian;
    else if (name == "triweight") ec.kernel = KernelKind::kTriweight;
    else throw std::invalid_argument("unknown kernel: " + name);
  }
  if (obj.contains("bandwidth")) ec.bandwidth = obj.at("bandwidth").get<double>();
  if (obj.contains("var_bandwidth_scale"))
    ec.var_bandwidth_scale = obj.at("var_bandwidth_scale").get<double>();
  if (obj.contains("thresholds")) {
    const json& t = obj.at("thresholds");
    reject_unknown_keys(t, {"b", "c", "d", "e"}, "score.thresholds");
    TruncationThresholds th;
    th.b = t.at("b").get<double>();
    th.c = t.at("c").get<double>();
    th.d = t.at("d").get<double>();
    th.e = t.at("e").get<double>();
    ec.thresholds = th;
  }
}

void parse_estimator_options(const json& obj, EstimatorConfig& ec) {
  if (obj.contains("initial")) {
    const auto name = obj.at("initial").get<std::string>();
    if (name == "diff-medians") ec.initial = InitialEstimator::kDiffMedians;
    else if (name == "diff-weighted-medians") ec.initial = InitialEstimator::kDiffWeightedMedians;
    else if (name == "stratified-diff-medians")
      ec.initial = InitialEstimator::kStratifiedDiffMedians;
    else throw std::invalid_argument("unknown initial estimator: " + name);
  }
  if (obj.contains("splitting")) {
    const auto name = obj.at("splitting").get<std::string>();
    if (name == "car") ec.splitting = SplitMode::kCAR;
    else if (name == "sr") ec.splitting = SplitMode::kSR;
    else throw std::invalid_argument("unknown splitting mode: " + name);
  }
  if (obj.contains("fisher")) {
    const auto name = obj.at("fisher").get<std::string>();
    if (name == "squared-score") ec.fisher = FisherEstimator::kSquaredScore;
    else if (name == "alt-second-deriv") ec.fisher = FisherEstimator::kAltSecondDeriv;
    else throw std::invalid_argument("unknown fisher estimator: " + name);
  }
  if (obj.contains("fit_arm")) {
    const auto name = obj.at("fit_arm").get<std::string>();
    if (name == "control") ec.fit_arm = ScoreFitArm::kControl;
    else if (name == "pooled") ec.fit_arm = ScoreFitArm::kPooled;
    else throw std::invalid_argument("unknown fit_arm: " + name);
  }
  if (obj.contains("fold_specific_initial"))
    ec.fold_specific_initial = obj.at("fold_specific_initial").get<bool>();
  if (obj.contains("score")) parse_score_options(obj.at("score"), ec);
}

std::vector<EstimatorKind> parse_estimator_list(const json& arr) {
  std::vector<EstimatorKind> kinds;
  for (const auto& item : arr) kinds.push_back(estimator_from_name(item.get<std::string>()));
  if (kinds.empty()) throw std::invalid_argument("estimator list is empty");
  return kinds;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

TrialData parse_dataset_csv(const std::string& text, DatasetLabels* labels) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty dataset file");
  const auto header = split_csv_line(line);
  int col_outcome = -1, col_treatment = -1, col_stratum = -1;
  std::vector<int> cov_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "outcome") col_outcome = static_cast<int>(c);
    else if (header[c] == "treatment") col_treatment = static_cast<int>(c);
    else if (header[c] == "stratum") col_stratum = static_cast<int>(c);
    else if (header[c].rfind("cov_", 0) == 0) cov_cols.push_back(static_cast<int>(c));
  }
  if (col_outcome < 0) throw std::invalid_argument("missing column: outcome");
  if (col_treatment < 0) throw std::invalid_argument("missing column: treatment");
  if (col_stratum < 0) throw std::invalid_argument("missing column: stratum");

  TrialData data;
  std::map<std::string, int> stratum_ids;
  std::vector<std::string> names;
  std::map<int, std::map<std::string, int>> cov_level_ids;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    row += 1;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(row) + ": expected " +
                                  std::to_string(header.size()) + " fields, got " +
                                  std::to_string(fields.size()));
    data.y.push_back(parse_double(fields[static_cast<std::size_t>(col_outcome)], "outcome", row));
    const std::string& t = fields[static_cast<std::size_t>(col_treatment)];
    if (t == "0") data.a.push_back(0);
    else if (t == "1") data.a.push_back(1);
    else
      throw std::invalid_argument("row " + std::to_string(row) +
                                  ": treatment must be 0 or 1, got \"" + t + "\"");
    const std::string& s = fields[static_cast<std::size_t>(col_stratum)];
    auto [it, inserted] = stratum_ids.try_emplace(s, static_cast<int>(stratum_ids.size()));
    if (inserted) names.push_back(s);
    data.strata.push_back(it->second);
    if (!cov_cols.empty()) {
      std::vector<int> cov;
      for (int c : cov_cols) {
        auto& levels = cov_level_ids[c];
        auto [cit, cins] = levels.try_emplace(fields[static_cast<std::size_t>(c)],
                                              static_cast<int>(levels.size()));
        (void)cins;
        cov.push_back(cit->second);
      }
      data.covariates.push_back(std::move(cov));
    }
  }
  data.validate();
  if (labels) labels->stratum_names = names;
  return data;
}

TrialData parse_dataset_csv(const std::string& text) { return parse_dataset_csv(text, nullptr); }

TrialData load_dataset(const std::string& path) { return parse_dataset_csv(read_file(path)); }

RunConfig parse_run_config(const std::string& json_text) {
  const json obj = json::parse(json_text);
  reject_unknown_keys(obj,
                      {"schema_version", "estimators", "design", "alpha", "seed", "pi_mode",
                       "initial", "splitting", "fisher", "fit_arm", "fold_specific_initial",
                       "score"},
                      "run config");
  RunConfig cfg;
  if (obj.contains("schema_version") && obj.at("schema_version").get<int>() != 1)
    throw std::invalid_argument("unsupported schema_version");
  if (obj.contains("estimators")) cfg.estimators = parse_estimator_list(obj.at("estimators"));
  if (obj.contains("design")) cfg.design = parse_design(obj.at("design"));
  if (obj.contains("alpha")) cfg.alpha = obj.at("alpha").get<double>();
  if (obj.contains("seed")) cfg.seed = obj.at("seed").get<std::uint64_t>();
  if (obj.contains("pi_mode")) {
    const auto mode = obj.at("pi_mode").get<std::string>();
    if (mode == "known") cfg.pi_known = true;
    else if (mode == "estimate") cfg.pi_known = false;
    else throw std::invalid_argument("pi_mode must be \"known\" or \"estimate\"");
  }
  parse_estimator_options(obj, cfg.estimator_config);
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0,1)");
  return cfg;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

SimConfig parse_sim_config(const std::string& json_text) {
  const json obj = json::parse(json_text);
  reject_unknown_keys(obj,
                      {"schema_version", "model", "tail", "tau", "n", "pi", "design",
                       "estimators", "reps", "alpha", "seed", "threads", "initial",
                       "splitting", "fisher", "fit_arm", "fold_specific_initial", "score"},
                      "sim config");
  SimConfig cfg;
  if (obj.contains("schema_version") && obj.at("schema_version").get<int>() != 1)
    throw std::invalid_argument("unsupported schema_version");
  if (obj.contains("model")) cfg.outcome.model_id = obj.at("model").get<int>();
  if (obj.contains("tail")) cfg.outcome.tail = tail_from_name(obj.at("tail").get<std::string>());
  if (obj.contains("tau")) cfg.outcome.tau = obj.at("tau").get<double>();
  if (obj.contains("n")) cfg.outcome.n = obj.at("n").get<std::size_t>();
  if (obj.contains("pi")) cfg.outcome.pi = obj.at("pi").get<double>();
  if (obj.contains("design")) cfg.design = parse_design(obj.at("design"));
  cfg.design.pi = cfg.outcome.pi;
  if (obj.contains("estimators")) cfg.estimators = parse_estimator_list(obj.at("estimators"));
  if (obj.contains("reps")) cfg.reps = obj.at("reps").get<std::size_t>();
  if (obj.contains("alpha")) cfg.alpha = obj.at("alpha").get<double>();
  if (obj.contains("seed")) cfg.master_seed = obj.at("seed").get<std::uint64_t>();
  if (obj.contains("threads")) cfg.threads = obj.at("threads").get<int>();
  parse_estimator_options(obj, cfg.estimator_config);
  cfg.validate();
  return cfg;
}

SimConfig load_sim_config(const std::string& path) { return parse_sim_config(read_file(path)); }

std::vector<AnalysisRow> analyze(const TrialData& data, const RunConfig& config) {
  data.validate();
  const double pi =
      config.pi_known
          ? config.design.pi
          : static_cast<double>(std::count(data.a.begin(), data.a.end(), std::uint8_t{1})) /
                static_cast<double>(data.size());
  EstimatorConfig ec = config.estimator_config;
  ec.pi = pi;
  ec.seed = derive_seed(config.seed, 0x5b17ULL);
  std::optional<std::vector<double>> q_k;
  try {
    q_k = q_for_design(config.design, pi, data.stratum_count());
  } catch (const std::exception&) {
    q_k = std::nullopt;
  }

  std::vector<AnalysisRow> rows;
  for (EstimatorKind kind : config.estimators) {
    AnalysisRow row;
    row.estimator = estimator_name(kind);
    try {
      switch (kind) {
        case EstimatorKind::kDiffMedians:
        case EstimatorKind::kDiffWeightedMedians:
        case EstimatorKind::kStratifiedDiffMedians:
        case EstimatorKind::kNaiveDim:
        case EstimatorKind::kStratifiedDim: {
          double tau;
          if (kind == EstimatorKind::kDiffMedians) tau = diff_in_medians(data);
          else if (kind == EstimatorKind::kDiffWeightedMedians)
            tau = diff_in_weighted_medians(data);
          else if (kind == EstimatorKind::kStratifiedDiffMedians)
            tau = stratified_diff_in_medians(data);
          else if (kind == EstimatorKind::kNaiveDim) tau = naive_dim(data);
          else tau = stratified_dim(data);
          EstimateReport r;
          r.tau_hat = tau;
          r.alpha = config.alpha;
          r.ci_lo = r.ci_hi = tau;  // no variance theory attached; degenerate CI
          r.method = row.estimator + " (point only)";
          row.report = r;
          break;
        }
        case EstimatorKind::kTdim:
        case EstimatorKind::kStr: {
          const PointEstimate pe =
              kind == EstimatorKind::kTdim ? tdim(data, ec) : str(data, ec);
          const auto vc = variance_components(pe.z, data, pi, q_k);
          double sigma2;
          std::string var_label;
          if (kind == EstimatorKind::kTdim) {
            sigma2 = variance_tdim(vc);  // throws the refusal under minimization
            var_label = "plug-in tdim variance";
          } else {
            sigma2 = variance_str(vc);
            var_label = "stratified variance";
          }
          EstimateReport r = wald_ci(pe.tau_hat, sigma2, data.size(), config.alpha);
          r.method = row.estimator + " + " + var_label;
          row.report = r;
          break;
        }
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string analysis_to_csv(const std::vector<AnalysisRow>& rows) {
  std::ostringstream out;
  out << "estimator,tau_hat,se,ci_lo,ci_hi,length\n";
  for (const auto& row : rows) {
    out << row.estimator << ',';
    if (row.report) {
      const auto& r = *row.report;
      out << format_double(r.tau_hat) << ',' << format_double(r.se) << ','
          << format_double(r.ci_lo) << ',' << format_double(r.ci_hi) << ','
          << format_double(r.ci_hi - r.ci_lo);
    } else {
      out << ",,,,";
    }
    out << '\n';
  }
  return out.str();
}

std::string analysis_to_json(const std::vector<AnalysisRow>& rows) {
  json arr = json::array();
  for (const auto& row : rows) {
    json item;
    item["estimator"] = row.estimator;
    if (row.report) {
      const auto& r = *row.report;
      item["tau_hat"] = r.tau_hat;
      item["se"] = r.se;
      item["ci_lo"] = r.ci_lo;
      item["ci_hi"] = r.ci_hi;
      item["length"] = r.ci_hi - r.ci_lo;
      item["alpha"] = r.alpha;
      item["method"] = r.method;
    } else {
      item["error"] = row.error;
    }
    arr.push_back(std::move(item));
  }
  json doc;
  doc["schema_version"] = 1;
  doc["results"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::string sim_result_to_csv(const SimResult& result) {
  std::ostringstream out;
  out << "estimator,bias,sd,rmse,se,cp,length,note\n";
  for (const auto& s : result.estimators) {
    out << s.name << ',' << format_double(s.bias) << ',' << format_double(s.sd) << ','
        << format_double(s.rmse) << ',';
    out << (s.se ? format_double(*s.se) : "") << ',';
    out << (s.cp ? format_double(*s.cp) : "") << ',';
    out << (s.length ? format_double(*s.length) : "") << ',';
    // notes are free text; keep the CSV unambiguous
    std::string note = s.note;
    for (auto& ch : note)
      if (ch == ',' || ch == '\n') ch = ';';
    out << note << '\n';
  }
  return out.str();
}

std::string sim_result_to_json(const SimResult& result) {
  json arr = json::array();
  for (const auto& s : result.estimators) {
    json item;
    item["estimator"] = s.name;
    item["bias"] = s.bias;
    item["sd"] = s.sd;
    item["rmse"] = s.rmse;
    item["se"] = s.se ? json(*s.se) : json(nullptr);
    item["cp"] = s.cp ? json(*s.cp) : json(nullptr);
    item["length"] = s.length ? json(*s.length) : json(nullptr);
    if (!s.note.empty()) item["note"] = s.note;
    arr.push_back(std::move(item));
  }
  json doc;
  doc["schema_version"] = 1;
  doc["reps"] = result.reps;
  doc["retries"] = result.total_retries;
  doc["estimators"] = std::move(arr);
  return doc.dump(2) + "\n";
}

std::string assignment_to_csv(const AssignmentVector& a, const std::vector<int>& strata) {
  if (a.size() != strata.size())
    throw std::invalid_argument("assignment and strata lengths differ");
  std::ostringstream out;
  out << "unit,stratum,treatment\n";
  for (std::size_t i = 0; i < a.size(); ++i)
    out << (i + 1) << ',' << strata[i] << ',' << static_cast<int>(a[i]) << '\n';
  return out.str();
}

}  // namespace carht
