#include "outrate/config.hpp"

#include "outrate/error.hpp"
#include "outrate/io.hpp"
#include "outrate/stats.hpp"

#include <algorithm>
#include <initializer_list>
#include <set>

namespace outrate {

namespace {

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ValidationError("config: unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void get(const Json& j, const char* key, T& value) {
  if (!j.contains(key)) return;
  try {
    value = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

Json filter_json(const FilterPolicy& f) {
  return {{"drop_scheduled", f.drop_scheduled},
          {"momentary_max_seconds", f.momentary_max.count()},
          {"excluded_voltages_kv", f.excluded_voltages_kv}};
}

FilterPolicy filter_from(const Json& j) {
  check_keys(j, "filter", {"drop_scheduled", "momentary_max_seconds", "excluded_voltages_kv"});
  FilterPolicy f;
  get(j, "drop_scheduled", f.drop_scheduled);
  long seconds = f.momentary_max.count();
  get(j, "momentary_max_seconds", seconds);
  f.momentary_max = std::chrono::seconds{seconds};
  get(j, "excluded_voltages_kv", f.excluded_voltages_kv);
  return f;
}

PriorSpec priors_from(const Json& j) {
  check_keys(j, "priors",
             {"alpha_location", "alpha_scale", "beta_length_mean", "beta_length_sd", "beta_voltage_mean",
              "beta_voltage_sd", "m_mean", "m_sd", "sigma_sq_scale", "w_a", "w_b"});
  PriorSpec p;
  get(j, "alpha_location", p.alpha_location);
  get(j, "alpha_scale", p.alpha_scale);
  get(j, "beta_length_mean", p.beta_length_mean);
  get(j, "beta_length_sd", p.beta_length_sd);
  get(j, "beta_voltage_mean", p.beta_voltage_mean);
  get(j, "beta_voltage_sd", p.beta_voltage_sd);
  get(j, "m_mean", p.m_mean);
  get(j, "m_sd", p.m_sd);
  get(j, "sigma_sq_scale", p.sigma_sq_scale);
  get(j, "w_a", p.w_a);
  get(j, "w_b", p.w_b);
  if (!(p.alpha_scale > 0 && p.beta_length_sd > 0 && p.beta_voltage_sd > 0 && p.m_sd > 0 && p.sigma_sq_scale > 0 &&
        p.w_a > 0 && p.w_b > 0)) {
    throw ValidationError("config: prior scales must be positive");
  }
  return p;
}

Json fit_json(const FitOptions& f) {
  return {{"max_variance", f.max_variance},
          {"grid_points", f.grid_points},
          {"max_iterations", f.max_iterations},
          {"tolerance", f.tolerance},
          {"flat_tolerance", f.flat_tolerance}};
}

FitOptions fit_from(const Json& j) {
  check_keys(j, "fit", {"max_variance", "grid_points", "max_iterations", "tolerance", "flat_tolerance"});
  FitOptions f;
  get(j, "max_variance", f.max_variance);
  get(j, "grid_points", f.grid_points);
  get(j, "max_iterations", f.max_iterations);
  get(j, "tolerance", f.tolerance);
  get(j, "flat_tolerance", f.flat_tolerance);
  return f;
}

ChainConfig chains_from(const Json& j) {
  check_keys(j, "chains",
             {"n_chains", "n_iterations", "n_burnin", "initial_window", "metric_windows", "target_acceptance",
              "rwm_target_acceptance", "trajectory_length", "max_leapfrog", "hyper_steps", "ridge_steps", "stuck_window"});
  ChainConfig c;
  get(j, "n_chains", c.n_chains);
  get(j, "n_iterations", c.n_iterations);
  get(j, "n_burnin", c.n_burnin);
  get(j, "initial_window", c.initial_window);
  get(j, "metric_windows", c.metric_windows);
  get(j, "target_acceptance", c.target_acceptance);
  get(j, "rwm_target_acceptance", c.rwm_target_acceptance);
  get(j, "trajectory_length", c.trajectory_length);
  get(j, "max_leapfrog", c.max_leapfrog);
  get(j, "hyper_steps", c.hyper_steps);
  get(j, "ridge_steps", c.ridge_steps);
  get(j, "stuck_window", c.stuck_window);
  c.validate();
  return c;
}

Json inventory_json(const InventoryConfig& c) {
  return {{"n_lines", c.n_lines},
          {"n_buses", c.n_buses},
          {"district_cols", c.district_cols},
          {"district_rows", c.district_rows},
          {"median_length", c.median_length},
          {"sdlog_length", c.sdlog_length},
          {"voltages", c.voltages},
          {"voltage_weights", c.voltage_weights},
          {"seed", c.seed}};
}

InventoryConfig inventory_from(const Json& j) {
  check_keys(j, "synthetic.inventory",
             {"n_lines", "n_buses", "district_cols", "district_rows", "median_length", "sdlog_length", "voltages",
              "voltage_weights", "seed"});
  InventoryConfig c;
  get(j, "n_lines", c.n_lines);
  get(j, "n_buses", c.n_buses);
  get(j, "district_cols", c.district_cols);
  get(j, "district_rows", c.district_rows);
  get(j, "median_length", c.median_length);
  get(j, "sdlog_length", c.sdlog_length);
  get(j, "voltages", c.voltages);
  get(j, "voltage_weights", c.voltage_weights);
  get(j, "seed", c.seed);
  return c;
}

Json records_json(const RecordOptions& r) {
  return {{"reclosure_fraction", r.reclosure_fraction},
          {"momentary_fraction", r.momentary_fraction},
          {"scheduled_fraction", r.scheduled_fraction},
          {"extra_high_voltage_lines", r.extra_high_voltage_lines},
          {"seed", r.seed}};
}

RecordOptions records_from(const Json& j) {
  check_keys(j, "synthetic.records",
             {"reclosure_fraction", "momentary_fraction", "scheduled_fraction", "extra_high_voltage_lines", "seed"});
  RecordOptions r;
  get(j, "reclosure_fraction", r.reclosure_fraction);
  get(j, "momentary_fraction", r.momentary_fraction);
  get(j, "scheduled_fraction", r.scheduled_fraction);
  get(j, "extra_high_voltage_lines", r.extra_high_voltage_lines);
  get(j, "seed", r.seed);
  return r;
}

}  // namespace

std::uint64_t stage_seed(const RunConfig& config, Stage stage) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(stage));
}

Json to_json(const ChainConfig& c) {
  return {{"n_chains", c.n_chains},
          {"n_iterations", c.n_iterations},
          {"n_burnin", c.n_burnin},
          {"initial_window", c.initial_window},
          {"metric_windows", c.metric_windows},
          {"target_acceptance", c.target_acceptance},
          {"rwm_target_acceptance", c.rwm_target_acceptance},
          {"trajectory_length", c.trajectory_length},
          {"max_leapfrog", c.max_leapfrog},
          {"hyper_steps", c.hyper_steps},
          {"ridge_steps", c.ridge_steps},
          {"stuck_window", c.stuck_window}};
}

Json to_json(const PriorSpec& p) {
  return {{"alpha_location", p.alpha_location}, {"alpha_scale", p.alpha_scale},
          {"beta_length_mean", p.beta_length_mean}, {"beta_length_sd", p.beta_length_sd},
          {"beta_voltage_mean", p.beta_voltage_mean}, {"beta_voltage_sd", p.beta_voltage_sd},
          {"m_mean", p.m_mean}, {"m_sd", p.m_sd},
          {"sigma_sq_scale", p.sigma_sq_scale}, {"w_a", p.w_a},
          {"w_b", p.w_b}};
}

Json to_json(const GenerativeConfig& g) {
  return {{"m", g.m},
          {"beta_length", g.beta_length},
          {"beta_voltage", g.beta_voltage},
          {"w", g.w},
          {"a", g.a},
          {"n_years", g.n_years},
          {"first_year", g.first_year},
          {"seed", g.seed},
          {"g_mode", to_string(g.g_mode)}};
}

GenerativeConfig generative_from_json(const Json& j) {
  check_keys(j, "synthetic.generative",
             {"m", "beta_length", "beta_voltage", "w", "a", "n_years", "first_year", "seed", "g_mode"});
  GenerativeConfig g;
  get(j, "m", g.m);
  get(j, "beta_length", g.beta_length);
  get(j, "beta_voltage", g.beta_voltage);
  get(j, "w", g.w);
  get(j, "a", g.a);
  get(j, "n_years", g.n_years);
  get(j, "first_year", g.first_year);
  get(j, "seed", g.seed);
  std::string mode = to_string(g.g_mode);
  get(j, "g_mode", mode);
  g.g_mode = parse_g_mode(mode);
  g.validate();
  return g;
}

Json to_json(const RunConfig& c) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["records"] = c.records;
  j["inventory"] = c.inventory;
  j["out"] = c.out;
  j["seed"] = c.seed;
  j["filter"] = filter_json(c.filter);
  j["day"] = {{"utc_offset_minutes", c.day.utc_offset.count()}};
  j["kernels"] = {{"rate", c.kernels.rate}, {"unit_miles", c.kernels.unit_miles}};
  j["priors"] = to_json(c.priors);
  j["fit"] = fit_json(c.fit);
  j["chains"] = to_json(c.chains);
  j["thresholds"] = {{"max_rhat", c.thresholds.max_rhat}, {"min_ess_ratio", c.thresholds.min_ess_ratio}};
  j["synthetic"] = {{"generative", to_json(c.synthetic.generative)},
                    {"years", c.synthetic.years},
                    {"oracle_replicates", c.synthetic.oracle_replicates},
                    {"inventory", inventory_json(c.synthetic.inventory)},
                    {"records", records_json(c.synthetic.records)}};
  return j;
}

RunConfig run_config_from_json(const Json& j) {
  check_keys(j, "config",
             {"schema_version", "records", "inventory", "out", "seed", "filter", "day", "kernels", "priors", "fit",
              "chains", "thresholds", "synthetic"});
  RunConfig c;
  int version = kSchemaVersion;
  get(j, "schema_version", version);
  if (version != kSchemaVersion) throw ValidationError("config: unsupported schema_version");
  get(j, "records", c.records);
  get(j, "inventory", c.inventory);
  get(j, "out", c.out);
  get(j, "seed", c.seed);
  if (j.contains("filter")) c.filter = filter_from(j.at("filter"));
  if (j.contains("day")) {
    check_keys(j.at("day"), "day", {"utc_offset_minutes"});
    long minutes = 0;
    get(j.at("day"), "utc_offset_minutes", minutes);
    c.day.utc_offset = std::chrono::minutes{minutes};
  }
  if (j.contains("kernels")) {
    check_keys(j.at("kernels"), "kernels", {"rate", "unit_miles"});
    get(j.at("kernels"), "rate", c.kernels.rate);
    get(j.at("kernels"), "unit_miles", c.kernels.unit_miles);
    if (!(c.kernels.rate > 0.0 && c.kernels.unit_miles > 0.0)) throw ValidationError("config: kernel rate and unit must be positive");
  }
  if (j.contains("priors")) c.priors = priors_from(j.at("priors"));
  if (j.contains("fit")) c.fit = fit_from(j.at("fit"));
  if (j.contains("chains")) c.chains = chains_from(j.at("chains"));
  if (j.contains("thresholds")) {
    check_keys(j.at("thresholds"), "thresholds", {"max_rhat", "min_ess_ratio"});
    get(j.at("thresholds"), "max_rhat", c.thresholds.max_rhat);
    get(j.at("thresholds"), "min_ess_ratio", c.thresholds.min_ess_ratio);
  }
  if (j.contains("synthetic")) {
    const Json& s = j.at("synthetic");
    check_keys(s, "synthetic", {"generative", "years", "oracle_replicates", "inventory", "records"});
    if (s.contains("generative")) c.synthetic.generative = generative_from_json(s.at("generative"));
    get(s, "years", c.synthetic.years);
    get(s, "oracle_replicates", c.synthetic.oracle_replicates);
    if (s.contains("inventory")) c.synthetic.inventory = inventory_from(s.at("inventory"));
    if (s.contains("records")) c.synthetic.records = records_from(s.at("records"));
  }
  return c;
}

RunConfig read_run_config(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".toml") {
    throw ValidationError("TOML configs are not supported; use JSON");
  }
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return run_config_from_json(j);
}

void write_run_config(const std::string& path, const RunConfig& config) {
  write_text_file(path, to_json(config).dump(2) + "\n");
}

Json to_json(const EmpiricalFit& f) {
  return {{"m", f.m},
          {"beta_length", f.beta_length},
          {"beta_voltage", f.beta_voltage},
          {"sigma1_sq", f.sigma1_sq},
          {"sigma2_sq", f.sigma2_sq},
          {"w", f.w},
          {"sigma_sq", f.sigma_sq},
          {"log_likelihood", f.log_likelihood},
          {"flat_direction", f.flat_direction},
          {"n_fitted", f.n_fitted},
          {"iterations", f.iterations}};
}

Json to_json(const ChainDiagnostics& d, Index max_offenders) {
  Json offenders = Json::array();
  for (std::size_t k = 0; k < d.offenders.size() && static_cast<Index>(k) < max_offenders; ++k) {
    const ParameterDiagnostics& p = d.offenders[k];
    offenders.push_back({{"parameter", p.name}, {"rhat", p.rhat}, {"ess", p.ess}, {"ess_ratio", p.ess_ratio}});
  }
  return {{"pass", d.pass},
          {"max_rhat", d.max_rhat},
          {"min_ess_ratio", std::isfinite(d.min_ess_ratio) ? Json(d.min_ess_ratio) : Json(nullptr)},
          {"thresholds", {{"max_rhat", d.thresholds.max_rhat}, {"min_ess_ratio", d.thresholds.min_ess_ratio}}},
          {"n_diagnosed", d.parameters.size()},
          {"n_skipped", d.skipped.size()},
          {"offenders", offenders}};
}

Json model_summary(const ModelSpec& spec) {
  return {{"n_lines", spec.n()},
          {"n_parameters", 6 + 2 * spec.n()},
          {"total_outages", spec.counts.sum()},
          {"log_abs_det_q", spec.log_abs_det_q},
          {"lambda_min", spec.Lambda.minCoeff()},
          {"lambda_max", spec.Lambda.maxCoeff()},
          {"priors", to_json(spec.priors)},
          {"init", {{"m", spec.init.m}, {"beta_length", spec.init.beta_length}, {"beta_voltage", spec.init.beta_voltage}}}};
}

}  // namespace outrate
