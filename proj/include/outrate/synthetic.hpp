#pragma once

#include "outrate/features.hpp"
#include "outrate/ingest.hpp"
#include "outrate/kernels.hpp"
#include "outrate/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace outrate {

// How the common multiplicative factor G enters the generated counts.
enum class GMode {
  per_dataset,  // one G ~ Gamma(a, a) shared by every count of a dataset
  per_count,    // an independent G for every line-year
};

std::string to_string(GMode mode);
GMode parse_g_mode(const std::string& text);

struct GenerativeConfig {
  double m = -1.5;
  double beta_length = 0.13;
  double beta_voltage = 0.12;
  double w = 0.52;  // Sigma = w Sigma_1 + (1 - w) Sigma_2
  double a = 1.0;   // shape of G
  int n_years = 5;
  int first_year = 2000;
  std::uint64_t seed = 1;
  GMode g_mode = GMode::per_dataset;

  void validate() const;
};

struct SyntheticDataset {
  GenerativeConfig config;
  VectorXd lambda;  // true rates
  double g = 1.0;   // per-dataset factor; 1 in per-count mode
  CountMatrix counts;
};

/// ln lambda ~ Normal(m 1 + b_L x_L + b_V x_V, w Sigma_1 + (1-w) Sigma_2),
/// then G and N_ij ~ Poisson(lambda_i G). The truth draw depends only on the
/// seed, so datasets with different n_years share lambda and G.
SyntheticDataset generate(const GenerativeConfig& config, const std::vector<std::string>& line_ids,
                          const Covariates& covariates, const KernelSet<double>& kernels);

struct QuadraticFit {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
};

// OLS of per-line annual-count variance on (1, mean, mean^2).
QuadraticFit variance_mean_fit(const CountMatrix& counts);

/// Monte Carlo SD of the conventional estimate for fixed lambda over
/// `replicates` datasets of `n_years`. With `redraw_g` each replicate draws its
/// own G (per the config's G mode); otherwise G stays at `g`.
VectorXd conventional_sd_oracle(const GenerativeConfig& config, const VectorXd& lambda, double g, int n_years,
                                int replicates, std::uint64_t seed, bool redraw_g = false);

struct EvaluationReport {
  VectorXd error;   // estimate - truth
  double bias = 0.0;
  double error_sd = 0.0;
  double rmse = 0.0;
  double coverage = std::numeric_limits<double>::quiet_NaN();  // fraction of truth inside [low, high]
  VectorXd histogram_edges;
  VectorXd histogram_counts;
};

EvaluationReport evaluate(const VectorXd& estimate, const VectorXd& truth, const VectorXd* ci_low = nullptr,
                          const VectorXd* ci_high = nullptr, Index bins = 30);

struct InventoryConfig {
  Index n_lines = 500;
  Index n_buses = 357;
  int district_cols = 4;
  int district_rows = 3;
  double median_length = 10.0;
  double sdlog_length = 0.95;
  std::vector<double> voltages{69.0, 115.0, 230.0, 345.0, 500.0};
  std::vector<double> voltage_weights{0.15, 0.3, 0.3, 0.1, 0.15};
  std::uint64_t seed = 7;
};

// Random connected transmission network with geometric districts.
LineTable synthetic_inventory(const InventoryConfig& config);

struct RecordOptions {
  double reclosure_fraction = 0.05;  // extra same-day records merged by deduplication
  double momentary_fraction = 0.05;  // extra records shorter than a minute
  double scheduled_fraction = 0.05;  // extra scheduled records
  int extra_high_voltage_lines = 2;  // 1000 kV lines dropped by the voltage filter
  std::uint64_t seed = 11;
};

/// Outage records whose filtered, deduplicated annual counts equal `counts`.
std::vector<OutageRecord> synthetic_records(const LineTable& lines, const CountMatrix& counts,
                                            const RecordOptions& options = {});
void write_records_csv(std::ostream& out, const std::vector<OutageRecord>& records);

// truth CSV: line_id, lambda
void write_truth_csv(std::ostream& out, const std::vector<std::string>& line_ids, const VectorXd& lambda);
VectorXd read_truth_csv(std::istream& in, const std::vector<std::string>& line_ids);

}  // namespace outrate
