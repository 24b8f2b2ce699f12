#pragma once

#include "outrate/bayes.hpp"
#include "outrate/stats.hpp"
#include "outrate/types.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace outrate {

using LogDensity = std::function<double(const VectorXd&)>;
using LogDensityGradient = std::function<double(const VectorXd&, VectorXd&)>;

/// Random-walk Metropolis with a Haario-style empirical covariance and a
/// Robbins-Monro log scale. Adaptation stops once freeze() is called.
class AdaptiveMetropolis {
 public:
  explicit AdaptiveMetropolis(Index dim, double target_acceptance = 0.3, double initial_sd = 0.1);

  // One proposal; updates x and logp in place, returns whether it was accepted.
  bool step(VectorXd& x, double& logp, const LogDensity& log_density, Rng& rng);
  void freeze() { adapting_ = false; }
  bool adapting() const { return adapting_; }

  long proposals() const { return proposals_; }
  long accepted() const { return accepted_; }
  double scale() const { return std::exp(log_scale_); }
  const MatrixXd& covariance() const { return cov_; }

 private:
  void adapt(const VectorXd& x, bool accepted);

  Index dim_;
  double target_;
  double log_scale_;
  bool adapting_ = true;
  long proposals_ = 0;
  long accepted_ = 0;
  long n_seen_ = 0;
  VectorXd mean_;
  MatrixXd empirical_;  // running sum of centered outer products
  MatrixXd cov_;        // proposal covariance before scaling
  Eigen::LLT<MatrixXd> chol_;
};

/// Hamiltonian Monte Carlo with a fixed trajectory length, dual-averaging step
/// size and a block metric: diagonal on the first `n_diagonal` coordinates,
/// dense on the rest. Metric and step size adapt during warmup windows.
class HamiltonianSampler {
 public:
  struct Settings {
    double target_acceptance = 0.8;
    double trajectory_length = 4.0;
    int max_leapfrog = 200;
    double max_energy_error = 1000.0;
  };

  HamiltonianSampler(Index dim, Index n_diagonal, Settings settings);

  // Heuristic initial step size around the current point.
  void initialize(const VectorXd& x, const LogDensityGradient& f, Rng& rng);
  bool step(VectorXd& x, double& logp, VectorXd& grad, const LogDensityGradient& f, Rng& rng);

  // Warmup control.
  void set_adapt_step(bool on) { adapt_step_ = on; }
  void collect(const VectorXd& x);  // add a draw to the metric window
  void update_metric();             // set metric from the window, restart step size adaptation
  void finish_adaptation();

  double step_size() const { return epsilon_; }
  long proposals() const { return proposals_; }
  long accepted() const { return accepted_; }
  long divergences() const { return divergences_; }  // since finish_adaptation()
  double mean_accept_stat() const { return proposals_ ? accept_stat_sum_ / static_cast<double>(proposals_) : 0.0; }

 private:
  VectorXd velocity(const VectorXd& p) const;
  double kinetic(const VectorXd& p) const;
  VectorXd draw_momentum(Rng& rng) const;
  void restart_dual_averaging();
  void adapt_step(double accept_stat);

  Index dim_;
  Index n_diag_;
  Settings settings_;
  VectorXd inv_diag_;
  MatrixXd inv_dense_;
  MatrixXd dense_chol_;  // Cholesky factor of inv_dense_
  double epsilon_ = 0.1;
  bool adapt_step_ = true;
  // dual averaging
  double mu_ = 0.0;
  double h_bar_ = 0.0;
  double log_eps_bar_ = 0.0;
  long da_count_ = 0;
  // metric window
  long window_n_ = 0;
  VectorXd window_mean_;
  VectorXd window_m2_head_;
  MatrixXd window_m2_tail_;
  long proposals_ = 0;
  long accepted_ = 0;
  long divergences_ = 0;
  double accept_stat_sum_ = 0.0;
};

struct ChainConfig {
  int n_chains = 2;
  int n_iterations = 2000;  // per chain, burn-in included
  int n_burnin = 1000;
  std::uint64_t seed = 1;
  // Warmup fractions: fast step-size window, then metric windows ending at the given fractions.
  double initial_window = 0.15;
  std::vector<double> metric_windows{0.4, 0.85};
  double target_acceptance = 0.8;    // gradient block
  double rwm_target_acceptance = 0.3;  // hyperparameter random-walk block
  double trajectory_length = 4.0;
  int max_leapfrog = 200;
  int hyper_steps = 25;
  int ridge_steps = 10;  // alpha / sigma^2 exchange moves per iteration
  int stuck_window = 200;  // consecutive rejections before a warning
  FreeMask free = FreeMask::all();
  // Values of frozen quantities; z and lambda entries are optional.
  ParameterState frozen;

  void validate() const;
};

struct BlockStats {
  std::string name;
  long proposals = 0;
  long accepted = 0;
  double step = 0.0;  // final step size or random-walk scale
  long divergences = 0;

  double acceptance() const { return proposals ? static_cast<double>(accepted) / static_cast<double>(proposals) : 0.0; }
};

/// Retained draws, one (draws x parameters) matrix per chain. Columns are
/// alpha, beta_length, beta_voltage, m, sigma_sq, w, z[0..n), lambda[0..n).
class PosteriorSamples {
 public:
  PosteriorSamples() = default;
  PosteriorSamples(std::vector<std::string> names, std::vector<MatrixXd> chains);

  Index n_chains() const { return static_cast<Index>(chains_.size()); }
  Index n_draws() const { return chains_.empty() ? 0 : chains_.front().rows(); }
  Index n_params() const { return static_cast<Index>(names_.size()); }
  Index n_lines() const;
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<MatrixXd>& chains() const { return chains_; }
  const MatrixXd& chain(Index c) const { return chains_[static_cast<std::size_t>(c)]; }

  Index index_of(const std::string& name) const;  // throws when unknown
  std::vector<VectorXd> traces(Index param) const;
  std::vector<VectorXd> traces(const std::string& name) const { return traces(index_of(name)); }
  VectorXd pooled(Index param) const;
  VectorXd pooled(const std::string& name) const { return pooled(index_of(name)); }
  ParameterState state(Index chain, Index draw) const;

  std::vector<std::vector<BlockStats>> block_stats;  // per chain
  std::vector<std::string> warnings;

 private:
  std::vector<std::string> names_;
  std::vector<MatrixXd> chains_;
  std::map<std::string, Index> index_;
};

std::vector<std::string> parameter_names(Index n_lines);
void append_state(const ParameterState& state, Eigen::Ref<VectorXd> row);

PosteriorSamples run_chains(const ModelSpec& spec, const ChainConfig& config);

/// Exchange map of the alpha / sigma^2 block. Sets log alpha to `log_alpha`, moves sigma^2 so
/// sigma^2 + trigamma(alpha) is unchanged and pulls beta_0 toward the per-line anchor
/// ln((N_i + 1/2) / t_i) - x_i beta by sqrt(trigamma ratio); z follows. `log_jacobian` is the
/// log-determinant in (log alpha, log sigma^2, z) coordinates. False when sigma^2 would be <= 0.
bool ridge_exchange(const ModelSpec& spec, const ParameterState& from, double log_alpha, ParameterState& to,
                    double& log_jacobian);

// Diagnostics on per-chain traces.
double rhat(const std::vector<VectorXd>& chains);
double effective_sample_size(const std::vector<VectorXd>& chains);
VectorXd acf(const VectorXd& trace, Index max_lag);
VectorXd acf(const std::vector<VectorXd>& chains, Index max_lag);  // chain average

double rhat(const PosteriorSamples& samples, const std::string& name);
double effective_sample_size(const PosteriorSamples& samples, const std::string& name);

struct DiagnosticThresholds {
  double max_rhat = 1.06;
  double min_ess_ratio = 0.004;
};

struct ParameterDiagnostics {
  std::string name;
  double rhat = 1.0;
  double ess = 0.0;
  double ess_ratio = 0.0;  // ESS / total retained draws
};

struct ChainDiagnostics {
  std::vector<ParameterDiagnostics> parameters;
  std::vector<std::string> skipped;  // constant traces (frozen quantities)
  std::vector<ParameterDiagnostics> offenders;  // worst first
  double max_rhat = 1.0;
  double min_ess_ratio = kInf;
  bool pass = false;
  DiagnosticThresholds thresholds;
};

ChainDiagnostics convergence_report(const PosteriorSamples& samples, const DiagnosticThresholds& thresholds = {});

// Binary columnar samples file.
void write_samples(std::ostream& out, const PosteriorSamples& samples);
PosteriorSamples read_samples(std::istream& in);
void write_samples_file(const std::string& path, const PosteriorSamples& samples);
PosteriorSamples read_samples_file(const std::string& path);
// Long-format CSV: chain, draw, then one column per parameter.
void write_samples_csv(std::ostream& out, const PosteriorSamples& samples);
void write_diagnostics_csv(std::ostream& out, const ChainDiagnostics& diagnostics);

}  // namespace outrate
