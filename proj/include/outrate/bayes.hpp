#pragma once

#include "outrate/features.hpp"
#include "outrate/ingest.hpp"
#include "outrate/kernels.hpp"
#include "outrate/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace outrate {

// Hyperparameter priors. alpha: Normal(location, scale^2) truncated to
// alpha > 0; sigma^2: half-normal with scale `sigma_sq_scale`; w: Beta(a, b).
struct PriorSpec {
  double alpha_location = 0.7;
  double alpha_scale = 8.0;
  double beta_length_mean = 0.13;
  double beta_length_sd = 5.0;
  double beta_voltage_mean = 0.12;
  double beta_voltage_sd = 5.0;
  double m_mean = -1.5;
  double m_sd = 5.0;
  double sigma_sq_scale = 0.5;
  double w_a = 1.0;
  double w_b = 1.0;
};

struct InitialValues {
  double m = -1.5;
  double beta_length = 0.13;
  double beta_voltage = 0.12;
};

// Immutable model definition shared by every evaluator and chain.
struct ModelSpec {
  std::vector<std::string> line_ids;
  VectorXd counts;    // N_i
  VectorXd exposure;  // t_i, years
  VectorXd x_length;
  VectorXd x_voltage;
  VectorXd Lambda;
  MatrixXd Q;
  MatrixXd Q_inv_t;
  double log_abs_det_q = 0.0;
  PriorSpec priors;
  InitialValues init;

  Index n() const { return counts.size(); }
  void validate() const;  // throws ValidationError on inconsistent dimensions
};

ModelSpec make_model(const CountMatrix& counts, const Covariates& covariates, const SimDiag<double>& sd,
                     const PriorSpec& priors = {}, const InitialValues& init = {});

// Sampled quantities. beta_0, mu are derived on demand from z and the
// hyperparameters: beta_0 = m 1 + Q^{-T}(s .* z), s_i = sqrt(sigma^2 (w + (1-w) Lambda_i)).
struct ParameterState {
  double alpha = 1.0;
  double beta_length = 0.0;
  double beta_voltage = 0.0;
  double m = 0.0;
  double sigma_sq = 0.5;
  double w = 0.5;
  VectorXd z;
  VectorXd lambda;
};

VectorXd intercept_scales(const ModelSpec& spec, const ParameterState& state);
VectorXd intercepts(const ModelSpec& spec, const ParameterState& state);
VectorXd log_mean_rates(const ModelSpec& spec, const ParameterState& state);  // ln mu
VectorXd mean_rates(const ModelSpec& spec, const ParameterState& state);      // mu

// Poisson log-likelihood sum_i N_i ln(lambda_i t_i) - lambda_i t_i - ln N_i!.
double log_likelihood(const ModelSpec& spec, const ParameterState& state);
// sum_i ln Gamma(lambda_i; shape alpha, rate alpha / mu_i).
double log_rate_layer(const ModelSpec& spec, const ParameterState& state);

/// ln Normal(beta0; m 1, sigma^2 (w Sigma_1 + (1-w) Sigma_2)) evaluated in the
/// diagonalized coordinates Q^T (beta0 - m 1) plus ln |det Q|.
double log_intercept_density(const ModelSpec& spec, const VectorXd& beta0, double m, double sigma_sq, double w);
double log_intercept_layer(const ModelSpec& spec, const ParameterState& state);
// Dense reference evaluation with an explicit covariance.
double log_mvn_density(const VectorXd& x, const VectorXd& mean, const MatrixXd& covariance);

double log_prior(const PriorSpec& priors, const ParameterState& state);
double log_posterior(const ModelSpec& spec, const ParameterState& state);

struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
  double mean() const { return shape / rate; }
  double variance() const { return shape / (rate * rate); }
};

// Exact full conditional lambda_i | rest ~ Gamma(alpha + N_i, alpha / mu_i + t_i).
GammaParams lambda_conditional(const ModelSpec& spec, const ParameterState& state, Index i);

// Negative-binomial marginal of N_i with lambda_i integrated out, summed over lines.
double log_marginal_counts(const ModelSpec& spec, const VectorXd& log_mu, double alpha);

// Hyperparameter slots in the unconstrained vector.
enum HyperSlot : int { kM = 0, kBetaLength, kBetaVoltage, kLogAlpha, kLogSigmaSq, kLogitW, kHyperCount };

struct FreeMask {
  bool intercepts = true;
  std::array<bool, kHyperCount> hyper{true, true, true, true, true, true};

  static FreeMask all() { return {}; }
  static FreeMask none() {
    FreeMask f;
    f.intercepts = false;
    f.hyper.fill(false);
    return f;
  }
};

/// Posterior of (z, hyperparameters) with every lambda_i integrated out, on an
/// unconstrained scale: z, m, beta_L, beta_V as is; ln alpha, ln sigma^2,
/// logit w with their Jacobians. Frozen quantities take values from `fixed`.
/// Layout: [z (n, when free) | free hyperparameters in HyperSlot order].
class CollapsedPosterior {
 public:
  CollapsedPosterior(const ModelSpec& spec, FreeMask mask, ParameterState fixed);

  Index dim() const { return n_latent_ + static_cast<Index>(free_hyper_.size()); }
  Index n_latent() const { return n_latent_; }
  const std::vector<int>& free_hyper() const { return free_hyper_; }
  const FreeMask& mask() const { return mask_; }
  const ModelSpec& spec() const { return *spec_; }

  VectorXd pack(const ParameterState& state) const;
  // lambda is copied from `fixed`.
  ParameterState unpack(const VectorXd& q) const;

  double log_density(const VectorXd& q) const;
  double log_density_gradient(const VectorXd& q, VectorXd& gradient) const;

 private:
  double evaluate(const VectorXd& q, VectorXd* gradient) const;

  const ModelSpec* spec_;
  FreeMask mask_;
  ParameterState fixed_;
  Index n_latent_;
  std::vector<int> free_hyper_;
};

}  // namespace outrate
