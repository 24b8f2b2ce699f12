#include "outrate/bayes.hpp"

#include "outrate/error.hpp"
#include "outrate/stats.hpp"

#include <cmath>
#include <utility>

namespace outrate {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_normal(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

double logistic(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

double log_prior_alpha(const PriorSpec& p, double alpha) {
  if (!(alpha > 0.0)) return kNegInf;
  return log_normal(alpha, p.alpha_location, p.alpha_scale) - std::log(normal_cdf(p.alpha_location / p.alpha_scale));
}

double log_prior_sigma_sq(const PriorSpec& p, double sigma_sq) {
  if (!(sigma_sq > 0.0)) return kNegInf;
  return std::log(2.0) + log_normal(sigma_sq, 0.0, p.sigma_sq_scale);
}

double log_prior_w(const PriorSpec& p, double w) {
  if (!(w > 0.0 && w < 1.0)) return kNegInf;
  double lp = std::lgamma(p.w_a + p.w_b) - std::lgamma(p.w_a) - std::lgamma(p.w_b);
  if (p.w_a != 1.0) lp += (p.w_a - 1.0) * std::log(w);
  if (p.w_b != 1.0) lp += (p.w_b - 1.0) * std::log1p(-w);
  return lp;
}

}  // namespace

void ModelSpec::validate() const {
  const Index k = n();
  if (k == 0) throw ValidationError("model has no lines");
  if (exposure.size() != k || x_length.size() != k || x_voltage.size() != k || Lambda.size() != k ||
      Q.rows() != k || Q.cols() != k || Q_inv_t.rows() != k || Q_inv_t.cols() != k) {
    throw ValidationError("model dimensions disagree across data, covariates and kernels");
  }
  if (!line_ids.empty() && static_cast<Index>(line_ids.size()) != k) throw ValidationError("line id count mismatch");
  if ((counts.array() < 0.0).any() || (exposure.array() < 0.0).any()) {
    throw ValidationError("counts and exposures must be nonnegative");
  }
}

ModelSpec make_model(const CountMatrix& counts, const Covariates& covariates, const SimDiag<double>& sd,
                     const PriorSpec& priors, const InitialValues& init) {
  ModelSpec spec;
  spec.line_ids = counts.line_ids;
  spec.counts = counts.totals();
  spec.exposure = counts.exposure;
  spec.x_length = covariates.length;
  spec.x_voltage = covariates.voltage;
  spec.Lambda = sd.Lambda;
  spec.Q = sd.Q;
  spec.Q_inv_t = sd.Q_inv_t;
  spec.log_abs_det_q = sd.log_abs_det_q;
  spec.priors = priors;
  spec.init = init;
  spec.validate();
  return spec;
}

VectorXd intercept_scales(const ModelSpec& spec, const ParameterState& state) {
  return (state.sigma_sq * (state.w + (1.0 - state.w) * spec.Lambda.array())).sqrt().matrix();
}

VectorXd intercepts(const ModelSpec& spec, const ParameterState& state) {
  if (state.z.size() != spec.n()) throw ValidationError("whitened intercept vector has the wrong length");
  const VectorXd scaled = intercept_scales(spec, state).cwiseProduct(state.z);
  return (spec.Q_inv_t * scaled).array() + state.m;
}

VectorXd log_mean_rates(const ModelSpec& spec, const ParameterState& state) {
  return intercepts(spec, state) + state.beta_length * spec.x_length + state.beta_voltage * spec.x_voltage;
}

VectorXd mean_rates(const ModelSpec& spec, const ParameterState& state) {
  return log_mean_rates(spec, state).array().exp().matrix();
}

double log_likelihood(const ModelSpec& spec, const ParameterState& state) {
  double total = 0.0;
  for (Index i = 0; i < spec.n(); ++i) {
    const double rate = state.lambda(i) * spec.exposure(i);
    if (!(rate > 0.0)) throw ValidationError("Poisson mean lambda_i t_i must be positive");
    const double n = spec.counts(i);
    total += n * std::log(rate) - rate - std::lgamma(n + 1.0);
  }
  return total;
}

double log_rate_layer(const ModelSpec& spec, const ParameterState& state) {
  const double a = state.alpha;
  if (!(a > 0.0)) throw ValidationError("Gamma shape alpha must be positive");
  const VectorXd log_mu = log_mean_rates(spec, state);
  double total = 0.0;
  for (Index i = 0; i < spec.n(); ++i) {
    const double lam = state.lambda(i);
    if (!(lam > 0.0)) throw ValidationError("rates lambda_i must be positive");
    const double log_rate = std::log(a) - log_mu(i);
    total += a * log_rate - std::lgamma(a) + (a - 1.0) * std::log(lam) - std::exp(log_rate) * lam;
  }
  return total;
}

double log_intercept_density(const ModelSpec& spec, const VectorXd& beta0, double m, double sigma_sq, double w) {
  if (!(sigma_sq > 0.0) || !(w > 0.0 && w < 1.0)) return kNegInf;
  const VectorXd r = spec.Q.transpose() * (beta0.array() - m).matrix();
  const Eigen::ArrayXd var = sigma_sq * (w + (1.0 - w) * spec.Lambda.array());
  if ((var <= 0.0).any()) return kNegInf;
  return (-0.5 * kLog2Pi - 0.5 * var.log() - 0.5 * r.array().square() / var).sum() + spec.log_abs_det_q;
}

double log_intercept_layer(const ModelSpec& spec, const ParameterState& state) {
  if (!(state.sigma_sq > 0.0) || !(state.w > 0.0 && state.w < 1.0)) return kNegInf;
  return log_intercept_density(spec, intercepts(spec, state), state.m, state.sigma_sq, state.w);
}

double log_mvn_density(const VectorXd& x, const VectorXd& mean, const MatrixXd& covariance) {
  Eigen::LLT<MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) return kNegInf;
  const VectorXd r = llt.matrixL().solve(x - mean);
  const double log_det = 2.0 * llt.matrixL().nestedExpression().diagonal().array().log().sum();
  return -0.5 * static_cast<double>(x.size()) * kLog2Pi - 0.5 * log_det - 0.5 * r.squaredNorm();
}

double log_prior(const PriorSpec& p, const ParameterState& s) {
  const double a = log_prior_alpha(p, s.alpha);
  const double v = log_prior_sigma_sq(p, s.sigma_sq);
  const double w = log_prior_w(p, s.w);
  if (!std::isfinite(a) || !std::isfinite(v) || !std::isfinite(w)) return kNegInf;
  return a + v + w + log_normal(s.beta_length, p.beta_length_mean, p.beta_length_sd) +
         log_normal(s.beta_voltage, p.beta_voltage_mean, p.beta_voltage_sd) + log_normal(s.m, p.m_mean, p.m_sd);
}

double log_posterior(const ModelSpec& spec, const ParameterState& state) {
  const double prior = log_prior(spec.priors, state);
  if (!std::isfinite(prior)) return kNegInf;
  if ((state.lambda.array() <= 0.0).any()) return kNegInf;
  return log_likelihood(spec, state) + log_rate_layer(spec, state) + log_intercept_layer(spec, state) + prior;
}

GammaParams lambda_conditional(const ModelSpec& spec, const ParameterState& state, Index i) {
  const double log_mu = log_mean_rates(spec, state)(i);
  return {state.alpha + spec.counts(i), state.alpha * std::exp(-log_mu) + spec.exposure(i)};
}

double log_marginal_counts(const ModelSpec& spec, const VectorXd& log_mu, double alpha) {
  const double log_alpha = std::log(alpha);
  const double lg_alpha = std::lgamma(alpha);
  double total = 0.0;
  for (Index i = 0; i < spec.n(); ++i) {
    const double n = spec.counts(i);
    const double t = spec.exposure(i);
    const double log_beta = log_alpha - log_mu(i);
    const double beta = std::exp(log_beta);
    double term = alpha * log_beta - (alpha + n) * std::log(beta + t);
    if (n > 0.0) term += n * std::log(t) - std::lgamma(n + 1.0) + std::lgamma(alpha + n) - lg_alpha;
    total += term;
  }
  return total;
}

CollapsedPosterior::CollapsedPosterior(const ModelSpec& spec, FreeMask mask, ParameterState fixed)
    : spec_(&spec), mask_(mask), fixed_(std::move(fixed)), n_latent_(mask.intercepts ? spec.n() : 0) {
  spec.validate();
  if (fixed_.z.size() != spec.n()) fixed_.z = VectorXd::Zero(spec.n());
  if (fixed_.lambda.size() != spec.n()) fixed_.lambda = VectorXd::Ones(spec.n());
  for (int k = 0; k < kHyperCount; ++k) {
    if (mask.hyper[static_cast<std::size_t>(k)]) free_hyper_.push_back(k);
  }
}

VectorXd CollapsedPosterior::pack(const ParameterState& s) const {
  VectorXd q(dim());
  if (n_latent_) q.head(n_latent_) = s.z;
  Index pos = n_latent_;
  for (int k : free_hyper_) {
    switch (k) {
      case kM: q(pos) = s.m; break;
      case kBetaLength: q(pos) = s.beta_length; break;
      case kBetaVoltage: q(pos) = s.beta_voltage; break;
      case kLogAlpha: q(pos) = std::log(s.alpha); break;
      case kLogSigmaSq: q(pos) = std::log(s.sigma_sq); break;
      case kLogitW: q(pos) = std::log(s.w) - std::log1p(-s.w); break;
    }
    ++pos;
  }
  return q;
}

ParameterState CollapsedPosterior::unpack(const VectorXd& q) const {
  ParameterState s = fixed_;
  if (n_latent_) s.z = q.head(n_latent_);
  Index pos = n_latent_;
  for (int k : free_hyper_) {
    const double v = q(pos++);
    switch (k) {
      case kM: s.m = v; break;
      case kBetaLength: s.beta_length = v; break;
      case kBetaVoltage: s.beta_voltage = v; break;
      case kLogAlpha: s.alpha = std::exp(v); break;
      case kLogSigmaSq: s.sigma_sq = std::exp(v); break;
      case kLogitW: s.w = logistic(v); break;
    }
  }
  return s;
}

double CollapsedPosterior::log_density(const VectorXd& q) const { return evaluate(q, nullptr); }

double CollapsedPosterior::log_density_gradient(const VectorXd& q, VectorXd& gradient) const {
  return evaluate(q, &gradient);
}

double CollapsedPosterior::evaluate(const VectorXd& q, VectorXd* gradient_out) const {
  const ModelSpec& spec = *spec_;
  const ParameterState s = unpack(q);
  const double alpha = s.alpha;
  if (!(alpha > 0.0) || !(s.sigma_sq > 0.0) || !(s.w > 0.0 && s.w < 1.0) || !q.allFinite()) return kNegInf;

  const Eigen::ArrayXd d = s.w + (1.0 - s.w) * spec.Lambda.array();
  const Eigen::ArrayXd scale = (s.sigma_sq * d).sqrt();
  const VectorXd offset = spec.Q_inv_t * (scale * s.z.array()).matrix();
  const VectorXd log_mu = (offset + s.beta_length * spec.x_length + s.beta_voltage * spec.x_voltage).array() + s.m;

  double lp = log_marginal_counts(spec, log_mu, alpha);
  if (n_latent_) lp -= 0.5 * s.z.squaredNorm();
  const PriorSpec& p = spec.priors;
  for (int k : free_hyper_) {
    switch (k) {
      case kM: lp += log_normal(s.m, p.m_mean, p.m_sd); break;
      case kBetaLength: lp += log_normal(s.beta_length, p.beta_length_mean, p.beta_length_sd); break;
      case kBetaVoltage: lp += log_normal(s.beta_voltage, p.beta_voltage_mean, p.beta_voltage_sd); break;
      case kLogAlpha: lp += log_prior_alpha(p, alpha) + std::log(alpha); break;
      case kLogSigmaSq: lp += log_prior_sigma_sq(p, s.sigma_sq) + std::log(s.sigma_sq); break;
      case kLogitW: lp += log_prior_w(p, s.w) + std::log(s.w) + std::log1p(-s.w); break;
    }
  }
  if (!std::isfinite(lp)) return kNegInf;
  if (!gradient_out) return lp;

  VectorXd& gradient = *gradient_out;
  gradient.resize(dim());
  // d/d ln mu_i of the marginal count term, and its alpha derivative.
  VectorXd g_eta(spec.n());
  double d_alpha = 0.0;
  const bool alpha_free = mask_.hyper[kLogAlpha];
  const double psi_alpha = alpha_free ? digamma(alpha) : 0.0;
  const double log_alpha = std::log(alpha);
  for (Index i = 0; i < spec.n(); ++i) {
    const double n = spec.counts(i);
    const double t = spec.exposure(i);
    const double beta = std::exp(log_alpha - log_mu(i));
    const double frac = beta / (beta + t);
    g_eta(i) = -alpha + (alpha + n) * frac;
    if (alpha_free) {
      d_alpha += (log_alpha - log_mu(i)) + 1.0 - std::log(beta + t) - (alpha + n) * frac / alpha;
      if (n > 0.0) d_alpha += digamma(alpha + n) - psi_alpha;
    }
  }
  const VectorXd r = spec.Q_inv_t.transpose() * g_eta;
  const Eigen::ArrayXd rsz = r.array() * scale * s.z.array();
  if (n_latent_) gradient.head(n_latent_) = (scale * r.array()).matrix() - s.z;
  Index pos = n_latent_;
  for (int k : free_hyper_) {
    double g = 0.0;
    switch (k) {
      case kM: g = g_eta.sum() - (s.m - p.m_mean) / (p.m_sd * p.m_sd); break;
      case kBetaLength:
        g = g_eta.dot(spec.x_length) - (s.beta_length - p.beta_length_mean) / (p.beta_length_sd * p.beta_length_sd);
        break;
      case kBetaVoltage:
        g = g_eta.dot(spec.x_voltage) -
            (s.beta_voltage - p.beta_voltage_mean) / (p.beta_voltage_sd * p.beta_voltage_sd);
        break;
      case kLogAlpha:
        g = alpha * d_alpha - alpha * (alpha - p.alpha_location) / (p.alpha_scale * p.alpha_scale) + 1.0;
        break;
      case kLogSigmaSq:
        g = 0.5 * rsz.sum() - s.sigma_sq * s.sigma_sq / (p.sigma_sq_scale * p.sigma_sq_scale) + 1.0;
        break;
      case kLogitW: {
        const double d_w = (rsz * (1.0 - spec.Lambda.array()) / (2.0 * d)).sum() +
                           (p.w_a - 1.0) / s.w - (p.w_b - 1.0) / (1.0 - s.w);
        g = d_w * s.w * (1.0 - s.w) + 1.0 - 2.0 * s.w;
        break;
      }
    }
    gradient(pos++) = g;
  }
  return lp;
}

}  // namespace outrate
