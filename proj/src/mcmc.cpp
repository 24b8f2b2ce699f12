#include "outrate/mcmc.hpp"

#include "outrate/csv.hpp"
#include "outrate/error.hpp"

#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>

namespace outrate {

namespace {

double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

double uniform01(Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return u(rng);
}

VectorXd normal_vector(Index n, Rng& rng) {
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = standard_normal(rng);
  return v;
}

bool metropolis_accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  return std::log(uniform01(rng)) < log_ratio;
}

}  // namespace

// ---------------------------------------------------------------------------
// Adaptive random-walk Metropolis

AdaptiveMetropolis::AdaptiveMetropolis(Index dim, double target_acceptance, double initial_sd)
    : dim_(dim), target_(target_acceptance), log_scale_(0.0), mean_(VectorXd::Zero(dim)),
      cov_(MatrixXd::Identity(dim, dim) * initial_sd * initial_sd) {
  if (dim <= 0) throw ValidationError("random-walk block needs a positive dimension");
  chol_.compute(cov_);
}

bool AdaptiveMetropolis::step(VectorXd& x, double& logp, const LogDensity& log_density, Rng& rng) {
  const VectorXd step = chol_.matrixL() * normal_vector(dim_, rng);
  const VectorXd proposal = x + std::exp(log_scale_) * step;
  const double lp = log_density(proposal);
  const double log_ratio = lp - logp;
  ++proposals_;
  const bool ok = metropolis_accept(log_ratio, rng);
  if (ok) {
    x = proposal;
    logp = lp;
    ++accepted_;
  }
  if (adapting_) {
    const double a = std::isnan(log_ratio) ? 0.0 : std::min(1.0, std::exp(std::min(log_ratio, 0.0)));
    const double gamma = 1.0 / std::pow(static_cast<double>(proposals_) + 1.0, 0.6);
    log_scale_ += gamma * (a - target_);
    log_scale_ = std::clamp(log_scale_, -20.0, 20.0);
    adapt(x, ok);
  }
  return ok;
}

void AdaptiveMetropolis::adapt(const VectorXd& x, bool) {
  ++n_seen_;
  const VectorXd delta = x - mean_;
  mean_ += delta / static_cast<double>(n_seen_);
  if (n_seen_ == 1) {
    empirical_ = MatrixXd::Zero(dim_, dim_);
    return;
  }
  empirical_ += delta * (x - mean_).transpose();
  const long warm = 20 * dim_ + 20;
  if (n_seen_ >= warm && n_seen_ % 10 == 0) {
    MatrixXd c = empirical_ / static_cast<double>(n_seen_ - 1);
    c *= 2.38 * 2.38 / static_cast<double>(dim_);
    c.diagonal().array() += 1e-10;
    Eigen::LLT<MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) {
      cov_ = c;
      chol_ = llt;
      if (n_seen_ == warm) log_scale_ = 0.0;
    }
  }
}

// ---------------------------------------------------------------------------
// Hamiltonian Monte Carlo

HamiltonianSampler::HamiltonianSampler(Index dim, Index n_diagonal, Settings settings)
    : dim_(dim), n_diag_(n_diagonal), settings_(settings), inv_diag_(VectorXd::Ones(n_diagonal)),
      inv_dense_(MatrixXd::Identity(dim - n_diagonal, dim - n_diagonal)),
      dense_chol_(MatrixXd::Identity(dim - n_diagonal, dim - n_diagonal)) {
  if (dim <= 0 || n_diagonal < 0 || n_diagonal > dim) throw ValidationError("invalid gradient block dimensions");
  window_mean_ = VectorXd::Zero(dim);
  window_m2_head_ = VectorXd::Zero(n_diag_);
  window_m2_tail_ = MatrixXd::Zero(dim - n_diag_, dim - n_diag_);
}

VectorXd HamiltonianSampler::velocity(const VectorXd& p) const {
  VectorXd v(dim_);
  v.head(n_diag_) = inv_diag_.cwiseProduct(p.head(n_diag_));
  v.tail(dim_ - n_diag_) = inv_dense_ * p.tail(dim_ - n_diag_);
  return v;
}

double HamiltonianSampler::kinetic(const VectorXd& p) const { return 0.5 * p.dot(velocity(p)); }

VectorXd HamiltonianSampler::draw_momentum(Rng& rng) const {
  VectorXd xi = normal_vector(dim_, rng);
  VectorXd p(dim_);
  p.head(n_diag_) = xi.head(n_diag_).cwiseQuotient(inv_diag_.cwiseSqrt());
  // inv_dense = L L^T, p = L^{-T} xi has covariance inv_dense^{-1}
  p.tail(dim_ - n_diag_) =
      dense_chol_.transpose().triangularView<Eigen::Upper>().solve(xi.tail(dim_ - n_diag_));
  return p;
}

void HamiltonianSampler::restart_dual_averaging() {
  mu_ = std::log(10.0 * epsilon_);
  h_bar_ = 0.0;
  log_eps_bar_ = 0.0;
  da_count_ = 0;
}

void HamiltonianSampler::initialize(const VectorXd& x, const LogDensityGradient& f, Rng& rng) {
  VectorXd g;
  const double lp0 = f(x, g);
  if (!std::isfinite(lp0)) throw SamplingError("initial point has no finite density", 0);
  epsilon_ = 0.1;
  int direction = 0;
  for (int k = 0; k < 60; ++k) {
    VectorXd p = draw_momentum(rng);
    const double h0 = -lp0 + kinetic(p);
    VectorXd q = x;
    VectorXd gq = g;
    p += 0.5 * epsilon_ * gq;
    q += epsilon_ * velocity(p);
    const double lp = f(q, gq);
    p += 0.5 * epsilon_ * gq;
    const double delta = std::isfinite(lp) ? h0 - (-lp + kinetic(p)) : kNegInf;
    const int want = delta > std::log(0.8) ? 1 : -1;
    if (direction == 0) direction = want;
    if (want != direction) break;
    epsilon_ = direction > 0 ? epsilon_ * 2.0 : epsilon_ * 0.5;
    if (epsilon_ > 1e3 || epsilon_ < 1e-8) break;
  }
  restart_dual_averaging();
}

void HamiltonianSampler::adapt_step(double accept_stat) {
  constexpr double gamma = 0.05;
  constexpr double t0 = 10.0;
  constexpr double kappa = 0.75;
  ++da_count_;
  const double count = static_cast<double>(da_count_);
  const double eta = 1.0 / (count + t0);
  h_bar_ = (1.0 - eta) * h_bar_ + eta * (settings_.target_acceptance - accept_stat);
  const double log_eps = std::clamp(mu_ - std::sqrt(count) / gamma * h_bar_, -25.0, 7.0);
  epsilon_ = std::exp(log_eps);
  const double weight = std::pow(count, -kappa);
  log_eps_bar_ = weight * log_eps + (1.0 - weight) * log_eps_bar_;
}

bool HamiltonianSampler::step(VectorXd& x, double& logp, VectorXd& grad, const LogDensityGradient& f, Rng& rng) {
  const double eps = epsilon_ * (0.9 + 0.2 * uniform01(rng));
  const int n_leap = std::clamp(static_cast<int>(std::ceil(settings_.trajectory_length / eps)), 1,
                                settings_.max_leapfrog);
  VectorXd p = draw_momentum(rng);
  const double h0 = -logp + kinetic(p);
  VectorXd q = x;
  VectorXd g = grad;
  double lp = logp;
  bool divergent = false;
  for (int k = 0; k < n_leap; ++k) {
    p += 0.5 * eps * g;
    q += eps * velocity(p);
    lp = f(q, g);
    if (!std::isfinite(lp)) {
      divergent = true;
      break;
    }
    p += 0.5 * eps * g;
  }
  double log_ratio = kNegInf;
  if (!divergent) {
    const double h1 = -lp + kinetic(p);
    log_ratio = h0 - h1;
    if (std::isnan(log_ratio) || -log_ratio > settings_.max_energy_error) divergent = true;
  }
  if (divergent) {
    ++divergences_;
    log_ratio = kNegInf;
  }
  const double accept_stat = divergent ? 0.0 : std::min(1.0, std::exp(std::min(log_ratio, 0.0)));
  ++proposals_;
  accept_stat_sum_ += accept_stat;
  const bool ok = !divergent && metropolis_accept(log_ratio, rng);
  if (ok) {
    x = q;
    logp = lp;
    grad = g;
    ++accepted_;
  }
  if (adapt_step_) adapt_step(accept_stat);
  return ok;
}

void HamiltonianSampler::collect(const VectorXd& x) {
  ++window_n_;
  const VectorXd delta = x - window_mean_;
  window_mean_ += delta / static_cast<double>(window_n_);
  const VectorXd delta2 = x - window_mean_;
  window_m2_head_ += delta.head(n_diag_).cwiseProduct(delta2.head(n_diag_));
  window_m2_tail_ += delta.tail(dim_ - n_diag_) * delta2.tail(dim_ - n_diag_).transpose();
}

void HamiltonianSampler::update_metric() {
  if (window_n_ >= 10) {
    const double n = static_cast<double>(window_n_);
    const double shrink = n / (n + 5.0);
    const double floor = 1e-3 * 5.0 / (n + 5.0);
    inv_diag_ = (shrink * window_m2_head_ / (n - 1.0)).array() + floor;
    MatrixXd dense = shrink * window_m2_tail_ / (n - 1.0);
    dense = 0.5 * (dense + dense.transpose()).eval();
    dense.diagonal().array() += floor;
    Eigen::LLT<MatrixXd> llt(dense);
    if (llt.info() == Eigen::Success) {
      inv_dense_ = dense;
      dense_chol_ = llt.matrixL();
    } else {
      inv_dense_ = dense.diagonal().asDiagonal();
      dense_chol_ = inv_dense_.diagonal().cwiseSqrt().asDiagonal();
    }
  }
  window_n_ = 0;
  window_mean_.setZero();
  window_m2_head_.setZero();
  window_m2_tail_.setZero();
  restart_dual_averaging();
}

void HamiltonianSampler::finish_adaptation() {
  if (da_count_ > 0) epsilon_ = std::exp(log_eps_bar_);
  adapt_step_ = false;
  divergences_ = 0;  // only report divergences after warm-up
}

// ---------------------------------------------------------------------------
// Samples

void ChainConfig::validate() const {
  if (n_chains < 1) throw ValidationError("need at least one chain");
  if (n_iterations < 1 || n_burnin < 0 || n_burnin >= n_iterations) {
    throw ValidationError("n_burnin must be nonnegative and smaller than n_iterations");
  }
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0) ||
      !(rwm_target_acceptance > 0.0 && rwm_target_acceptance < 1.0)) {
    throw ValidationError("target acceptance rates must lie in (0, 1)");
  }
  if (!(initial_window >= 0.0 && initial_window < 1.0)) throw ValidationError("initial window must lie in [0, 1)");
  double last = initial_window;
  for (double f : metric_windows) {
    if (!(f > last && f <= 1.0)) throw ValidationError("metric windows must increase within (initial_window, 1]");
    last = f;
  }
  if (!(trajectory_length > 0.0) || max_leapfrog < 1 || hyper_steps < 0 || ridge_steps < 0 || stuck_window < 1) {
    throw ValidationError("invalid sampler tuning settings");
  }
}

std::vector<std::string> parameter_names(Index n_lines) {
  std::vector<std::string> names{"alpha", "beta_length", "beta_voltage", "m", "sigma_sq", "w"};
  for (Index i = 0; i < n_lines; ++i) names.push_back("z[" + std::to_string(i) + "]");
  for (Index i = 0; i < n_lines; ++i) names.push_back("lambda[" + std::to_string(i) + "]");
  return names;
}

void append_state(const ParameterState& s, Eigen::Ref<VectorXd> row) {
  const Index n = s.z.size();
  row(0) = s.alpha;
  row(1) = s.beta_length;
  row(2) = s.beta_voltage;
  row(3) = s.m;
  row(4) = s.sigma_sq;
  row(5) = s.w;
  row.segment(6, n) = s.z;
  row.segment(6 + n, n) = s.lambda;
}

PosteriorSamples::PosteriorSamples(std::vector<std::string> names, std::vector<MatrixXd> chains)
    : names_(std::move(names)), chains_(std::move(chains)) {
  for (std::size_t k = 0; k < names_.size(); ++k) {
    if (!index_.emplace(names_[k], static_cast<Index>(k)).second) {
      throw ValidationError("duplicate parameter name " + names_[k]);
    }
  }
  for (const MatrixXd& c : chains_) {
    if (c.cols() != n_params() || c.rows() != chains_.front().rows()) {
      throw ValidationError("chains must share the same shape");
    }
  }
}

Index PosteriorSamples::n_lines() const { return (n_params() - 6) / 2; }

Index PosteriorSamples::index_of(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw ValidationError("unknown parameter " + name);
  return it->second;
}

std::vector<VectorXd> PosteriorSamples::traces(Index param) const {
  std::vector<VectorXd> out;
  out.reserve(chains_.size());
  for (const MatrixXd& c : chains_) out.emplace_back(c.col(param));
  return out;
}

VectorXd PosteriorSamples::pooled(Index param) const {
  VectorXd out(n_chains() * n_draws());
  for (Index c = 0; c < n_chains(); ++c) out.segment(c * n_draws(), n_draws()) = chain(c).col(param);
  return out;
}

ParameterState PosteriorSamples::state(Index c, Index draw) const {
  const auto row = chain(c).row(draw);
  const Index n = n_lines();
  ParameterState s;
  s.alpha = row(0);
  s.beta_length = row(1);
  s.beta_voltage = row(2);
  s.m = row(3);
  s.sigma_sq = row(4);
  s.w = row(5);
  s.z = row.segment(6, n).transpose();
  s.lambda = row.segment(6 + n, n).transpose();
  return s;
}

// ---------------------------------------------------------------------------
// Sampler

namespace {

struct ChainOutput {
  MatrixXd draws;
  std::vector<BlockStats> blocks;
  std::vector<std::string> warnings;
};

ParameterState initial_state(const ModelSpec& spec, const ChainConfig& config, Rng& rng) {
  const FreeMask& free = config.free;
  const ParameterState& frozen = config.frozen;
  const Index n = spec.n();
  ParameterState s = frozen;
  const auto jitter = [&](double sd) { return sd * standard_normal(rng); };
  s.m = free.hyper[kM] ? spec.init.m + jitter(0.2) : frozen.m;
  s.beta_length = free.hyper[kBetaLength] ? spec.init.beta_length + jitter(0.05) : frozen.beta_length;
  s.beta_voltage = free.hyper[kBetaVoltage] ? spec.init.beta_voltage + jitter(0.05) : frozen.beta_voltage;
  s.alpha = free.hyper[kLogAlpha] ? std::exp(jitter(0.3)) : frozen.alpha;
  s.sigma_sq = free.hyper[kLogSigmaSq] ? 0.5 * std::exp(jitter(0.3)) : frozen.sigma_sq;
  if (free.hyper[kLogitW]) {
    s.w = 1.0 / (1.0 + std::exp(-jitter(0.5)));
  } else {
    s.w = frozen.w;
  }
  if (free.intercepts) {
    s.z.resize(n);
    for (Index i = 0; i < n; ++i) s.z(i) = jitter(0.1);
  } else if (frozen.z.size() != n) {
    s.z = VectorXd::Zero(n);
  }
  s.lambda.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double raw = spec.exposure(i) > 0.0 ? spec.counts(i) / spec.exposure(i) : 0.0;
    s.lambda(i) = std::max(raw, 0.05) * std::exp(jitter(0.1));
  }
  return s;
}

void gibbs_lambda(const ModelSpec& spec, ParameterState& s, Rng& rng) {
  const VectorXd log_mu = log_mean_rates(spec, s);
  for (Index i = 0; i < spec.n(); ++i) {
    const double shape = s.alpha + spec.counts(i);
    const double rate = s.alpha * std::exp(-log_mu(i)) + spec.exposure(i);
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    double v = g(rng);
    // Guard against underflow for tiny shapes; the draw must stay in the support.
    if (!(v > 0.0)) v = std::numeric_limits<double>::min();
    s.lambda(i) = v;
  }
}

}  // namespace

bool ridge_exchange(const ModelSpec& spec, const ParameterState& from, double log_alpha, ParameterState& to,
                    double& log_jacobian) {
  const double a = std::exp(log_alpha);
  if (!std::isfinite(a) || !(a > 0.0)) return false;
  const double ta0 = boost::math::trigamma(from.alpha);
  const double ta = boost::math::trigamma(a);
  const double s2 = from.sigma_sq + ta0 - ta;
  if (!(s2 > 0.0) || !std::isfinite(s2)) return false;
  const VectorXd anchor = ((spec.counts.array() + 0.5) / spec.exposure.array()).log() -
                          from.beta_length * spec.x_length.array() - from.beta_voltage * spec.x_voltage.array();
  const double r = std::sqrt(ta / ta0);
  const VectorXd beta0 = anchor + r * (intercepts(spec, from) - anchor);
  to = from;
  to.alpha = a;
  to.sigma_sq = s2;
  to.z = (spec.Q.transpose() * (beta0.array() - from.m).matrix()).cwiseQuotient(intercept_scales(spec, to));
  const double half_n = 0.5 * static_cast<double>(spec.n());
  log_jacobian = (half_n + 1.0) * std::log(from.sigma_sq / s2) + half_n * std::log(ta / ta0);
  return true;
}

namespace {

ChainOutput run_one_chain(const ModelSpec& spec, const ChainConfig& config, int chain) {
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(chain)));
  ParameterState state = initial_state(spec, config, rng);
  const CollapsedPosterior post(spec, config.free, state);
  const Index dim = post.dim();
  const Index burn = config.n_burnin;

  // Indices of the scale/shape hyperparameters inside the packed vector.
  std::vector<Index> rw_index;
  Index alpha_pos = -1, sigma_pos = -1;
  {
    Index pos = post.n_latent();
    for (int k : post.free_hyper()) {
      if (k == kLogAlpha || k == kLogSigmaSq || k == kLogitW) rw_index.push_back(pos);
      if (k == kLogAlpha) alpha_pos = pos;
      if (k == kLogSigmaSq) sigma_pos = pos;
      ++pos;
    }
  }

  VectorXd q = post.pack(state);
  VectorXd grad;
  double logp = 0.0;
  const LogDensityGradient f = [&post](const VectorXd& x, VectorXd& g) { return post.log_density_gradient(x, g); };

  HamiltonianSampler::Settings hs;
  hs.target_acceptance = config.target_acceptance;
  hs.trajectory_length = config.trajectory_length;
  hs.max_leapfrog = config.max_leapfrog;
  std::optional<HamiltonianSampler> hmc;
  std::optional<AdaptiveMetropolis> rwm;
  std::optional<AdaptiveMetropolis> rwm_centered;  // same block, intercepts held fixed
  std::optional<AdaptiveMetropolis> ridge;         // alpha / sigma^2 / beta_0 exchange
  if (dim > 0) {
    logp = f(q, grad);
    if (!std::isfinite(logp)) throw SamplingError("initial state has zero posterior density", 0);
    hmc.emplace(dim, post.n_latent(), hs);
    hmc->initialize(q, f, rng);
    if (!rw_index.empty() && config.hyper_steps > 0) {
      rwm.emplace(static_cast<Index>(rw_index.size()), config.rwm_target_acceptance, 0.1);
      if (post.n_latent() > 0) {
        rwm_centered.emplace(static_cast<Index>(rw_index.size()), config.rwm_target_acceptance, 0.1);
      }
    }
    if (alpha_pos >= 0 && sigma_pos >= 0 && post.n_latent() > 0 && config.ridge_steps > 0) {
      ridge.emplace(1, config.rwm_target_acceptance, 0.3);
    }
  }

  // Warmup schedule.
  const long init_end = static_cast<long>(std::floor(config.initial_window * burn));
  std::vector<long> window_ends;
  for (double fr : config.metric_windows) window_ends.push_back(static_cast<long>(std::floor(fr * burn)));

  ChainOutput out;
  const Index n_keep = config.n_iterations - config.n_burnin;
  out.draws.resize(n_keep, 6 + 2 * spec.n());
  long hmc_rejections = 0;
  long rwm_rejections = 0;
  bool hmc_stuck = false;
  bool rwm_stuck = false;

  for (long it = 0; it < config.n_iterations; ++it) {
    if (hmc) {
      const bool ok = hmc->step(q, logp, grad, f, rng);
      if (std::isnan(logp)) throw SamplingError("posterior density evaluated to NaN", it);
      hmc_rejections = ok ? 0 : hmc_rejections + 1;
      if (hmc_rejections >= config.stuck_window && !hmc_stuck) {
        hmc_stuck = true;
        out.warnings.push_back("chain " + std::to_string(chain) + ": gradient block rejected " +
                               std::to_string(config.stuck_window) + " consecutive proposals near iteration " +
                               std::to_string(it));
      }
      if (it < burn) {
        if (it >= init_end) {
          for (std::size_t k = 0; k < window_ends.size(); ++k) {
            const long begin = k == 0 ? init_end : window_ends[k - 1];
            if (it >= begin && it < window_ends[k]) {
              hmc->collect(q);
              if (it == window_ends[k] - 1) hmc->update_metric();
              break;
            }
          }
        }
        if (it == burn - 1) hmc->finish_adaptation();
      }
      if (rwm) {
        VectorXd sub(static_cast<Index>(rw_index.size()));
        for (std::size_t k = 0; k < rw_index.size(); ++k) sub(static_cast<Index>(k)) = q(rw_index[k]);
        VectorXd trial = q;
        const LogDensity g = [&](const VectorXd& y) {
          for (std::size_t k = 0; k < rw_index.size(); ++k) trial(rw_index[k]) = y(static_cast<Index>(k));
          return post.log_density(trial);
        };
        double lp_sub = logp;
        bool moved = false;
        for (int k = 0; k < config.hyper_steps; ++k) {
          const bool ok = rwm->step(sub, lp_sub, g, rng);
          moved = moved || ok;
          rwm_rejections = ok ? 0 : rwm_rejections + 1;
        }
        if (rwm_rejections >= config.stuck_window && !rwm_stuck) {
          rwm_stuck = true;
          out.warnings.push_back("chain " + std::to_string(chain) + ": hyperparameter block rejected " +
                                 std::to_string(config.stuck_window) + " consecutive proposals near iteration " +
                                 std::to_string(it));
        }
        if (moved) {
          for (std::size_t k = 0; k < rw_index.size(); ++k) q(rw_index[k]) = sub(static_cast<Index>(k));
        }
        if (rwm_centered) {
          // beta_0 fixed: u = s .* z is invariant, z follows the scales. The target in
          // these coordinates carries the Jacobian -sum ln s_k.
          const Index n_lat = post.n_latent();
          const VectorXd u = intercept_scales(spec, post.unpack(q)).cwiseProduct(q.head(n_lat));
          VectorXd trial_c = q;
          const LogDensity gc = [&](const VectorXd& y) {
            for (std::size_t k = 0; k < rw_index.size(); ++k) trial_c(rw_index[k]) = y(static_cast<Index>(k));
            const VectorXd sc = intercept_scales(spec, post.unpack(trial_c));
            if (!(sc.minCoeff() > 0.0) || !sc.allFinite()) return kNegInf;
            trial_c.head(n_lat) = u.cwiseQuotient(sc);
            return post.log_density(trial_c) - sc.array().log().sum();
          };
          for (std::size_t k = 0; k < rw_index.size(); ++k) sub(static_cast<Index>(k)) = q(rw_index[k]);
          double lp_c = gc(sub);
          bool moved_c = false;
          for (int k = 0; k < config.hyper_steps; ++k) moved_c = rwm_centered->step(sub, lp_c, gc, rng) || moved_c;
          if (moved_c) {
            gc(sub);
            q = trial_c;
            moved = true;
          }
          if (it == burn - 1) rwm_centered->freeze();
        }
        if (ridge) {
          // Only beta_0 + ln g is pinned per line, so alpha and sigma^2 trade off. The exchange
          // map is a one-parameter group in log alpha; the density along the orbit is pi times
          // the Jacobian from the starting point.
          const ParameterState s0 = post.unpack(q);
          ParameterState s1;
          VectorXd trial_r = q;
          const LogDensity gr = [&](const VectorXd& y) {
            double log_jac = 0.0;
            if (!ridge_exchange(spec, s0, y(0), s1, log_jac)) return kNegInf;
            trial_r = post.pack(s1);
            return post.log_density(trial_r) + log_jac;
          };
          VectorXd ya = q.segment(alpha_pos, 1);
          double lp_r = gr(ya);
          bool moved_r = false;
          for (int k = 0; k < config.ridge_steps; ++k) moved_r = ridge->step(ya, lp_r, gr, rng) || moved_r;
          if (moved_r) {
            gr(ya);
            q = trial_r;
            moved = true;
          }
          if (it == burn - 1) ridge->freeze();
        }
        if (moved) {
          logp = f(q, grad);
          if (!std::isfinite(logp)) throw SamplingError("posterior density is not finite after hyperparameter move", it);
        }
        if (it == burn - 1) rwm->freeze();
      }
      const VectorXd lam = state.lambda;
      state = post.unpack(q);
      state.lambda = lam;
    }
    gibbs_lambda(spec, state, rng);
    if (it >= burn) {
      VectorXd row(out.draws.cols());
      append_state(state, row);
      out.draws.row(it - burn) = row.transpose();
    }
  }

  if (hmc) {
    BlockStats b{"intercepts_and_hyperparameters", hmc->proposals(), hmc->accepted(), hmc->step_size(),
                 hmc->divergences()};
    out.blocks.push_back(b);
  }
  if (rwm) out.blocks.push_back({"scale_hyperparameters", rwm->proposals(), rwm->accepted(), rwm->scale(), 0});
  if (rwm_centered) {
    out.blocks.push_back({"scale_hyperparameters_centered", rwm_centered->proposals(), rwm_centered->accepted(),
                          rwm_centered->scale(), 0});
  }
  if (ridge) out.blocks.push_back({"alpha_sigma_ridge", ridge->proposals(), ridge->accepted(), ridge->scale(), 0});
  out.blocks.push_back({"lambda_gibbs", config.n_iterations * spec.n(), config.n_iterations * spec.n(), 0.0, 0});
  return out;
}

}  // namespace

PosteriorSamples run_chains(const ModelSpec& spec, const ChainConfig& config) {
  spec.validate();
  config.validate();
  std::vector<MatrixXd> draws;
  std::vector<std::vector<BlockStats>> blocks;
  std::vector<std::string> warnings;
  for (int c = 0; c < config.n_chains; ++c) {
    ChainOutput out = run_one_chain(spec, config, c);
    draws.push_back(std::move(out.draws));
    blocks.push_back(std::move(out.blocks));
    warnings.insert(warnings.end(), out.warnings.begin(), out.warnings.end());
  }
  PosteriorSamples samples(parameter_names(spec.n()), std::move(draws));
  samples.block_stats = std::move(blocks);
  samples.warnings = std::move(warnings);
  return samples;
}

// ---------------------------------------------------------------------------
// Diagnostics

namespace {

void check_traces(const std::vector<VectorXd>& chains, Index min_draws) {
  if (chains.empty()) throw DiagnosticError("no chains");
  for (const VectorXd& c : chains) {
    if (c.size() < min_draws) throw DiagnosticError("too few draws per chain for the diagnostic");
    if (c.size() != chains.front().size()) throw DiagnosticError("chains differ in length");
  }
}

struct Moments {
  VectorXd means;
  double within = 0.0;  // mean within-chain variance
  double between_over_n = 0.0;
};

Moments moments(const std::vector<VectorXd>& chains) {
  Moments m;
  const Index k = static_cast<Index>(chains.size());
  m.means.resize(k);
  for (Index c = 0; c < k; ++c) {
    m.means(c) = chains[static_cast<std::size_t>(c)].mean();
    m.within += sample_variance(chains[static_cast<std::size_t>(c)]);
  }
  m.within /= static_cast<double>(k);
  m.between_over_n = k > 1 ? sample_variance(m.means) : 0.0;
  return m;
}

}  // namespace

double rhat(const std::vector<VectorXd>& chains) {
  if (chains.size() < 2) throw DiagnosticError("R-hat needs at least two chains");
  check_traces(chains, 4);
  const Index half = chains.front().size() / 2;
  std::vector<VectorXd> split;
  for (const VectorXd& c : chains) {
    split.emplace_back(c.head(half));
    split.emplace_back(c.tail(half));
  }
  const Moments m = moments(split);
  if (!(m.within > 0.0)) throw DiagnosticError("zero within-chain variance");
  const double h = static_cast<double>(half);
  const double var_plus = (h - 1.0) / h * m.within + m.between_over_n;
  return std::max(1.0, std::sqrt(var_plus / m.within));
}

double effective_sample_size(const std::vector<VectorXd>& chains) {
  check_traces(chains, 4);
  const Index k = static_cast<Index>(chains.size());
  const Index n = chains.front().size();
  const double nd = static_cast<double>(n);
  const Moments m = moments(chains);
  if (!(m.within > 0.0)) throw DiagnosticError("zero within-chain variance");
  const double var_plus = (nd - 1.0) / nd * m.within + m.between_over_n;

  std::vector<VectorXd> centered;
  for (Index c = 0; c < k; ++c) {
    centered.emplace_back(chains[static_cast<std::size_t>(c)].array() - m.means(c));
  }
  const auto rho = [&](Index lag) {
    double acov = 0.0;
    for (const VectorXd& d : centered) acov += d.head(n - lag).dot(d.tail(n - lag)) / nd;
    acov /= static_cast<double>(k);
    return 1.0 - (m.within - acov) / var_plus;
  };
  double sum = 0.0;
  double prev = kInf;
  for (Index t = 0; t + 1 < n; t += 2) {
    double pair = rho(t) + rho(t + 1);
    if (!(pair > 0.0)) break;
    pair = std::min(pair, prev);
    sum += pair;
    prev = pair;
  }
  const double total = static_cast<double>(k) * nd;
  const double tau = -1.0 + 2.0 * sum;
  if (!(tau > 0.0)) return total;
  return std::min(total, total / tau);
}

VectorXd acf(const VectorXd& trace, Index max_lag) {
  const Index n = trace.size();
  if (max_lag < 0 || n < max_lag + 1) throw DiagnosticError("acf needs at least max_lag + 1 draws");
  const VectorXd d = trace.array() - trace.mean();
  if (!(d.squaredNorm() > 0.0)) throw DiagnosticError("acf of a constant trace");
  VectorXd out(max_lag + 1);
  out(0) = 1.0;
  for (Index lag = 1; lag <= max_lag; ++lag) {
    const double num = d.head(n - lag).dot(d.tail(n - lag));
    const double den = std::sqrt(d.head(n - lag).squaredNorm() * d.tail(n - lag).squaredNorm());
    out(lag) = den > 0.0 ? num / den : 0.0;
  }
  return out;
}

VectorXd acf(const std::vector<VectorXd>& chains, Index max_lag) {
  if (chains.empty()) throw DiagnosticError("no chains");
  VectorXd out = VectorXd::Zero(max_lag + 1);
  for (const VectorXd& c : chains) out += acf(c, max_lag);
  return out / static_cast<double>(chains.size());
}

double rhat(const PosteriorSamples& samples, const std::string& name) { return rhat(samples.traces(name)); }

double effective_sample_size(const PosteriorSamples& samples, const std::string& name) {
  return effective_sample_size(samples.traces(name));
}

ChainDiagnostics convergence_report(const PosteriorSamples& samples, const DiagnosticThresholds& thresholds) {
  ChainDiagnostics d;
  d.thresholds = thresholds;
  const double total = static_cast<double>(samples.n_chains() * samples.n_draws());
  for (Index p = 0; p < samples.n_params(); ++p) {
    const std::string& name = samples.names()[static_cast<std::size_t>(p)];
    const std::vector<VectorXd> tr = samples.traces(p);
    bool constant = true;
    const double first = tr.empty() || tr.front().size() == 0 ? 0.0 : tr.front()(0);
    for (const VectorXd& c : tr) constant = constant && (c.array() == first).all();
    if (constant) {
      d.skipped.push_back(name);
      continue;
    }
    ParameterDiagnostics pd;
    pd.name = name;
    try {
      pd.rhat = rhat(tr);
    } catch (const DiagnosticError&) {
      pd.rhat = kInf;
    }
    try {
      pd.ess = effective_sample_size(tr);
    } catch (const DiagnosticError&) {
      pd.ess = 0.0;
    }
    pd.ess_ratio = total > 0 ? pd.ess / total : 0.0;
    d.max_rhat = std::max(d.max_rhat, pd.rhat);
    d.min_ess_ratio = std::min(d.min_ess_ratio, pd.ess_ratio);
    d.parameters.push_back(pd);
  }
  for (const ParameterDiagnostics& pd : d.parameters) {
    if (!(pd.rhat < thresholds.max_rhat) || !(pd.ess_ratio > thresholds.min_ess_ratio)) d.offenders.push_back(pd);
  }
  std::sort(d.offenders.begin(), d.offenders.end(), [&](const auto& a, const auto& b) {
    const double sa = std::max(a.rhat / thresholds.max_rhat, thresholds.min_ess_ratio / std::max(a.ess_ratio, 1e-300));
    const double sb = std::max(b.rhat / thresholds.max_rhat, thresholds.min_ess_ratio / std::max(b.ess_ratio, 1e-300));
    if (sa != sb) return sa > sb;
    return a.name < b.name;
  });
  d.pass = !d.parameters.empty() && d.offenders.empty();
  return d;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr char kSamplesMagic[8] = {'O', 'R', 'S', 'M', 'P', '1', '\0', '\0'};

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ValidationError("truncated samples file");
  return v;
}

}  // namespace

void write_samples(std::ostream& out, const PosteriorSamples& samples) {
  out.write(kSamplesMagic, sizeof kSamplesMagic);
  put_u64(out, static_cast<std::uint64_t>(samples.n_chains()));
  put_u64(out, static_cast<std::uint64_t>(samples.n_draws()));
  put_u64(out, static_cast<std::uint64_t>(samples.n_params()));
  for (const std::string& name : samples.names()) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (const MatrixXd& c : samples.chains()) {
    out.write(reinterpret_cast<const char*>(c.data()), static_cast<std::streamsize>(c.size() * sizeof(double)));
  }
  if (!out) throw Error("failed writing samples");
}

PosteriorSamples read_samples(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kSamplesMagic, sizeof magic) != 0) throw ValidationError("not a samples file");
  const auto chains = static_cast<Index>(get_u64(in));
  const auto draws = static_cast<Index>(get_u64(in));
  const auto params = static_cast<Index>(get_u64(in));
  if (chains > 1'000'000 || params > 100'000'000) throw ValidationError("corrupt samples header");
  std::vector<std::string> names;
  for (Index p = 0; p < params; ++p) {
    const std::uint64_t len = get_u64(in);
    if (len > 4096) throw ValidationError("corrupt samples header");
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    names.push_back(std::move(s));
  }
  std::vector<MatrixXd> mats;
  for (Index c = 0; c < chains; ++c) {
    MatrixXd m(draws, params);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw ValidationError("truncated samples file");
    mats.push_back(std::move(m));
  }
  return PosteriorSamples(std::move(names), std::move(mats));
}

void write_samples_file(const std::string& path, const PosteriorSamples& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_samples(out, samples);
}

PosteriorSamples read_samples_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open samples file " + path);
  return read_samples(in);
}

void write_samples_csv(std::ostream& out, const PosteriorSamples& samples) {
  csv::Row header{"chain", "draw"};
  header.insert(header.end(), samples.names().begin(), samples.names().end());
  csv::write_row(out, header);
  for (Index c = 0; c < samples.n_chains(); ++c) {
    for (Index r = 0; r < samples.n_draws(); ++r) {
      csv::Row row{std::to_string(c), std::to_string(r)};
      for (Index p = 0; p < samples.n_params(); ++p) row.push_back(csv::format_double(samples.chain(c)(r, p)));
      csv::write_row(out, row);
    }
  }
}

void write_diagnostics_csv(std::ostream& out, const ChainDiagnostics& d) {
  csv::write_row(out, {"parameter", "rhat", "ess", "ess_ratio"});
  for (const ParameterDiagnostics& p : d.parameters) {
    csv::write_row(out, {p.name, csv::format_double(p.rhat), csv::format_double(p.ess), csv::format_double(p.ess_ratio)});
  }
}

}  // namespace outrate
