#include "outrate/error.hpp"
#include "outrate/bayes.hpp"

#include "helpers.hpp"

#include "doctest.h"

#include <random>

using namespace outrate;

namespace {

ModelSpec small_model(Index n = 8, int years = 5) {
  const testing::Fixture f = testing::make_fixture(n, years, 11);
  return make_model(f.data.counts, f.covariates, simdiag(f.kernels.district, f.kernels.network));
}

ParameterState random_state(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u(0.2, 0.8);
  ParameterState s;
  s.alpha = 0.5 + u(rng) * 2.0;
  s.beta_length = 0.1 * n01(rng);
  s.beta_voltage = 0.1 * n01(rng);
  s.m = -1.5 + 0.3 * n01(rng);
  s.sigma_sq = u(rng);
  s.w = u(rng);
  s.z = VectorXd::NullaryExpr(spec.n(), [&] { return n01(rng); });
  s.lambda = VectorXd::NullaryExpr(spec.n(), [&] { return 0.2 + u(rng); });
  return s;
}

// 2-line model with explicit kernels.
ModelSpec two_line_model(const MatrixXd& s1, const MatrixXd& s2) {
  CountMatrix c;
  c.line_ids = {"A", "B"};
  c.counts.resize(2, 1);
  c.counts << 1, 3;
  c.exposure = VectorXd::Ones(2);
  Covariates cv{Eigen::Vector2d(0.3, -0.4), Eigen::Vector2d(1.0, 2.0)};
  return make_model(c, cv, simdiag(s1, s2));
}

}  // namespace

TEST_CASE("Poisson log-likelihood") {
  ModelSpec spec = two_line_model(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2));
  spec.counts << 0, 2;
  spec.exposure << 1, 1;
  ParameterState s;
  s.z = VectorXd::Zero(2);
  s.lambda = Eigen::Vector2d(1.0, 2.0);
  const double l0 = -1.0, l1 = std::log(2.0) - 2.0;
  CHECK(log_likelihood(spec, s) == doctest::Approx(l0 + l1));
  CHECK(l1 == doctest::Approx(-1.3069).epsilon(1e-4));
  s.lambda(0) = 0.0;
  CHECK_THROWS_AS(log_likelihood(spec, s), ValidationError);
}

TEST_CASE("rate layer") {
  const ModelSpec spec = small_model();
  ParameterState s = random_state(spec, 1);
  s.alpha = 1.0;
  const VectorXd mu = mean_rates(spec, s);
  double expected = 0.0;
  for (Index i = 0; i < spec.n(); ++i) expected += -std::log(mu(i)) - s.lambda(i) / mu(i);
  CHECK(log_rate_layer(spec, s) == doctest::Approx(expected));

  // Prior draws from the layer have mean mu and variance mu^2 / alpha.
  s.alpha = 2.5;
  ModelSpec empty = spec;
  empty.counts.setZero();
  empty.exposure.setZero();
  const GammaParams g = lambda_conditional(empty, s, 0);
  const double mu0 = mean_rates(spec, s)(0);
  CHECK(g.shape == doctest::Approx(2.5));
  CHECK(g.rate == doctest::Approx(2.5 / mu0));
  std::mt19937_64 rng(2);
  std::gamma_distribution<double> draw(g.shape, 1.0 / g.rate);
  const int n = 1000000;
  double sum = 0.0, sum2 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double x = draw(rng);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n, var = sum2 / n - mean * mean;
  CHECK(std::abs(mean / mu0 - 1.0) < 0.005);
  CHECK(std::abs(var / (mu0 * mu0 / 2.5) - 1.0) < 0.02);
}

TEST_CASE("whitened intercept density equals the dense multivariate normal") {
  MatrixXd s1(2, 2), s2(2, 2);
  s1 << 1, 0.37, 0.37, 1;
  s2 << 1, 0.2, 0.2, 1;
  const ModelSpec spec = two_line_model(s1, s2);
  const Eigen::Vector2d beta0(-1.2, -0.4);
  for (double w : {0.1, 0.52, 0.9}) {
    const double dense = log_mvn_density(beta0, Eigen::Vector2d::Constant(-1.5), 0.7 * (w * s1 + (1 - w) * s2));
    CHECK(log_intercept_density(spec, beta0, -1.5, 0.7, w) == doctest::Approx(dense).epsilon(1e-12));
    CHECK(std::abs(log_intercept_density(spec, beta0, -1.5, 0.7, w) - dense) < 1e-10);
  }
  CHECK(log_intercept_density(spec, beta0, -1.5, 0.0, 0.5) == kNegInf);

  // Identity kernels: independent normal terms.
  const ModelSpec id = two_line_model(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2));
  const double sd = std::sqrt(0.7);
  double indep = 0.0;
  for (double b : {-1.2, -0.4}) indep += -0.5 * std::log(2 * M_PI) - std::log(sd) - 0.5 * std::pow((b + 1.5) / sd, 2);
  CHECK(log_intercept_density(id, beta0, -1.5, 0.7, 0.5) == doctest::Approx(indep));
}

TEST_CASE("intercepts are built from the whitened vector") {
  const ModelSpec spec = small_model();
  const ParameterState s = random_state(spec, 3);
  const VectorXd b0 = intercepts(spec, s);
  // Q^T (beta_0 - m 1) = s .* z
  const VectorXd back = spec.Q.transpose() * (b0.array() - s.m).matrix();
  CHECK((back - intercept_scales(spec, s).cwiseProduct(s.z)).cwiseAbs().maxCoeff() < 1e-10);
  const VectorXd lm = log_mean_rates(spec, s);
  CHECK((lm - (b0 + s.beta_length * spec.x_length + s.beta_voltage * spec.x_voltage)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("priors") {
  const PriorSpec p;
  ParameterState a, b;
  a.z = b.z = VectorXd::Zero(1);
  a.w = 0.2;
  b.w = 0.9;
  CHECK(log_prior(p, a) == doctest::Approx(log_prior(p, b)));

  b = a;
  b.m = -0.5;
  b.beta_length = 1.13;
  // Gaussian ratios: ((a-m)^2 - (b-m)^2) / (2 sd^2)
  const double expected = (std::pow(a.m + 1.5, 2) - std::pow(-0.5 + 1.5, 2)) / 50.0 +
                          (std::pow(a.beta_length - 0.13, 2) - std::pow(1.13 - 0.13, 2)) / 50.0;
  CHECK(log_prior(p, b) - log_prior(p, a) == doctest::Approx(expected));

  b = a;
  b.sigma_sq = 1.0;
  a.sigma_sq = 0.5;
  CHECK(log_prior(p, b) - log_prior(p, a) == doctest::Approx((0.25 - 1.0) / 0.5));
  b.alpha = 2.0;
  a.alpha = 1.0;
  b.sigma_sq = 0.5;
  CHECK(log_prior(p, b) - log_prior(p, a) == doctest::Approx((std::pow(0.3, 2) - std::pow(1.3, 2)) / 128.0));

  a.alpha = 0.0;
  CHECK(log_prior(p, a) == kNegInf);
  a.alpha = 1.0;
  a.w = 1.0;
  CHECK(log_prior(p, a) == kNegInf);
}

TEST_CASE("posterior is additive over its layers") {
  const ModelSpec spec = small_model();
  const ParameterState a = random_state(spec, 4), b = random_state(spec, 5);
  const double da = log_posterior(spec, a), db = log_posterior(spec, b);
  const double parts = (log_likelihood(spec, b) - log_likelihood(spec, a)) +
                       (log_rate_layer(spec, b) - log_rate_layer(spec, a)) +
                       (log_intercept_layer(spec, b) - log_intercept_layer(spec, a)) +
                       (log_prior(spec.priors, b) - log_prior(spec.priors, a));
  CHECK(db - da == doctest::Approx(parts));
}

TEST_CASE("lambda conditional") {
  ModelSpec spec = two_line_model(MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2));
  ParameterState s;
  s.alpha = 1.0;
  s.m = 0.0;
  s.beta_length = s.beta_voltage = 0.0;
  s.z = VectorXd::Zero(2);
  spec.counts << 3, 3;
  spec.exposure << 2, 2;
  const GammaParams g = lambda_conditional(spec, s, 0);
  CHECK(g.shape == doctest::Approx(4.0));
  CHECK(g.rate == doctest::Approx(3.0));
  CHECK(g.mean() == doctest::Approx(4.0 / 3.0));

  // The conditional mode (shape - 1) / rate grows with N.
  double last = -1.0;
  for (int n = 0; n < 6; ++n) {
    spec.counts(0) = n;
    const GammaParams gn = lambda_conditional(spec, s, 0);
    const double mode = std::max(0.0, gn.shape - 1.0) / gn.rate;
    CHECK(mode >= last);
    if (n > 1) CHECK(mode > last);
    last = mode;
  }
  // Long exposure: the mean approaches N / t.
  spec.counts(0) = 5000;
  spec.exposure(0) = 1000;
  CHECK(lambda_conditional(spec, s, 0).mean() == doctest::Approx(5.0).epsilon(1e-3));
}

TEST_CASE("negative binomial marginal") {
  const ModelSpec spec = small_model();
  const ParameterState s = random_state(spec, 6);
  const VectorXd lm = log_mean_rates(spec, s);
  double expected = 0.0;
  for (Index i = 0; i < spec.n(); ++i) {
    const double n = spec.counts(i), mt = std::exp(lm(i)) * spec.exposure(i), a = s.alpha;
    expected += std::lgamma(a + n) - std::lgamma(a) - std::lgamma(n + 1) + a * std::log(a / (a + mt)) +
                n * std::log(mt / (a + mt));
  }
  CHECK(log_marginal_counts(spec, lm, s.alpha) == doctest::Approx(expected));

  // Direct integration over lambda for one line.
  ModelSpec one = spec;
  one.counts << 3, 0, 0, 0, 0, 0, 0, 0;
  const double mu = std::exp(lm(0)), a = s.alpha, t = one.exposure(0);
  double integral = 0.0;
  const int steps = 200000;
  const double top = 40.0, h = top / steps;
  for (int k = 0; k < steps; ++k) {
    const double x = (k + 0.5) * h;
    const double lpois = 3 * std::log(x * t) - x * t - std::lgamma(4.0);
    const double lgam = a * std::log(a / mu) - std::lgamma(a) + (a - 1) * std::log(x) - a * x / mu;
    integral += std::exp(lpois + lgam) * h;
  }
  VectorXd lm1 = VectorXd::Constant(1, lm(0));
  ModelSpec single = one;
  single.counts = VectorXd::Constant(1, 3.0);
  single.exposure = VectorXd::Constant(1, t);
  CHECK(std::exp(log_marginal_counts(single, lm1, a)) == doctest::Approx(integral).epsilon(1e-6));
}

TEST_CASE("collapsed posterior matches its layers up to a constant") {
  const ModelSpec spec = small_model();
  const CollapsedPosterior post(spec, FreeMask::all(), {});
  const ParameterState a = random_state(spec, 7), b = random_state(spec, 8);
  const VectorXd qa = post.pack(a), qb = post.pack(b);
  auto explicit_sum = [&](const ParameterState& s) {
    return log_marginal_counts(spec, log_mean_rates(spec, s), s.alpha) + log_intercept_layer(spec, s) +
           intercept_scales(spec, s).array().log().sum() + log_prior(spec.priors, s) + std::log(s.alpha) +
           std::log(s.sigma_sq) + std::log(s.w * (1 - s.w));
  };
  CHECK(post.log_density(qb) - post.log_density(qa) == doctest::Approx(explicit_sum(b) - explicit_sum(a)));
  const ParameterState round = post.unpack(qa);
  CHECK(round.alpha == doctest::Approx(a.alpha));
  CHECK(round.w == doctest::Approx(a.w));
  CHECK((round.z - a.z).norm() < 1e-12);
}

TEST_CASE("collapsed posterior gradient matches finite differences") {
  const ModelSpec spec = small_model(10, 3);
  ParameterState fixed = random_state(spec, 9);
  FreeMask partial = FreeMask::all();
  partial.hyper[kLogitW] = false;
  partial.hyper[kBetaVoltage] = false;
  for (const FreeMask& mask : {FreeMask::all(), partial}) {
    const CollapsedPosterior post(spec, mask, fixed);
    const VectorXd q = post.pack(random_state(spec, 10));
    VectorXd g;
    const double lp = post.log_density_gradient(q, g);
    CHECK(lp == doctest::Approx(post.log_density(q)));
    REQUIRE(g.size() == post.dim());
    for (Index k = 0; k < post.dim(); ++k) {
      const double h = 1e-5;
      VectorXd up = q, dn = q;
      up(k) += h;
      dn(k) -= h;
      const double fd = (post.log_density(up) - post.log_density(dn)) / (2 * h);
      CHECK(g(k) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("frozen quantities come from the fixed state") {
  const ModelSpec spec = small_model();
  const ParameterState fixed = random_state(spec, 12);
  const CollapsedPosterior post(spec, FreeMask::none(), fixed);
  CHECK(post.dim() == 0);
  const ParameterState s = post.unpack(VectorXd(0));
  CHECK(s.alpha == fixed.alpha);
  CHECK(s.z == fixed.z);
}

TEST_CASE("model validation") {
  ModelSpec spec = small_model();
  spec.exposure.resize(3);
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}
