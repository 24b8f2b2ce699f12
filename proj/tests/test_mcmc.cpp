#include "outrate/error.hpp"
#include "outrate/mcmc.hpp"

#include "helpers.hpp"

#include "doctest.h"

#include <random>
#include <sstream>

using namespace outrate;

namespace {

std::vector<VectorXd> normal_chains(int chains, Index n, std::uint64_t seed, double shift = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<VectorXd> out;
  for (int c = 0; c < chains; ++c) out.push_back(VectorXd::NullaryExpr(n, [&] { return d(rng) + c * shift; }));
  return out;
}

std::vector<VectorXd> ar1_chains(int chains, Index n, double rho, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<VectorXd> out;
  for (int c = 0; c < chains; ++c) {
    VectorXd x(n);
    x(0) = d(rng) / std::sqrt(1 - rho * rho);
    for (Index k = 1; k < n; ++k) x(k) = rho * x(k - 1) + d(rng);
    out.push_back(x);
  }
  return out;
}

ModelSpec toy_model(Index n = 12, int years = 5) {
  const testing::Fixture f = testing::make_fixture(n, years, 21);
  const PreparedModel p = prepare_model(f.lines, f.data.counts, f.distances);
  return p.spec;
}

}  // namespace

TEST_CASE("random-walk block on a standard normal") {
  const LogDensity f = [](const VectorXd& x) { return -0.5 * x.squaredNorm(); };
  AdaptiveMetropolis am(1, 0.3, 1.0);
  Rng rng(5);
  VectorXd x = VectorXd::Zero(1);
  double lp = f(x);
  for (int k = 0; k < 2000; ++k) am.step(x, lp, f, rng);
  am.freeze();
  const int n = 10000;
  VectorXd draws(n);
  for (int k = 0; k < n; ++k) {
    am.step(x, lp, f, rng);
    draws(k) = x(0);
  }
  const double mean = draws.mean();
  const double var = (draws.array() - mean).square().sum() / (n - 1);
  CHECK(std::abs(mean) < 0.05);
  CHECK(var > 0.9);
  CHECK(var < 1.1);
  CHECK(am.accepted() > 0);
}

TEST_CASE("gradient block on a standard normal") {
  const LogDensityGradient f = [](const VectorXd& x, VectorXd& g) {
    g = -x;
    return -0.5 * x.squaredNorm();
  };
  HamiltonianSampler hmc(3, 2, {});
  Rng rng(6);
  VectorXd x = VectorXd::Constant(3, 0.5), g;
  double lp = f(x, g);
  hmc.initialize(x, f, rng);
  for (int k = 0; k < 500; ++k) {
    hmc.step(x, lp, g, f, rng);
    hmc.collect(x);
  }
  hmc.update_metric();
  for (int k = 0; k < 500; ++k) hmc.step(x, lp, g, f, rng);
  hmc.finish_adaptation();
  const int n = 10000;
  MatrixXd draws(n, 3);
  for (int k = 0; k < n; ++k) {
    hmc.step(x, lp, g, f, rng);
    draws.row(k) = x.transpose();
  }
  for (Index j = 0; j < 3; ++j) {
    const double mean = draws.col(j).mean();
    const double var = (draws.col(j).array() - mean).square().sum() / (n - 1);
    CHECK(std::abs(mean) < 0.05);
    CHECK(var > 0.9);
    CHECK(var < 1.1);
  }
  CHECK(hmc.divergences() == 0);
}

TEST_CASE("R-hat") {
  CHECK(rhat(normal_chains(2, 10000, 1)) < 1.01);
  CHECK(rhat(normal_chains(2, 1000, 2, 10.0)) > 1.1);
  CHECK(rhat(normal_chains(4, 100, 3)) >= 1.0 - 1e-6);
  CHECK_THROWS_AS(rhat({VectorXd::Constant(50, 2.0), VectorXd::Constant(50, 2.0)}), DiagnosticError);
  CHECK_THROWS_AS(rhat(normal_chains(1, 100, 4)), DiagnosticError);
  // Split chains catch drift inside a chain.
  std::vector<VectorXd> drift = normal_chains(2, 2000, 5);
  for (auto& c : drift) c += VectorXd::LinSpaced(c.size(), 0.0, 6.0);
  CHECK(rhat(drift) > 1.1);
}

TEST_CASE("effective sample size") {
  const auto iid = normal_chains(2, 10000, 7);
  const double r = effective_sample_size(iid) / 20000.0;
  CHECK(r > 0.8);
  CHECK(r < 1.2);

  const auto ar = ar1_chains(2, 50000, 0.9, 8);
  const double ratio = effective_sample_size(ar) / 100000.0;
  CHECK(ratio == doctest::Approx(0.1 / 1.9).epsilon(0.5));
  CHECK(ratio == doctest::Approx(0.1 / 1.9).epsilon(0.15));

  // Alternating chains would give ESS > N; it is clamped.
  VectorXd alt(100);
  for (Index k = 0; k < 100; ++k) alt(k) = (k % 2 ? 1.0 : -1.0) + 1e-3 * static_cast<double>(k % 7);
  CHECK(effective_sample_size({alt, alt.reverse().eval()}) <= 200.0);
  CHECK_THROWS_AS(effective_sample_size({VectorXd::Ones(1), VectorXd::Zero(1)}), DiagnosticError);
}

TEST_CASE("autocorrelation") {
  VectorXd alt(1000);
  for (Index k = 0; k < alt.size(); ++k) alt(k) = k % 2 ? 1.0 : -1.0;
  const VectorXd a = acf(alt, 3);
  CHECK(a(0) == 1.0);
  CHECK(a(1) == doctest::Approx(-1.0));
  CHECK(a(2) == doctest::Approx(1.0));

  const VectorXd w = acf(normal_chains(1, 10000, 9)[0], 20);
  CHECK(w(0) == doctest::Approx(1.0));
  CHECK(w.tail(20).cwiseAbs().maxCoeff() < 0.05);

  const VectorXd r = acf(ar1_chains(2, 20000, 0.5, 10), 2);
  CHECK(r(1) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(r(2) == doctest::Approx(0.25).epsilon(0.2));
  CHECK_THROWS_AS(acf(VectorXd::Ones(10), 2), DiagnosticError);
}

TEST_CASE("chain configuration validation") {
  ChainConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_burnin = c.n_iterations;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.target_acceptance = 1.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = {};
  c.metric_windows = {0.9, 0.5};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("chains on a toy model") {
  const ModelSpec spec = toy_model();
  ChainConfig cc;
  cc.seed = 99;
  const PosteriorSamples s = run_chains(spec, cc);
  CHECK(s.n_chains() == 2);
  CHECK(s.n_draws() == cc.n_iterations - cc.n_burnin);
  CHECK(s.n_params() == 6 + 2 * spec.n());
  CHECK(s.n_lines() == spec.n());
  for (Index c = 0; c < s.n_chains(); ++c) {
    for (Index d = 0; d < s.n_draws(); d += 97) {
      const ParameterState st = s.state(c, d);
      CHECK(st.alpha > 0.0);
      CHECK(st.sigma_sq > 0.0);
      CHECK(st.w > 0.0);
      CHECK(st.w < 1.0);
      CHECK((st.lambda.array() > 0.0).all());
    }
  }
  const ChainDiagnostics d = convergence_report(s);
  CHECK(d.pass);
  CHECK(d.max_rhat < 1.06);
  CHECK(d.skipped.empty());
  REQUIRE(s.block_stats.size() == 2);
  for (const BlockStats& b : s.block_stats[0]) {
    if (b.name == "lambda_gibbs") CHECK(b.acceptance() == 1.0);
    if (b.name.rfind("scale_hyperparameters", 0) == 0) {
      CHECK(b.acceptance() > 0.15);
      CHECK(b.acceptance() < 0.5);
    }
  }

  SUBCASE("same seed, same draws") {
    const PosteriorSamples again = run_chains(spec, cc);
    for (Index c = 0; c < s.n_chains(); ++c) CHECK(s.chain(c) == again.chain(c));
    ChainConfig other = cc;
    other.seed = 100;
    CHECK_FALSE(run_chains(spec, other).chain(0) == s.chain(0));
  }
  SUBCASE("tight threshold always fails") {
    DiagnosticThresholds t;
    t.max_rhat = 1.0;
    CHECK_FALSE(convergence_report(s, t).pass);
  }
  SUBCASE("samples file round trip") {
    std::stringstream io;
    write_samples(io, s);
    const PosteriorSamples back = read_samples(io);
    CHECK(back.names() == s.names());
    for (Index c = 0; c < s.n_chains(); ++c) CHECK(back.chain(c) == s.chain(c));
    std::stringstream bad("not a samples file at all");
    CHECK_THROWS_AS(read_samples(bad), ValidationError);
  }
  SUBCASE("csv outputs") {
    std::ostringstream a, b;
    write_samples_csv(a, s);
    write_diagnostics_csv(b, d);
    CHECK(a.str().rfind("chain,draw,alpha", 0) == 0);
    CHECK(b.str().find("sigma_sq") != std::string::npos);
  }
}

TEST_CASE("a 20-iteration run fails the gate with offenders") {
  const ModelSpec spec = toy_model();
  ChainConfig cc;
  cc.n_iterations = 20;
  cc.n_burnin = 10;
  const ChainDiagnostics d = convergence_report(run_chains(spec, cc));
  CHECK_FALSE(d.pass);
  CHECK_FALSE(d.offenders.empty());
}

TEST_CASE("frozen quantities are skipped by the diagnostics") {
  const ModelSpec spec = toy_model(6, 3);
  ChainConfig cc;
  cc.n_iterations = 600;
  cc.n_burnin = 300;
  cc.free.hyper[kLogAlpha] = false;
  cc.frozen.alpha = 2.0;
  const PosteriorSamples s = run_chains(spec, cc);
  CHECK((s.pooled("alpha").array() == 2.0).all());
  const ChainDiagnostics d = convergence_report(s);
  CHECK(std::find(d.skipped.begin(), d.skipped.end(), "alpha") != d.skipped.end());
}

TEST_CASE("parameter names") {
  const auto names = parameter_names(2);
  CHECK(names == std::vector<std::string>{"alpha", "beta_length", "beta_voltage", "m", "sigma_sq", "w", "z[0]",
                                          "z[1]", "lambda[0]", "lambda[1]"});
}

TEST_CASE("alpha / sigma^2 exchange map") {
  const ModelSpec spec = toy_model(5, 4);
  ParameterState s;
  s.alpha = 3.0;
  s.sigma_sq = 0.6;
  s.w = 0.4;
  s.m = -1.2;
  s.beta_length = 0.1;
  s.beta_voltage = -0.2;
  s.z = (VectorXd(5) << 0.3, -1.1, 0.5, 2.0, -0.4).finished();
  const double eps = 0.35;

  ParameterState t, back;
  double lj = 0.0, lj_back = 0.0;
  REQUIRE(ridge_exchange(spec, s, std::log(s.alpha) + eps, t, lj));
  CHECK(t.alpha == doctest::Approx(s.alpha * std::exp(eps)));
  CHECK(t.sigma_sq > s.sigma_sq);  // less gamma noise, more intercept spread
  REQUIRE(ridge_exchange(spec, t, std::log(s.alpha), back, lj_back));
  CHECK(back.sigma_sq == doctest::Approx(s.sigma_sq).epsilon(1e-12));
  CHECK((back.z - s.z).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(lj + lj_back == doctest::Approx(0.0).epsilon(1e-12));

  // Jacobian of (log alpha, log sigma^2, z) -> image at a fixed shift, by central differences.
  const Index n = spec.n(), d = n + 2;
  const auto to_vec = [&](const ParameterState& p) {
    VectorXd v(d);
    v << std::log(p.alpha), std::log(p.sigma_sq), p.z;
    return v;
  };
  const auto map = [&](const VectorXd& v) {
    ParameterState p = s, out;
    p.alpha = std::exp(v(0));
    p.sigma_sq = std::exp(v(1));
    p.z = v.tail(n);
    double ignored = 0.0;
    REQUIRE(ridge_exchange(spec, p, v(0) + eps, out, ignored));
    return to_vec(out);
  };
  const VectorXd v0 = to_vec(s);
  MatrixXd jac(d, d);
  const double h = 1e-6;
  for (Index k = 0; k < d; ++k) {
    VectorXd up = v0, dn = v0;
    up(k) += h;
    dn(k) -= h;
    jac.col(k) = (map(up) - map(dn)) / (2 * h);
  }
  CHECK(std::log(std::abs(jac.fullPivLu().determinant())) == doctest::Approx(lj).epsilon(1e-6));

  ParameterState none;
  double unused = 0.0;
  CHECK_FALSE(ridge_exchange(spec, s, std::log(0.05), none, unused));  // sigma^2 would go negative
}

TEST_CASE("exchange block leaves the posterior unchanged") {
  const ModelSpec spec = toy_model(6, 3);
  ChainConfig on;
  on.n_chains = 4;
  on.n_iterations = 6000;
  on.n_burnin = 1000;
  on.seed = 41;
  ChainConfig off = on;
  off.ridge_steps = 0;
  off.seed = 42;
  const PosteriorSamples a = run_chains(spec, on), b = run_chains(spec, off);
  for (const char* name : {"alpha", "sigma_sq", "m", "w", "z[2]", "lambda[0]"}) {
    const VectorXd x = a.pooled(name), y = b.pooled(name);
    const double se = std::hypot(sample_sd(x) / std::sqrt(effective_sample_size(a, name)),
                                 sample_sd(y) / std::sqrt(effective_sample_size(b, name)));
    INFO(name);
    CHECK(std::abs(x.mean() - y.mean()) < 4.0 * se);
  }
}
