#include "outrate/empirical.hpp"

#include "helpers.hpp"

#include "doctest.h"

#include <random>

using namespace outrate;

namespace {

CountMatrix one_row_counts(const std::vector<int>& row) {
  CountMatrix c;
  c.line_ids = {"X"};
  c.counts.resize(1, static_cast<Index>(row.size()));
  for (std::size_t k = 0; k < row.size(); ++k) c.counts(0, static_cast<Index>(k)) = row[k];
  c.exposure = VectorXd::Constant(1, static_cast<double>(row.size()));
  return c;
}

struct Generated {
  testing::Fixture f;
  SimDiag<double> sd;
  MatrixXd root;
  VectorXd mean;
};

Generated generated(double m, double bl, double bv, double s1, double s2) {
  Generated g{testing::make_fixture(500, 1), {}, {}, {}};
  g.sd = simdiag(g.f.kernels.district, g.f.kernels.network);
  const MatrixXd cov = s1 * g.f.kernels.district + s2 * g.f.kernels.network;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  g.root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  g.mean = (m + bl * g.f.covariates.length.array() + bv * g.f.covariates.voltage.array()).matrix();
  return g;
}

}  // namespace

TEST_CASE("response vector") {
  CHECK(response_vector(one_row_counts(std::vector<int>(14, 1))).y(0) == doctest::Approx(0.0));
  const ResponseVector r8 = response_vector(one_row_counts({1, 2, 4, 2, 1, 2, 2, 2, 2, 1, 3, 8, 6, 2}));
  CHECK(r8.y(0) == doctest::Approx(std::log(38.0 / 14.0)));

  CountMatrix c;
  c.line_ids = {"A", "B", "C"};
  c.counts.resize(3, 2);
  c.counts << 0, 0, 1, 3, 0, 2;
  c.exposure = VectorXd::Constant(3, 2.0);
  const ResponseVector r = response_vector(c);
  CHECK(r.fitted == std::vector<Index>{1, 2});
  CHECK(r.excluded == std::vector<Index>{0});
  CHECK(r.y(0) == doctest::Approx(std::log(2.0)));
  CHECK(r.y(1) == doctest::Approx(0.0));
}

TEST_CASE("profile likelihood matches a dense Gaussian") {
  const Generated g = generated(-1.5, 0.13, 0.12, 0.45, 0.42);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const VectorXd y = g.mean + g.root * VectorXd::NullaryExpr(g.mean.size(), [&] { return n01(rng); });
  Eigen::Vector3d beta;
  const double ll = profile_log_likelihood(y, g.f.covariates.length, g.f.covariates.voltage, g.sd, 0.3, 0.6, &beta);

  const Index n = y.size();
  MatrixXd x(n, 3);
  x << VectorXd::Ones(n), g.f.covariates.length, g.f.covariates.voltage;
  const MatrixXd cov = 0.3 * g.f.kernels.district + 0.6 * g.f.kernels.network;
  const Eigen::LDLT<MatrixXd> ldlt(cov);
  const Eigen::Vector3d gls = (x.transpose() * ldlt.solve(x)).ldlt().solve(x.transpose() * ldlt.solve(y));
  const VectorXd r = y - x * gls;
  const double dense = -0.5 * (n * std::log(2.0 * M_PI) + ldlt.vectorD().array().log().sum() + r.dot(ldlt.solve(r)));
  CHECK(ll == doctest::Approx(dense).epsilon(1e-9));
  CHECK((beta - gls).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("fit recovers generating values") {
  const Generated g = generated(-1.5, 0.13, 0.12, 0.45, 0.42);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n01;
  const VectorXd y = g.mean + g.root * VectorXd::NullaryExpr(g.mean.size(), [&] { return n01(rng); });
  const EmpiricalFit fit = fit_mle(y, g.f.covariates.length, g.f.covariates.voltage, g.sd);
  CHECK(fit.m == doctest::Approx(-1.5).epsilon(0.2));
  CHECK(std::abs(fit.beta_length - 0.13) < 0.1);
  CHECK(std::abs(fit.beta_voltage - 0.12) < 0.1);
  CHECK(std::abs(fit.sigma1_sq - 0.45) < 0.25);
  CHECK(std::abs(fit.sigma2_sq - 0.42) < 0.25);
  CHECK(fit.w == doctest::Approx(fit.sigma1_sq / fit.sigma_sq));
  CHECK_FALSE(fit.flat_direction);

  // No grid neighbour beats the optimum.
  for (double d1 : {-0.01, 0.0, 0.01}) {
    for (double d2 : {-0.01, 0.0, 0.01}) {
      const double ll = profile_log_likelihood(y, g.f.covariates.length, g.f.covariates.voltage, g.sd,
                                               fit.sigma1_sq + d1, fit.sigma2_sq + d2);
      CHECK(ll <= fit.log_likelihood + 1e-9);
    }
  }

  const ResidualReport res = pearson_residuals(fit, y, g.f.covariates.length, g.f.covariates.voltage, g.sd);
  const VectorXd p = res.pearson;
  const double mu = p.mean();
  const double var = (p.array() - mu).square().mean();
  const double skew = (p.array() - mu).cube().mean() / std::pow(var, 1.5);
  const double kurt = (p.array() - mu).pow(4).mean() / (var * var) - 3.0;
  CHECK(std::abs(skew) < 0.3);
  CHECK(std::abs(kurt) < 0.6);
  CHECK(res.qq_theoretical.size() == p.size());
  CHECK(std::is_sorted(res.qq_empirical.data(), res.qq_empirical.data() + res.qq_empirical.size()));
}

TEST_CASE("identical kernels leave the variance split unidentified") {
  const Generated g = generated(-1.5, 0.13, 0.12, 0.45, 0.42);
  const SimDiag<double> same = simdiag(g.f.kernels.district, g.f.kernels.district);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  const VectorXd y = g.mean + g.root * VectorXd::NullaryExpr(g.mean.size(), [&] { return n01(rng); });
  const EmpiricalFit fit = fit_mle(y, g.f.covariates.length, g.f.covariates.voltage, same);
  CHECK(fit.flat_direction);
}

TEST_CASE("perfect fit has zero residuals") {
  const Generated g = generated(-1.5, 0.13, 0.12, 0.45, 0.42);
  EmpiricalFit fit;
  fit.m = -1.5;
  fit.beta_length = 0.13;
  fit.beta_voltage = 0.12;
  fit.sigma1_sq = 0.45;
  fit.sigma2_sq = 0.42;
  const ResidualReport r = pearson_residuals(fit, g.mean, g.f.covariates.length, g.f.covariates.voltage, g.sd);
  CHECK(r.raw.cwiseAbs().maxCoeff() < 1e-10);
  CHECK(r.pearson.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("submatrix selection") {
  MatrixXd m(3, 3);
  m << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const MatrixXd s = select_square(m, {0, 2});
  CHECK(s == (MatrixXd(2, 2) << 1, 3, 7, 9).finished());
  CHECK(select(Eigen::Vector3d(1, 2, 3), {2}) == VectorXd::Constant(1, 3.0));
}
