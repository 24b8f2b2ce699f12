#include "outrate/error.hpp"
#include "outrate/features.hpp"

#include "doctest.h"

#include <random>

using namespace outrate;

TEST_CASE("mad scale") {
  CHECK(mad_scale(Eigen::Vector3d(1, 2, 3)) == 1.0);
  CHECK(mad_scale(Eigen::Vector4d(0, 0, 1, 1)) == 0.5);
  CHECK_THROWS_AS(mad_scale(Eigen::Vector3d(5, 5, 5)), DegenerateScaleError);
}

TEST_CASE("length transform") {
  const Eigen::Vector3d l(std::exp(1.0), std::exp(2.0), std::exp(3.0));
  const VectorXd x = transform_lengths(l);
  CHECK(x(0) == doctest::Approx(1.0));
  CHECK(x(1) == doctest::Approx(2.0));
  CHECK(x(2) == doctest::Approx(3.0));

  const VectorXd lengths = (VectorXd(5) << 3.0, 7.5, 12.0, 40.0, 2.2).finished();
  const VectorXd base = transform_lengths(lengths);
  const double c = 4.0;
  const double mad = mad_scale(lengths.array().log().matrix());
  const VectorXd scaled = transform_lengths(c * lengths);
  for (Index i = 0; i < 5; ++i) CHECK(scaled(i) - base(i) == doctest::Approx(std::log(c) / mad));

  const VectorXd repeated = (VectorXd(6) << 5, 5, 5, 2, 9, 30).finished();
  CHECK(transform_lengths(repeated).allFinite());
  CHECK_THROWS_AS(transform_lengths((VectorXd(2) << 1.0, -1.0).finished()), ValidationError);
}

TEST_CASE("voltage transform") {
  // Two levels, equally frequent: SD = 135 * sqrt(4/3), MAD of V/SD = 135/SD, so x_V = V / 135.
  const Eigen::Vector4d v(230, 500, 230, 500);
  const VectorXd x = transform_voltages(v);
  CHECK(x(0) == doctest::Approx(230.0 / 135.0));
  CHECK(x(1) == doctest::Approx(500.0 / 135.0));

  const VectorXd v2 = (VectorXd(5) << 115, 230, 230, 345, 500).finished();
  const VectorXd a = transform_voltages(v2), b = transform_voltages(3.7 * v2);
  for (Index i = 0; i < 5; ++i) CHECK(a(i) == doctest::Approx(b(i)));
  CHECK_THROWS_AS(transform_voltages(Eigen::Vector3d(230, 230, 230)), DegenerateScaleError);
}

TEST_CASE("correlation report") {
  const VectorXd l = (VectorXd(6) << 1, 2, 3, 5, 8, 13).finished();
  Covariates cv{transform_lengths(l), transform_voltages(l)};
  const CorrelationReport same = correlation_report(l, l, cv);
  CHECK(same.raw == doctest::Approx(1.0));
  CHECK(same.transformed > 0.9);

  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> len(2.0, 0.9);
  std::discrete_distribution<int> level({0.2, 0.3, 0.3, 0.2});
  const double kv[] = {115, 230, 345, 500};
  const Index n = 10000;
  VectorXd ln(n), vn(n);
  for (Index i = 0; i < n; ++i) {
    ln(i) = len(rng);
    vn(i) = kv[level(rng)];
  }
  Covariates ci{transform_lengths(ln), transform_voltages(vn)};
  const CorrelationReport r = correlation_report(ln, vn, ci);
  CHECK(std::abs(r.raw) < 0.05);
  CHECK(std::abs(r.transformed) < 0.05);
}

TEST_CASE("district features") {
  const LineTable lines({{"A", "B1", "B2", 230, 5, {"N", "P"}}, {"B", "B2", "B3", 230, 5, {"E"}},
                         {"C", "B3", "B4", 230, 5, {"P"}}});
  const DistrictFeatures f = district_features(lines);
  CHECK(f.names == std::vector<std::string>{"E", "N", "P"});
  MatrixXd expected(3, 3);
  expected << 0, 1, 1, 1, 0, 0, 0, 0, 1;
  CHECK(f.membership == expected);
}

TEST_CASE("covariates follow the line table") {
  const LineTable lines({{"A", "B1", "B2", 230, 5, {"N"}}, {"B", "B2", "B3", 500, 50, {"E"}},
                         {"C", "B3", "B4", 115, 1, {"P"}}});
  const Covariates c = make_covariates(lines);
  CHECK(c.length.isApprox(transform_lengths(lines.lengths())));
  CHECK(c.voltage.isApprox(transform_voltages(lines.voltages())));
}
