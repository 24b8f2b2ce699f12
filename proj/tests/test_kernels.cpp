#include "outrate/error.hpp"
#include "outrate/kernels.hpp"

#include "doctest.h"

#include <random>

using namespace outrate;

namespace {

MatrixXd random_spd(Index n, std::mt19937_64& rng, double ridge = 0.1) {
  std::normal_distribution<double> d;
  const MatrixXd a = MatrixXd::NullaryExpr(n, n, [&] { return d(rng); });
  return a * a.transpose() / static_cast<double>(n) + ridge * MatrixXd::Identity(n, n);
}

void check_simdiag(const MatrixXd& s1, const MatrixXd& s2) {
  const SimDiag<double> sd = simdiag(s1, s2);
  const Index n = s1.rows();
  CHECK((sd.Q.transpose() * s1 * sd.Q - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((sd.Q.transpose() * s2 * sd.Q - MatrixXd(sd.Lambda.asDiagonal())).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK((sd.Q.transpose() * sd.Q_inv_t - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(sd.Lambda.minCoeff() >= 0.0);
  CHECK(sd.log_abs_det_q == doctest::Approx(std::log(std::abs(sd.Q.determinant()))));
}

}  // namespace

TEST_CASE("district kernel values") {
  MatrixXd phi(3, 4);
  phi << 1, 0, 0, 0,  //
      1, 0, 0, 0,     //
      0, 1, 0, 0;
  const MatrixXd k = district_kernel(phi);
  CHECK(k(0, 0) == 1.0);
  CHECK(k(0, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(k(0, 2) == doctest::Approx(std::exp(-3.0)));
  CHECK(k.isApprox(k.transpose()));
  CHECK(min_eigenvalue(k) > 0.0);
}

TEST_CASE("network kernel values") {
  MatrixXd d(3, 3);
  d << 0, 0.5, kInf, 0.5, 0, kInf, kInf, kInf, 0;
  const MatrixXd k = network_kernel(d);
  CHECK(k(0, 0) == 1.0);
  CHECK(k(0, 1) == doctest::Approx(std::exp(-1.0)));
  CHECK(k(0, 2) == 0.0);
  CHECK(network_kernel(d, 2.0, 0.5)(0, 1) == doctest::Approx(std::exp(-2.0)));
  CHECK_THROWS_AS(network_kernel(d, -1.0), ValidationError);
  CHECK(off_diagonal_mass(k) == doctest::Approx(2.0 * std::exp(-1.0) / 3.0));
}

TEST_CASE("kernel combination") {
  KernelSet<double> ks;
  ks.district = (MatrixXd(2, 2) << 1, 0.3679, 0.3679, 1).finished();
  ks.network = (MatrixXd(2, 2) << 1, 0.1, 0.1, 1).finished();
  const MatrixXd c = combine(ks, 0.52);
  CHECK(c(0, 0) == doctest::Approx(1.0));
  CHECK(c(0, 1) == doctest::Approx(0.52 * 0.3679 + 0.48 * 0.1));
  CHECK_THROWS_AS(combine(ks, 1.0), ValidationError);
  CHECK_THROWS_AS(combine(ks, 0.0), ValidationError);
  KernelSet<double> same{ks.district, ks.district};
  CHECK(combine(same, 0.5).isApprox(ks.district));
}

TEST_CASE("simultaneous diagonalization") {
  std::mt19937_64 rng(9);
  SUBCASE("identical kernels give unit eigenvalues") {
    const MatrixXd s = random_spd(6, rng);
    const SimDiag<double> sd = simdiag(s, s);
    CHECK((sd.Lambda.array() - 1.0).abs().maxCoeff() < 1e-10);
  }
  SUBCASE("identity first kernel reduces to an eigendecomposition") {
    const MatrixXd s2 = random_spd(5, rng);
    const SimDiag<double> sd = simdiag(MatrixXd(MatrixXd::Identity(5, 5)), s2);
    CHECK((sd.Q.transpose() * sd.Q - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-10);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s2);
    CHECK((sd.Lambda - eig.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("random pairs") {
    for (int rep = 0; rep < 20; ++rep) check_simdiag(random_spd(5, rng), random_spd(5, rng));
    check_simdiag(random_spd(50, rng), random_spd(50, rng));
  }
  SUBCASE("singular second kernel is clipped at zero") {
    MatrixXd s2 = MatrixXd::Ones(4, 4);
    s2(0, 1) = s2(1, 0) = 1.0 + 1e-13;
    const SimDiag<double> sd = simdiag(random_spd(4, rng), s2);
    CHECK(sd.Lambda.minCoeff() >= 0.0);
  }
  SUBCASE("semidefinite first kernel gets jitter") {
    MatrixXd s1 = MatrixXd::Identity(3, 3);
    s1(2, 2) = 0.0;
    const SimDiag<double> sd = simdiag(s1, random_spd(3, rng));
    CHECK(sd.jitter > 0.0);
  }
  SUBCASE("indefinite first kernel fails") {
    MatrixXd s1 = MatrixXd::Identity(3, 3);
    s1(2, 2) = -1.0;
    CHECK_THROWS_AS(simdiag(s1, random_spd(3, rng)), SingularKernelError);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(simdiag(random_spd(3, rng), random_spd(4, rng)), ValidationError);
  }
}

TEST_CASE("kernels are generic over the scalar type") {
  Eigen::MatrixXf phi(2, 2);
  phi << 1, 0, 0, 1;
  const Eigen::MatrixXf k = district_kernel(phi);
  CHECK(k(0, 1) == doctest::Approx(std::exp(-3.0)).epsilon(1e-6));
  Eigen::MatrixXf d(2, 2);
  d << 0, 1, 1, 0;
  CHECK(network_kernel(d)(0, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-6));
}
