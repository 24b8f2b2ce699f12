#pragma once

#include "outrate/error.hpp"
#include "outrate/types.hpp"

#include <cmath>

namespace outrate {

/// District similarity: exp(-||phi_i - phi_j||^2 - 1[i != j]), unit diagonal.
template <typename Derived>
Mat<typename Derived::Scalar> district_kernel(const Eigen::MatrixBase<Derived>& features) {
  using Scalar = typename Derived::Scalar;
  const Index n = features.rows();
  Mat<Scalar> k(n, n);
  for (Index j = 0; j < n; ++j) {
    k(j, j) = Scalar(1);
    for (Index i = j + 1; i < n; ++i) {
      const Scalar v = std::exp(-(features.row(i) - features.row(j)).squaredNorm() - Scalar(1));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// Network proximity: exp(-rate * d / unit); infinite distances map to 0.
template <typename Derived>
Mat<typename Derived::Scalar> network_kernel(const Eigen::MatrixBase<Derived>& distances,
                                             typename Derived::Scalar rate = 2,
                                             typename Derived::Scalar unit = 1) {
  using Scalar = typename Derived::Scalar;
  if (!(rate > Scalar(0)) || !(unit > Scalar(0))) throw ValidationError("kernel rate and unit must be positive");
  if ((distances.array() < Scalar(0)).any()) throw ValidationError("negative network distance");
  // vectorized exp(-inf) can come out denormal rather than 0
  Mat<Scalar> k = (distances.array() == std::numeric_limits<Scalar>::infinity())
                      .select(Scalar(0), (-(rate / unit) * distances.array()).exp())
                      .matrix();
  k.diagonal().setOnes();
  return k;
}

template <typename Scalar>
struct KernelSet {
  Mat<Scalar> district;  // Sigma_1
  Mat<Scalar> network;   // Sigma_2
};

// w * Sigma_1 + (1 - w) * Sigma_2 for 0 < w < 1.
template <typename Scalar>
Mat<Scalar> combine(const KernelSet<Scalar>& kernels, Scalar w) {
  if (!(w > Scalar(0) && w < Scalar(1))) throw ValidationError("kernel weight must lie strictly inside (0, 1)");
  return w * kernels.district + (Scalar(1) - w) * kernels.network;
}

/// Simultaneous diagonalization of an SPD/PSD pair:
///   Q^T Sigma_1 Q = I,  Q^T Sigma_2 Q = diag(Lambda).
/// With Sigma_1 = C C^T and C^{-1} Sigma_2 C^{-T} = U diag(Lambda) U^T,
/// Q = C^{-T} U and its inverse transpose is C U.
template <typename Scalar>
struct SimDiag {
  Mat<Scalar> Q;
  Vec<Scalar> Lambda;       // ascending
  Mat<Scalar> Q_inv_t;      // Q^{-T} = C U, maps whitened coordinates back
  Scalar log_abs_det_q = 0;  // ln |det Q| = -sum ln C_ii
  Scalar jitter = 0;        // diagonal jitter added to Sigma_1, 0 if none
  Index clipped = 0;        // negative eigenvalues of Sigma_2 clipped to zero
  Scalar min_raw_eigenvalue = 0;
};

template <typename Scalar>
SimDiag<Scalar> simdiag(const Mat<Scalar>& sigma1, const Mat<Scalar>& sigma2) {
  const Index n = sigma1.rows();
  if (sigma1.cols() != n || sigma2.rows() != n || sigma2.cols() != n) {
    throw ValidationError("simdiag: kernel dimensions disagree");
  }
  SimDiag<Scalar> out;
  Eigen::LLT<Mat<Scalar>> llt(sigma1);
  if (llt.info() != Eigen::Success) {
    bool ok = false;
    for (Scalar eps = Scalar(1e-10); eps <= Scalar(1.0000001e-6); eps *= Scalar(10)) {
      llt.compute(sigma1 + eps * Mat<Scalar>::Identity(n, n));
      if (llt.info() == Eigen::Success) {
        out.jitter = eps;
        ok = true;
        break;
      }
    }
    if (!ok) throw SingularKernelError("district kernel is not positive definite after maximum jitter");
  }
  const Mat<Scalar> c = llt.matrixL();
  // M = C^{-1} Sigma_2 C^{-T}
  Mat<Scalar> tmp = c.template triangularView<Eigen::Lower>().solve(sigma2);
  Mat<Scalar> m = c.template triangularView<Eigen::Lower>().solve(tmp.transpose());
  m = Scalar(0.5) * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(m);
  if (eig.info() != Eigen::Success) throw SingularKernelError("eigendecomposition failed");
  Mat<Scalar> u = eig.eigenvectors();
  for (Index k = 0; k < n; ++k) {
    for (Index i = 0; i < n; ++i) {
      if (std::abs(u(i, k)) > Scalar(1e-12)) {
        if (u(i, k) < Scalar(0)) u.col(k) *= Scalar(-1);
        break;
      }
    }
  }
  out.Lambda = eig.eigenvalues();
  out.min_raw_eigenvalue = n > 0 ? out.Lambda.minCoeff() : Scalar(0);
  for (Index k = 0; k < n; ++k) {
    if (out.Lambda(k) < Scalar(0)) {
      out.Lambda(k) = Scalar(0);
      ++out.clipped;
    }
  }
  out.Q = c.transpose().template triangularView<Eigen::Upper>().solve(u);
  out.Q_inv_t = c * u;
  out.log_abs_det_q = -c.diagonal().array().log().sum();
  return out;
}

template <typename Derived>
typename Derived::Scalar min_eigenvalue(const Eigen::MatrixBase<Derived>& symmetric) {
  using Scalar = typename Derived::Scalar;
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(symmetric, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

// Mean off-diagonal row sum; near zero means the kernel is close to identity.
template <typename Derived>
typename Derived::Scalar off_diagonal_mass(const Eigen::MatrixBase<Derived>& kernel) {
  const Index n = kernel.rows();
  if (n == 0) return 0;
  return (kernel.sum() - kernel.trace()) / static_cast<typename Derived::Scalar>(n);
}

}  // namespace outrate
