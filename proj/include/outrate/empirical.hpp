#pragma once

#include "outrate/ingest.hpp"
#include "outrate/kernels.hpp"
#include "outrate/types.hpp"

#include <vector>

namespace outrate {

// y_i = ln(N_i / t_i) over lines with at least one outage.
struct ResponseVector {
  VectorXd y;
  std::vector<Index> fitted;    // rows of the count matrix used in the fit
  std::vector<Index> excluded;  // zero-count rows
};

ResponseVector response_vector(const CountMatrix& counts);

// Frequentist correlated-intercept regression
//   y ~ Normal(m 1 + beta_L x_L + beta_V x_V, s1 Sigma_1 + s2 Sigma_2).
struct EmpiricalFit {
  double m = 0.0;
  double beta_length = 0.0;
  double beta_voltage = 0.0;
  double sigma1_sq = 0.0;
  double sigma2_sq = 0.0;
  double w = 0.0;         // sigma1_sq / (sigma1_sq + sigma2_sq)
  double sigma_sq = 0.0;  // sigma1_sq + sigma2_sq
  double log_likelihood = 0.0;
  bool flat_direction = false;  // likelihood does not identify the split between the kernels
  Index n_fitted = 0;
  int iterations = 0;
};

struct FitOptions {
  double max_variance = 10.0;  // search box [0, max_variance]^2
  int grid_points = 101;
  int max_iterations = 200;
  double tolerance = 1e-10;    // on the kernel weight
  double flat_tolerance = 1e-6;
};

class OptimizerError : public Error {
 public:
  OptimizerError(const std::string& what, EmpiricalFit best) : Error(what), best_(best) {}
  const EmpiricalFit& best() const noexcept { return best_; }

 private:
  EmpiricalFit best_;
};

/// Profile (mean parameters maximized out) Gaussian log-likelihood at the
/// variance pair (s1, s2), constants included. `sd` diagonalizes the kernels of
/// the lines in `y`. Optionally returns the GLS mean parameters (m, beta_L, beta_V).
double profile_log_likelihood(const VectorXd& y, const VectorXd& x_length, const VectorXd& x_voltage,
                              const SimDiag<double>& sd, double sigma1_sq, double sigma2_sq,
                              Eigen::Vector3d* mean_params = nullptr);

/// Maximum likelihood fit. The mean parameters are solved by weighted least
/// squares in the diagonalized coordinates; the variance pair is found by a
/// grid scan plus golden-section search on the kernel weight with the total
/// variance in closed form.
EmpiricalFit fit_mle(const VectorXd& y, const VectorXd& x_length, const VectorXd& x_voltage,
                     const SimDiag<double>& sd, const FitOptions& options = {});

struct ResidualReport {
  VectorXd fitted;     // Q^T X beta
  VectorXd raw;        // Q^T y - Q^T X beta
  VectorXd pearson;    // raw_i / sqrt(s1 + s2 Lambda_i)
  VectorXd qq_theoretical;
  VectorXd qq_empirical;
};

ResidualReport pearson_residuals(const EmpiricalFit& fit, const VectorXd& y, const VectorXd& x_length,
                                 const VectorXd& x_voltage, const SimDiag<double>& sd);

// Principal submatrix / subvector over `rows`.
MatrixXd select_square(const MatrixXd& m, const std::vector<Index>& rows);
VectorXd select(const VectorXd& v, const std::vector<Index>& rows);

}  // namespace outrate
