#include "outrate/empirical.hpp"

#include "outrate/stats.hpp"

#include <algorithm>
#include <numbers>

namespace outrate {

namespace {

struct Transformed {
  VectorXd y;
  MatrixXd x;
};

Transformed transform(const VectorXd& y, const VectorXd& x_length, const VectorXd& x_voltage,
                      const SimDiag<double>& sd) {
  const Index n = y.size();
  if (x_length.size() != n || x_voltage.size() != n || sd.Q.rows() != n) {
    throw ValidationError("empirical fit: dimensions of response, covariates and kernels disagree");
  }
  MatrixXd x(n, 3);
  x.col(0).setOnes();
  x.col(1) = x_length;
  x.col(2) = x_voltage;
  return {sd.Q.transpose() * y, sd.Q.transpose() * x};
}

struct Gls {
  Eigen::Vector3d beta;
  double weighted_rss = 0.0;
};

// Weighted least squares with per-coordinate variance proportional to `scale`.
Gls weighted_ls(const Transformed& t, const VectorXd& scale) {
  const VectorXd inv = scale.cwiseInverse();
  const Eigen::Matrix3d xtx = t.x.transpose() * inv.asDiagonal() * t.x;
  const Eigen::Vector3d xty = t.x.transpose() * inv.asDiagonal() * t.y;
  Gls g;
  g.beta = xtx.ldlt().solve(xty);
  const VectorXd r = t.y - t.x * g.beta;
  g.weighted_rss = (r.array().square() * inv.array()).sum();
  return g;
}

constexpr double kLog2Pi = 1.8378770664093454836;

struct WeightProfile {
  double log_likelihood = kNegInf;
  double sigma_sq = 0.0;
  Eigen::Vector3d beta = Eigen::Vector3d::Zero();
};

// Profile over (beta, sigma^2) at kernel weight w; sigma^2 in (0, max_variance].
WeightProfile profile_weight(const Transformed& t, const SimDiag<double>& sd, double w, double max_variance) {
  const Index n = t.y.size();
  const VectorXd d = (w + (1.0 - w) * sd.Lambda.array()).matrix();
  WeightProfile p;
  if (d.minCoeff() <= 1e-300) return p;
  const Gls g = weighted_ls(t, d);
  double s2 = g.weighted_rss / static_cast<double>(n);
  s2 = std::min(s2, max_variance);
  if (!(s2 > 0.0)) return p;
  p.sigma_sq = s2;
  p.beta = g.beta;
  p.log_likelihood = -0.5 * static_cast<double>(n) * (kLog2Pi + std::log(s2)) - 0.5 * d.array().log().sum() -
                     0.5 * g.weighted_rss / s2 + sd.log_abs_det_q;
  return p;
}

}  // namespace

ResponseVector response_vector(const CountMatrix& counts) {
  ResponseVector out;
  const VectorXd totals = counts.totals();
  std::vector<double> ys;
  for (Index i = 0; i < counts.n_lines(); ++i) {
    if (!(counts.exposure(i) > 0.0)) throw ValidationError("line exposure must be positive");
    if (totals(i) >= 1.0) {
      out.fitted.push_back(i);
      ys.push_back(std::log(totals(i) / counts.exposure(i)));
    } else {
      out.excluded.push_back(i);
    }
  }
  if (out.fitted.empty()) throw ValidationError("every line has zero outages; nothing to fit");
  out.y = Eigen::Map<VectorXd>(ys.data(), static_cast<Index>(ys.size()));
  return out;
}

double profile_log_likelihood(const VectorXd& y, const VectorXd& x_length, const VectorXd& x_voltage,
                              const SimDiag<double>& sd, double sigma1_sq, double sigma2_sq,
                              Eigen::Vector3d* mean_params) {
  const Transformed t = transform(y, x_length, x_voltage, sd);
  const VectorXd v = (sigma1_sq + sigma2_sq * sd.Lambda.array()).matrix();
  if (v.minCoeff() <= 0.0) return kNegInf;
  const Gls g = weighted_ls(t, v);
  if (mean_params) *mean_params = g.beta;
  return -0.5 * static_cast<double>(y.size()) * kLog2Pi - 0.5 * v.array().log().sum() - 0.5 * g.weighted_rss +
         sd.log_abs_det_q;
}

EmpiricalFit fit_mle(const VectorXd& y, const VectorXd& x_length, const VectorXd& x_voltage,
                     const SimDiag<double>& sd, const FitOptions& options) {
  const Transformed t = transform(y, x_length, x_voltage, sd);
  const auto eval = [&](double w) { return profile_weight(t, sd, w, options.max_variance); };

  const int grid = std::max(options.grid_points, 3);
  std::vector<double> values(static_cast<std::size_t>(grid));
  int best = 0;
  for (int k = 0; k < grid; ++k) {
    values[static_cast<std::size_t>(k)] = eval(static_cast<double>(k) / (grid - 1)).log_likelihood;
    if (values[static_cast<std::size_t>(k)] > values[static_cast<std::size_t>(best)]) best = k;
  }
  double finite_min = kInf;
  double finite_max = kNegInf;
  for (double v : values) {
    if (std::isfinite(v)) {
      finite_min = std::min(finite_min, v);
      finite_max = std::max(finite_max, v);
    }
  }
  if (!std::isfinite(finite_max)) throw ValidationError("empirical fit: likelihood is not finite anywhere");

  EmpiricalFit fit;
  fit.n_fitted = y.size();
  fit.flat_direction = finite_max - finite_min < options.flat_tolerance;

  double w_best = static_cast<double>(best) / (grid - 1);
  if (fit.flat_direction) {
    w_best = 0.5;
  } else {
    // Golden-section refinement on the bracketing grid cells.
    double lo = static_cast<double>(std::max(best - 1, 0)) / (grid - 1);
    double hi = static_cast<double>(std::min(best + 1, grid - 1)) / (grid - 1);
    constexpr double inv_phi = 0.6180339887498949;
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double fa = eval(a).log_likelihood;
    double fb = eval(b).log_likelihood;
    int it = 0;
    while (hi - lo > options.tolerance) {
      if (it++ >= options.max_iterations) {
        const WeightProfile p = eval(fa > fb ? a : b);
        fit.w = fa > fb ? a : b;
        fit.sigma_sq = p.sigma_sq;
        fit.log_likelihood = p.log_likelihood;
        throw OptimizerError("empirical fit did not converge within the iteration limit", fit);
      }
      if (fa > fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - inv_phi * (hi - lo);
        fa = eval(a).log_likelihood;
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + inv_phi * (hi - lo);
        fb = eval(b).log_likelihood;
      }
    }
    fit.iterations = it;
    const double w_mid = 0.5 * (lo + hi);
    if (eval(w_mid).log_likelihood >= values[static_cast<std::size_t>(best)]) w_best = w_mid;
  }
  const WeightProfile p = eval(w_best);
  fit.w = w_best;
  fit.sigma_sq = p.sigma_sq;
  fit.sigma1_sq = w_best * p.sigma_sq;
  fit.sigma2_sq = (1.0 - w_best) * p.sigma_sq;
  fit.m = p.beta(0);
  fit.beta_length = p.beta(1);
  fit.beta_voltage = p.beta(2);
  fit.log_likelihood = p.log_likelihood;
  return fit;
}

ResidualReport pearson_residuals(const EmpiricalFit& fit, const VectorXd& y, const VectorXd& x_length,
                                 const VectorXd& x_voltage, const SimDiag<double>& sd) {
  const Transformed t = transform(y, x_length, x_voltage, sd);
  const Eigen::Vector3d beta(fit.m, fit.beta_length, fit.beta_voltage);
  ResidualReport r;
  r.fitted = t.x * beta;
  r.raw = t.y - r.fitted;
  const VectorXd v = (fit.sigma1_sq + fit.sigma2_sq * sd.Lambda.array()).matrix();
  if (v.minCoeff() <= 0.0) throw ValidationError("pearson residuals: zero model variance");
  r.pearson = r.raw.array() / v.array().sqrt();
  const Index n = r.pearson.size();
  r.qq_empirical = r.pearson;
  std::sort(r.qq_empirical.data(), r.qq_empirical.data() + n);
  r.qq_theoretical.resize(n);
  for (Index k = 0; k < n; ++k) {
    r.qq_theoretical(k) = normal_quantile((static_cast<double>(k) + 0.5) / static_cast<double>(n));
  }
  return r;
}

MatrixXd select_square(const MatrixXd& m, const std::vector<Index>& rows) {
  const Index k = static_cast<Index>(rows.size());
  MatrixXd out(k, k);
  for (Index j = 0; j < k; ++j) {
    for (Index i = 0; i < k; ++i) out(i, j) = m(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
  }
  return out;
}

VectorXd select(const VectorXd& v, const std::vector<Index>& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(rows[i]);
  return out;
}

}  // namespace outrate
