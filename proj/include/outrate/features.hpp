#pragma once

#include "outrate/error.hpp"
#include "outrate/ingest.hpp"
#include "outrate/stats.hpp"
#include "outrate/types.hpp"

#include <string>
#include <vector>

namespace outrate {

/// Median absolute deviation, median(|z - median(z)|), with no consistency
/// constant. Throws DegenerateScaleError when the spread is zero.
template <typename Derived>
double mad_scale(const Eigen::MatrixBase<Derived>& z) {
  if (z.size() < 2) throw ValidationError("mad_scale needs at least two values");
  const double center = median(z);
  const double scale = median((z.array() - center).abs().matrix());
  if (!(scale > 0.0)) throw DegenerateScaleError("median absolute deviation is zero");
  return scale;
}

// x_L = ln L / mad(ln L).
VectorXd transform_lengths(const VectorXd& lengths_miles);
// u = V / SD(V) (n-1 denominator), x_V = u / mad(u).
VectorXd transform_voltages(const VectorXd& voltages_kv);

struct Covariates {
  VectorXd length;   // x_L
  VectorXd voltage;  // x_V
};

Covariates make_covariates(const LineTable& lines);

struct CorrelationReport {
  double raw = 0.0;          // corr(L, V)
  double transformed = 0.0;  // corr(x_L, x_V)
};

CorrelationReport correlation_report(const VectorXd& lengths, const VectorXd& voltages, const Covariates& covariates);

// Row i is the 0/1 membership vector of line i over `names`.
struct DistrictFeatures {
  std::vector<std::string> names;
  MatrixXd membership;
};

DistrictFeatures district_features(const LineTable& lines);

}  // namespace outrate
