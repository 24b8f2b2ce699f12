#pragma once

#include "outrate/ingest.hpp"
#include "outrate/mcmc.hpp"
#include "outrate/types.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace outrate {

// Per-line posterior summaries with multiplicative intervals [mean/kappa, mean*kappa].
struct RateEstimates {
  VectorXd mean;
  VectorXd sd;
  VectorXd kappa;
  VectorXd ci_low;
  VectorXd ci_high;

  Index size() const { return mean.size(); }
};

RateEstimates posterior_point(const PosteriorSamples& samples, double level = 0.95);

/// Smallest kappa >= 1 with at least `level` of the draws inside
/// [center/kappa, center*kappa]. Taken as the ceil(level * n)-th smallest of
/// max(center/x, x/center), which is exactly what bisection over kappa converges to.
double credible_kappa(const VectorXd& draws, double center, double level = 0.95);
double credible_kappa_about_mean(const VectorXd& draws, double level = 0.95);

struct ConventionalEstimates {
  VectorXd mean;              // N_i / t_i
  VectorXd sd;                // s_i / sqrt(t_i); NaN when s is undefined
  std::vector<bool> sd_defined;
  std::vector<bool> all_zero;
};

ConventionalEstimates conventional(const CountMatrix& counts);

struct KdeSeries {
  VectorXd x;
  VectorXd density;
  double bandwidth = 0.0;
};

// Gaussian kernel density on an even grid with Silverman's rule-of-thumb bandwidth.
KdeSeries gaussian_kde(const VectorXd& values, Index points = 200);

struct ComparisonReport {
  VectorXd ratio;               // NaN where excluded
  std::vector<Index> included;  // lines with both SDs positive and defined
  Index excluded = 0;
  double median_ratio = 0.0;
  double equivalent_years = 0.0;
  KdeSeries histogram;
};

double equivalent_years(double median_ratio, double n_years);

// Bayes SD / conventional SD per line. `conventional_sd` may come from the data or a Monte Carlo oracle.
ComparisonReport sd_ratio_report(const VectorXd& bayes_sd, const VectorXd& conventional_sd, double n_years);
ComparisonReport sd_ratio_report(const RateEstimates& bayes, const ConventionalEstimates& conv, double n_years);

/// Estimates CSV sorted by posterior mean ascending:
/// line_id, posterior_mean, posterior_sd, kappa, ci_low, ci_high, conventional_mean, conventional_sd, sd_ratio.
void write_estimates_csv(std::ostream& out, const std::vector<std::string>& line_ids, const RateEstimates& bayes,
                         const ConventionalEstimates& conv);
void write_kde_csv(std::ostream& out, const KdeSeries& series);

}  // namespace outrate
