#include "outrate/inference.hpp"

#include "outrate/csv.hpp"
#include "outrate/error.hpp"
#include "outrate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace outrate {

double credible_kappa(const VectorXd& draws, double center, double level) {
  if (!(center > 0.0)) throw ValidationError("credible_kappa: point estimate must be positive");
  if (!(level >= 0.0 && level <= 1.0)) throw ValidationError("credible_kappa: level must lie in [0, 1]");
  const Index n = draws.size();
  if (n == 0) throw ValidationError("credible_kappa: no draws");
  if (level == 0.0) return 1.0;
  std::vector<double> r(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    const double x = draws(j);
    if (!(x > 0.0)) throw ValidationError("credible_kappa: draws must be positive");
    r[static_cast<std::size_t>(j)] = std::max(center / x, x / center);
  }
  const auto k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n) - 1e-9));
  const std::size_t pos = std::clamp<std::size_t>(k, 1, r.size()) - 1;
  std::nth_element(r.begin(), r.begin() + static_cast<std::ptrdiff_t>(pos), r.end());
  return std::max(1.0, r[pos]);
}

double credible_kappa_about_mean(const VectorXd& draws, double level) { return credible_kappa(draws, draws.mean(), level); }

RateEstimates posterior_point(const PosteriorSamples& samples, double level) {
  if (samples.n_chains() == 0 || samples.n_draws() == 0) throw ValidationError("posterior_point: no samples");
  const Index n = samples.n_lines();
  const Index first = 6 + n;
  RateEstimates e;
  e.mean.resize(n);
  e.sd.resize(n);
  e.kappa.resize(n);
  e.ci_low.resize(n);
  e.ci_high.resize(n);
  for (Index i = 0; i < n; ++i) {
    const VectorXd d = samples.pooled(first + i);
    e.mean(i) = d.mean();
    e.sd(i) = d.size() > 1 ? sample_sd(d) : 0.0;
    e.kappa(i) = credible_kappa(d, e.mean(i), level);
    e.ci_low(i) = e.mean(i) / e.kappa(i);
    e.ci_high(i) = e.mean(i) * e.kappa(i);
  }
  return e;
}

ConventionalEstimates conventional(const CountMatrix& counts) {
  const Index n = counts.n_lines();
  const Index years = counts.n_years();
  if (years < 1) throw ValidationError("conventional estimate needs at least one year");
  ConventionalEstimates c;
  c.mean.resize(n);
  c.sd.resize(n);
  c.sd_defined.assign(static_cast<std::size_t>(n), years >= 2);
  c.all_zero.assign(static_cast<std::size_t>(n), false);
  const VectorXd t = counts.exposure;
  for (Index i = 0; i < n; ++i) {
    const VectorXd row = counts.counts.row(i).cast<double>().transpose();
    c.mean(i) = row.sum() / t(i);
    c.sd(i) = years >= 2 ? sample_sd(row) / std::sqrt(t(i)) : std::numeric_limits<double>::quiet_NaN();
    c.all_zero[static_cast<std::size_t>(i)] = (row.array() == 0.0).all();
  }
  return c;
}

KdeSeries gaussian_kde(const VectorXd& values, Index points) {
  KdeSeries k;
  const Index n = values.size();
  if (n == 0 || points < 2) return k;
  const double sd = n > 1 ? sample_sd(values) : 0.0;
  std::vector<double> v(values.data(), values.data() + n);
  const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
  k.bandwidth = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  const double lo = values.minCoeff() - 3.0 * k.bandwidth;
  const double hi = values.maxCoeff() + 3.0 * k.bandwidth;
  k.x = VectorXd::LinSpaced(points, lo, hi);
  k.density.resize(points);
  const double norm = 1.0 / (static_cast<double>(n) * k.bandwidth * std::sqrt(2.0 * 3.14159265358979323846));
  for (Index g = 0; g < points; ++g) {
    k.density(g) = norm * ((values.array() - k.x(g)) / k.bandwidth).square().unaryExpr([](double u) {
                     return std::exp(-0.5 * u);
                   }).sum();
  }
  return k;
}

double equivalent_years(double median_ratio, double n_years) {
  if (!(median_ratio > 0.0)) throw ValidationError("equivalent years need a positive median ratio");
  return n_years / (median_ratio * median_ratio);
}

ComparisonReport sd_ratio_report(const VectorXd& bayes_sd, const VectorXd& conventional_sd, double n_years) {
  if (bayes_sd.size() != conventional_sd.size()) throw ValidationError("sd_ratio_report: line sets differ");
  ComparisonReport r;
  r.ratio = VectorXd::Constant(bayes_sd.size(), std::numeric_limits<double>::quiet_NaN());
  std::vector<double> kept;
  for (Index i = 0; i < bayes_sd.size(); ++i) {
    const double c = conventional_sd(i);
    const double b = bayes_sd(i);
    if (std::isfinite(c) && c > 0.0 && std::isfinite(b) && b > 0.0) {
      r.ratio(i) = b / c;
      r.included.push_back(i);
      kept.push_back(b / c);
    } else {
      ++r.excluded;
    }
  }
  if (kept.empty()) return r;
  const VectorXd k = Eigen::Map<VectorXd>(kept.data(), static_cast<Index>(kept.size()));
  r.median_ratio = median(k);
  r.equivalent_years = equivalent_years(r.median_ratio, n_years);
  r.histogram = gaussian_kde(k);
  return r;
}

ComparisonReport sd_ratio_report(const RateEstimates& bayes, const ConventionalEstimates& conv, double n_years) {
  return sd_ratio_report(bayes.sd, conv.sd, n_years);
}

void write_estimates_csv(std::ostream& out, const std::vector<std::string>& line_ids, const RateEstimates& bayes,
                         const ConventionalEstimates& conv) {
  const Index n = bayes.size();
  if (static_cast<Index>(line_ids.size()) != n || conv.mean.size() != n) {
    throw ValidationError("estimates CSV: line sets differ");
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return bayes.mean(a) < bayes.mean(b); });
  csv::write_row(out, {"line_id", "posterior_mean", "posterior_sd", "kappa", "ci_low", "ci_high", "conventional_mean",
                       "conventional_sd", "sd_ratio"});
  for (Index i : order) {
    const double c = conv.sd(i);
    const bool ratio_ok = std::isfinite(c) && c > 0.0;
    csv::write_row(out, {line_ids[static_cast<std::size_t>(i)], csv::format_double(bayes.mean(i)),
                         csv::format_double(bayes.sd(i)), csv::format_double(bayes.kappa(i)),
                         csv::format_double(bayes.ci_low(i)), csv::format_double(bayes.ci_high(i)),
                         csv::format_double(conv.mean(i)), std::isfinite(c) ? csv::format_double(c) : "",
                         ratio_ok ? csv::format_double(bayes.sd(i) / c) : ""});
  }
}

void write_kde_csv(std::ostream& out, const KdeSeries& series) {
  csv::write_row(out, {"x", "density"});
  for (Index g = 0; g < series.x.size(); ++g) {
    csv::write_row(out, {csv::format_double(series.x(g)), csv::format_double(series.density(g))});
  }
}

}  // namespace outrate
