#include "outrate/pipeline.hpp"

#include "outrate/error.hpp"

#include <map>

namespace outrate {

KernelSet<double> build_kernels(const LineTable& lines, const MatrixXd& distances, const KernelSettings& settings) {
  if (distances.rows() != lines.size() || distances.cols() != lines.size()) {
    throw ValidationError("distance matrix does not match the line table");
  }
  const DistrictFeatures f = district_features(lines);
  return {district_kernel(f.membership), network_kernel(distances, settings.rate, settings.unit_miles)};
}

CountMatrix align_counts(const CountMatrix& counts, const LineTable& lines) {
  std::map<std::string, Index> rows;
  for (std::size_t i = 0; i < counts.line_ids.size(); ++i) rows[counts.line_ids[i]] = static_cast<Index>(i);
  for (const auto& [id, row] : rows) {
    if (!lines.find(id)) throw ValidationError("count matrix line " + id + " is not in the line table");
  }
  CountMatrix out;
  out.first_year = counts.first_year;
  out.counts = Eigen::MatrixXi::Zero(lines.size(), counts.n_years());
  out.exposure = VectorXd::Constant(lines.size(), static_cast<double>(counts.n_years()));
  for (Index i = 0; i < lines.size(); ++i) {
    out.line_ids.push_back(lines[i].line_id);
    const auto it = rows.find(lines[i].line_id);
    if (it != rows.end()) {
      out.counts.row(i) = counts.counts.row(it->second);
      out.exposure(i) = counts.exposure(it->second);
    }
  }
  return out;
}

EmpiricalFit fit_empirical(const CountMatrix& counts, const Covariates& covariates, const KernelSet<double>& kernels,
                           const FitOptions& options, ResponseVector* response, bool* converged) {
  ResponseVector r = response_vector(counts);
  const SimDiag<double> sub = simdiag<double>(select_square(kernels.district, r.fitted),
                                              select_square(kernels.network, r.fitted));
  EmpiricalFit fit;
  bool ok = true;
  try {
    fit = fit_mle(r.y, select(covariates.length, r.fitted), select(covariates.voltage, r.fitted), sub, options);
  } catch (const OptimizerError& e) {
    fit = e.best();
    ok = false;
  }
  if (response) *response = std::move(r);
  if (converged) *converged = ok;
  return fit;
}

PreparedModel prepare_model(const LineTable& lines, const CountMatrix& counts, const MatrixXd& distances,
                            const KernelSettings& kernel_settings, const PriorSpec& priors,
                            const FitOptions& fit_options) {
  PreparedModel p;
  p.lines = lines;
  p.counts = align_counts(counts, lines);
  p.covariates = make_covariates(lines);
  p.kernels = build_kernels(lines, distances, kernel_settings);
  p.simdiag = simdiag(p.kernels.district, p.kernels.network);
  if (p.simdiag.jitter > 0.0) {
    p.warnings.push_back("district kernel needed diagonal jitter " + std::to_string(p.simdiag.jitter));
  }
  if (p.simdiag.clipped > 0) {
    p.warnings.push_back(std::to_string(p.simdiag.clipped) + " negative network-kernel eigenvalues clipped to zero");
  }
  p.fit = fit_empirical(p.counts, p.covariates, p.kernels, fit_options, &p.response, &p.fit_converged);
  if (!p.fit_converged) p.warnings.push_back("empirical fit hit its iteration limit; using the best point found");
  if (p.fit.flat_direction) p.warnings.push_back("empirical likelihood is flat in the kernel weight");
  InitialValues init{p.fit.m, p.fit.beta_length, p.fit.beta_voltage};
  p.spec = make_model(p.counts, p.covariates, p.simdiag, priors, init);
  return p;
}

Trajectory trajectory(const LineTable& lines, const CountMatrix& counts, const MatrixXd& distances,
                      const std::vector<int>& cutoffs, const ChainConfig& chains, const KernelSettings& kernels,
                      const PriorSpec& priors) {
  Trajectory t;
  t.cutoffs = cutoffs;
  t.mean.resize(lines.size(), static_cast<Index>(cutoffs.size()));
  t.sd.resize(lines.size(), static_cast<Index>(cutoffs.size()));
  for (std::size_t k = 0; k < cutoffs.size(); ++k) {
    const int years = cutoffs[k];
    if (years < 1 || years > counts.n_years()) throw ValidationError("trajectory cutoff beyond the data");
    const PreparedModel p = prepare_model(lines, counts.truncated(years), distances, kernels, priors);
    const RateEstimates e = posterior_point(run_chains(p.spec, chains));
    t.mean.col(static_cast<Index>(k)) = e.mean;
    t.sd.col(static_cast<Index>(k)) = e.sd;
  }
  return t;
}

}  // namespace outrate
