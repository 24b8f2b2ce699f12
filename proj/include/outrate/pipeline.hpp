#pragma once

#include "outrate/bayes.hpp"
#include "outrate/empirical.hpp"
#include "outrate/features.hpp"
#include "outrate/inference.hpp"
#include "outrate/ingest.hpp"
#include "outrate/kernels.hpp"
#include "outrate/mcmc.hpp"

#include <string>
#include <vector>

namespace outrate {

struct KernelSettings {
  double rate = 2.0;
  double unit_miles = 1.0;
};

KernelSet<double> build_kernels(const LineTable& lines, const MatrixXd& distances, const KernelSettings& settings);

// Everything between the count matrix and the sampler.
struct PreparedModel {
  LineTable lines;
  CountMatrix counts;  // rows aligned with `lines`
  Covariates covariates;
  KernelSet<double> kernels;
  SimDiag<double> simdiag;
  ResponseVector response;
  EmpiricalFit fit;
  bool fit_converged = true;
  ModelSpec spec;
  std::vector<std::string> warnings;
};

// Reorders count rows to the line table; lines without a count row get zeros.
CountMatrix align_counts(const CountMatrix& counts, const LineTable& lines);

/// Empirical fit over the lines with outages (kernels restricted to them),
/// then the model spec over every line with the fit as the chain start.
PreparedModel prepare_model(const LineTable& lines, const CountMatrix& counts, const MatrixXd& distances,
                            const KernelSettings& kernels = {}, const PriorSpec& priors = {},
                            const FitOptions& fit_options = {});

// Empirical fit alone, on the lines with at least one outage.
EmpiricalFit fit_empirical(const CountMatrix& counts, const Covariates& covariates, const KernelSet<double>& kernels,
                           const FitOptions& options, ResponseVector* response = nullptr, bool* converged = nullptr);

/// Posterior means after each cutoff (number of leading years). Each cutoff
/// refits the empirical start and reruns the chains. Rows: lines, columns: cutoffs.
struct Trajectory {
  std::vector<int> cutoffs;
  MatrixXd mean;
  MatrixXd sd;
};

Trajectory trajectory(const LineTable& lines, const CountMatrix& counts, const MatrixXd& distances,
                      const std::vector<int>& cutoffs, const ChainConfig& chains, const KernelSettings& kernels = {},
                      const PriorSpec& priors = {});

}  // namespace outrate
