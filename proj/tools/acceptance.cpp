// Acceptance runner: one PASS/FAIL line per criterion.
#include "outrate/config.hpp"
#include "outrate/empirical.hpp"
#include "outrate/features.hpp"
#include "outrate/inference.hpp"
#include "outrate/ingest.hpp"
#include "outrate/io.hpp"
#include "outrate/kernels.hpp"
#include "outrate/mcmc.hpp"
#include "outrate/network.hpp"
#include "outrate/pipeline.hpp"
#include "outrate/stats.hpp"
#include "outrate/synthetic.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifndef OUTRATE_CLI_PATH
#define OUTRATE_CLI_PATH "outrate"
#endif
#ifndef OUTRATE_SOURCE_DIR
#define OUTRATE_SOURCE_DIR "."
#endif

namespace fs = std::filesystem;
using namespace outrate;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<std::string> ids_of(const LineTable& lines) {
  std::vector<std::string> ids;
  for (const LineInfo& l : lines.lines()) ids.push_back(l.line_id);
  return ids;
}

// Synthetic network plus derived inputs.
struct World {
  LineTable lines;
  MatrixXd distances;
  Covariates covariates;
  KernelSet<double> kernels;
  std::vector<std::string> ids;
};

World make_world(Index n_lines, std::uint64_t seed = 7) {
  InventoryConfig ic;
  ic.n_lines = n_lines;
  ic.n_buses = std::max<Index>(3, n_lines * 357 / 500);
  ic.seed = seed;
  World w;
  w.lines = synthetic_inventory(ic);
  w.distances = distance_matrix(build_graph(w.lines));
  w.covariates = make_covariates(w.lines);
  w.kernels = build_kernels(w.lines, w.distances, {});
  w.ids = ids_of(w.lines);
  return w;
}

// First seed >= 1 whose common factor G is within 5% of one.
std::uint64_t unit_g_seed(const World& w, GenerativeConfig g) {
  for (g.seed = 1;; ++g.seed) {
    g.n_years = 1;
    if (std::abs(generate(g, w.ids, w.covariates, w.kernels).g - 1.0) < 0.05) return g.seed;
  }
}

// ln mu recomputed from the model matrices.
VectorXd oracle_log_mu(const ModelSpec& spec, const ParameterState& s) {
  VectorXd scale(spec.n());
  for (Index i = 0; i < spec.n(); ++i) scale(i) = std::sqrt(s.sigma_sq * (s.w + (1.0 - s.w) * spec.Lambda(i)));
  return (s.m + (spec.Q_inv_t * scale.cwiseProduct(s.z)).array() + s.beta_length * spec.x_length.array() +
          s.beta_voltage * spec.x_voltage.array())
      .matrix();
}

// ---------------------------------------------------------------- 1
Result conjugacy() {
  const World w = make_world(20, 3);
  GenerativeConfig g;
  g.seed = 5;
  const SyntheticDataset d = generate(g, w.ids, w.covariates, w.kernels);
  const PreparedModel p = prepare_model(w.lines, d.counts, w.distances);

  ParameterState frozen;
  frozen.alpha = 1.3;
  frozen.beta_length = 0.1;
  frozen.beta_voltage = 0.2;
  frozen.m = -1.0;
  frozen.sigma_sq = 0.6;
  frozen.w = 0.4;
  Rng rng(17);
  std::normal_distribution<double> n01;
  frozen.z = VectorXd::NullaryExpr(p.spec.n(), [&] { return n01(rng); });

  ChainConfig cc;
  cc.n_chains = 2;
  cc.n_burnin = 10;
  cc.n_iterations = 50000 + cc.n_burnin;
  cc.seed = 23;
  cc.free = FreeMask::none();
  cc.frozen = frozen;
  const PosteriorSamples s = run_chains(p.spec, cc);

  const VectorXd log_mu = oracle_log_mu(p.spec, frozen);
  const double n_draws = static_cast<double>(s.n_chains() * s.n_draws());
  double worst_mean = 0.0, worst_var = 0.0;
  for (Index i = 0; i < p.spec.n(); ++i) {
    const double shape = frozen.alpha + p.spec.counts(i);
    const double rate = frozen.alpha / std::exp(log_mu(i)) + p.spec.exposure(i);
    const double mean = shape / rate, var = shape / (rate * rate);
    const VectorXd x = s.pooled("lambda[" + std::to_string(i) + "]");
    const double xm = x.mean();
    const double xv = (x.array() - xm).square().sum() / (n_draws - 1.0);
    // SE of the sample variance uses the Gamma fourth moment: mu4 = var^2 (3 + 6/shape).
    worst_mean = std::max(worst_mean, std::abs(xm - mean) / std::sqrt(var / n_draws));
    worst_var = std::max(worst_var, std::abs(xv - var) / (var * std::sqrt((2.0 + 6.0 / shape) / n_draws)));
  }
  return {worst_mean < 3.0 && worst_var < 3.0,
          fmt("conjugacy: %ld lines x %.0f draws, worst |error|/SE mean %.2f, variance %.2f (limit 3)",
              static_cast<long>(p.spec.n()), n_draws, worst_mean, worst_var)};
}

// ---------------------------------------------------------------- 2
struct GaussHermite {
  VectorXd x, w;  // weight exp(-x^2)
};

GaussHermite gauss_hermite(int n) {
  MatrixXd j = MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(j);
  GaussHermite gh{eig.eigenvalues(), VectorXd(n)};
  for (int k = 0; k < n; ++k) gh.w(k) = std::sqrt(M_PI) * eig.eigenvectors()(0, k) * eig.eigenvectors()(0, k);
  return gh;
}

// Posterior mean of lambda for a 3-line model with alpha and w fixed.
// eta = ln mu has a Gaussian prior given sigma^2 (m and both slopes integrated
// analytically); eta is integrated by Gauss-Hermite around its Laplace mode and
// sigma^2 by the midpoint rule.
Eigen::Vector3d toy_quadrature(const ModelSpec& spec, const MatrixXd& s1, const MatrixXd& s2, double alpha,
                               double w, int gh_points, int sigma_nodes) {
  const PriorSpec& pr = spec.priors;
  const Eigen::Vector3d one = Eigen::Vector3d::Ones();
  const Eigen::Vector3d xl = spec.x_length, xv = spec.x_voltage, n = spec.counts, t = spec.exposure;
  const Eigen::Vector3d a = pr.m_mean * one + pr.beta_length_mean * xl + pr.beta_voltage_mean * xv;
  const Eigen::Matrix3d fixed_cov = pr.m_sd * pr.m_sd * one * one.transpose() +
                                    pr.beta_length_sd * pr.beta_length_sd * xl * xl.transpose() +
                                    pr.beta_voltage_sd * pr.beta_voltage_sd * xv * xv.transpose();
  const Eigen::Matrix3d mix = w * s1 + (1.0 - w) * s2;
  const GaussHermite gh = gauss_hermite(gh_points);

  auto log_lik = [&](const Eigen::Vector3d& eta) {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) v += n(i) * eta(i) - (alpha + n(i)) * std::log(alpha + std::exp(eta(i)) * t(i));
    return v;
  };

  std::vector<double> logw;
  std::vector<Eigen::Vector3d> cond;
  const double top = 3.0;
  for (int k = 0; k < sigma_nodes; ++k) {
    const double s2v = (k + 0.5) * top / sigma_nodes;
    const Eigen::Matrix3d c = fixed_cov + s2v * mix;
    const Eigen::LLT<Eigen::Matrix3d> cl(c);
    const Eigen::Matrix3d cinv = cl.solve(Eigen::Matrix3d::Identity());
    const double log_det_c = 2.0 * Eigen::Vector3d(cl.matrixL().toDenseMatrix().diagonal()).array().log().sum();
    auto log_joint = [&](const Eigen::Vector3d& eta) {
      const Eigen::Vector3d r = eta - a;
      return log_lik(eta) - 0.5 * r.dot(cinv * r) - 0.5 * log_det_c - s2v * s2v / (2.0 * pr.sigma_sq_scale * pr.sigma_sq_scale);
    };
    Eigen::Vector3d eta = (n.array().max(0.5) / t.array()).log().matrix();
    Eigen::Matrix3d h;
    for (int it = 0; it < 100; ++it) {
      Eigen::Vector3d g = -cinv * (eta - a);
      h = cinv;
      for (int i = 0; i < 3; ++i) {
        const double e = std::exp(eta(i)) * t(i);
        g(i) += n(i) - (alpha + n(i)) * e / (alpha + e);
        h(i, i) += (alpha + n(i)) * alpha * e / ((alpha + e) * (alpha + e));
      }
      const Eigen::Vector3d step = h.llt().solve(g);
      eta += step;
      if (step.norm() < 1e-12) break;
    }
    const Eigen::Matrix3d l = h.llt().solve(Eigen::Matrix3d::Identity()).llt().matrixL();
    const double log_det_l = Eigen::Vector3d(l.diagonal()).array().log().sum();
    for (int i = 0; i < gh_points; ++i) {
      for (int j = 0; j < gh_points; ++j) {
        for (int m = 0; m < gh_points; ++m) {
          const Eigen::Vector3d u(gh.x(i), gh.x(j), gh.x(m));
          const Eigen::Vector3d e = eta + std::sqrt(2.0) * l * u;
          logw.push_back(std::log(gh.w(i) * gh.w(j) * gh.w(m)) + u.squaredNorm() + log_det_l + log_joint(e));
          Eigen::Vector3d lam;
          for (int q = 0; q < 3; ++q) lam(q) = (alpha + n(q)) / (alpha / std::exp(e(q)) + t(q));
          cond.push_back(lam);
        }
      }
    }
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double z = 0.0;
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (std::size_t k = 0; k < logw.size(); ++k) {
    const double wk = std::exp(logw[k] - mx);
    z += wk;
    acc += wk * cond[k];
  }
  return acc / z;
}

Result toy_posterior() {
  // Three lines on a small path network, two districts.
  LineTable lines({{"T1", "A", "B", 115, 4.0, {"D1"}}, {"T2", "B", "C", 230, 12.0, {"D1"}},
                   {"T3", "C", "D", 500, 30.0, {"D2"}}});
  const MatrixXd dist = distance_matrix(build_graph(lines));
  KernelSettings ks;
  ks.unit_miles = 20.0;  // visible network correlation at this scale
  CountMatrix counts;
  counts.line_ids = {"T1", "T2", "T3"};
  counts.first_year = 2000;
  counts.counts.resize(3, 8);
  counts.counts << 0, 1, 0, 0, 0, 1, 0, 0,  //
      1, 0, 2, 1, 0, 1, 1, 1,               //
      2, 3, 1, 2, 1, 2, 3, 1;
  counts.exposure = VectorXd::Constant(3, 8.0);
  const PreparedModel p = prepare_model(lines, counts, dist, ks);

  const double alpha = 1.5, w = 0.4;
  ChainConfig cc;
  cc.n_chains = 4;
  cc.n_iterations = 25000;
  cc.n_burnin = 5000;
  cc.seed = 31;
  cc.free.hyper[kLogAlpha] = false;
  cc.free.hyper[kLogitW] = false;
  cc.frozen.alpha = alpha;
  cc.frozen.w = w;
  const PosteriorSamples s = run_chains(p.spec, cc);

  const Eigen::Vector3d ref = toy_quadrature(p.spec, p.kernels.district, p.kernels.network, alpha, w, 32, 400);
  const Eigen::Vector3d ref_coarse = toy_quadrature(p.spec, p.kernels.district, p.kernels.network, alpha, w, 24, 300);
  double worst = 0.0, worst_se = 0.0;
  std::string means;
  for (int i = 0; i < 3; ++i) {
    const std::string name = "lambda[" + std::to_string(i) + "]";
    const double mc = s.pooled(name).mean();
    const double se = sample_sd(s.pooled(name)) / std::sqrt(effective_sample_size(s, name));
    worst = std::max(worst, std::abs(mc / ref(i) - 1.0));
    worst_se = std::max(worst_se, se / ref(i));
    means += fmt(" %.4f/%.4f", mc, ref(i));
  }
  const double quad_err = (ref - ref_coarse).cwiseQuotient(ref).cwiseAbs().maxCoeff();
  return {worst < 0.02, fmt("toy posterior: MCMC/quadrature%s, worst rel. error %.4f (limit 0.02), MC SE %.4f, "
                            "quadrature refinement %.1e",
                            means.c_str(), worst, worst_se, quad_err)};
}

// ---------------------------------------------------------------- 3
std::pair<double, double> simdiag_errors(const MatrixXd& s1, const MatrixXd& s2) {
  const SimDiag<double> sd = simdiag(s1, s2);
  const Index n = s1.rows();
  const double e1 = (sd.Q.transpose() * s1 * sd.Q - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  const double e2 = (sd.Q.transpose() * s2 * sd.Q - MatrixXd(sd.Lambda.asDiagonal())).cwiseAbs().maxCoeff();
  return {e1, e2};
}

Result diagonalization(const std::string& inventory) {
  const LineTable lines = read_line_table_file(inventory);
  const MatrixXd dist = distance_matrix(build_graph(lines));
  const KernelSet<double> k = build_kernels(lines, dist, {});
  const auto [w1, w2] = simdiag_errors(k.district, k.network);
  KernelSettings wide;
  wide.unit_miles = 50.0;
  const KernelSet<double> kw = build_kernels(lines, dist, wide);
  const auto [v1, v2] = simdiag_errors(kw.district, kw.network);

  Rng rng(101);
  std::normal_distribution<double> n01;
  std::uniform_int_distribution<int> size(2, 50);
  double r1 = 0.0, r2 = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = rep < 2 ? 50 : size(rng);
    const MatrixXd a = MatrixXd::NullaryExpr(n, n, [&] { return n01(rng); });
    const MatrixXd b = MatrixXd::NullaryExpr(n, n, [&] { return n01(rng); });
    const MatrixXd s1 = a * a.transpose() / n + 0.1 * MatrixXd::Identity(n, n);
    const MatrixXd s2 = b * b.transpose() / n + 0.1 * MatrixXd::Identity(n, n);
    const auto [e1, e2] = simdiag_errors(s1, s2);
    r1 = std::max(r1, e1);
    r2 = std::max(r2, e2);
  }
  const double worst = std::max({w1, w2, v1, v2, r1, r2});
  return {worst <= 1e-8, fmt("simultaneous diagonalization: working kernels %.1e/%.1e (unit 50 mi: %.1e/%.1e), "
                             "100 random SPD pairs %.1e/%.1e (limit 1e-8)",
                             w1, w2, v1, v2, r1, r2)};
}

// ---------------------------------------------------------------- 4
Result empirical_recovery() {
  const World w = make_world(500);
  const double truth[5] = {-1.5, 0.13, 0.12, 0.45, 0.42};
  const SimDiag<double> sd = simdiag(w.kernels.district, w.kernels.network);
  const MatrixXd cov = truth[3] * w.kernels.district + truth[4] * w.kernels.network;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  const MatrixXd root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  const VectorXd mean = (truth[0] + truth[1] * w.covariates.length.array() + truth[2] * w.covariates.voltage.array()).matrix();

  Rng rng(4242);
  std::normal_distribution<double> n01;
  const int reps = 50;
  MatrixXd est(reps, 5);
  for (int r = 0; r < reps; ++r) {
    const VectorXd e = VectorXd::NullaryExpr(mean.size(), [&] { return n01(rng); });
    const VectorXd y = mean + root * e;
    const EmpiricalFit f = fit_mle(y, w.covariates.length, w.covariates.voltage, sd);
    est.row(r) << f.m, f.beta_length, f.beta_voltage, f.sigma1_sq, f.sigma2_sq;
  }
  bool pass = true;
  std::string detail;
  const char* names[5] = {"m", "b_L", "b_V", "s1", "s2"};
  for (int k = 0; k < 5; ++k) {
    const double m = est.col(k).mean();
    const double se = sample_sd(est.col(k)) / std::sqrt(static_cast<double>(reps));
    const double z = std::abs(m - truth[k]) / se;
    pass = pass && z < 3.0;
    detail += fmt(" %s %.4f (true %.2f, %.2f SE)", names[k], m, truth[k], z);
  }
  return {pass, "empirical-fit recovery over 50 replications:" + detail + " (limit 3 SE of the mean)"};
}

// ---------------------------------------------------------------- 5, 6
struct ScaleRun {
  double median_ratio = 0.0;
  double bayes_sd = 0.0;
  double conv_sd = 0.0;
  double coverage = 0.0;
  bool gate = false;
};

ScaleRun scale_run(const World& w, GenerativeConfig g, int years) {
  g.n_years = years;
  const SyntheticDataset d = generate(g, w.ids, w.covariates, w.kernels);
  const PreparedModel p = prepare_model(w.lines, d.counts, w.distances);
  ChainConfig cc;
  cc.seed = derive_seed(g.seed, 1000 + static_cast<std::uint64_t>(years));
  const PosteriorSamples s = run_chains(p.spec, cc);
  const RateEstimates e = posterior_point(s);
  const ConventionalEstimates c = conventional(d.counts);
  const EvaluationReport eb = evaluate(e.mean, d.lambda, &e.ci_low, &e.ci_high);
  const EvaluationReport ec = evaluate(c.mean, d.lambda);
  const VectorXd osd = conventional_sd_oracle(g, d.lambda, d.g, years, 1000, derive_seed(g.seed, 77));
  ScaleRun r;
  r.median_ratio = sd_ratio_report(e.sd, osd, years).median_ratio;
  r.bayes_sd = eb.error_sd;
  r.conv_sd = ec.error_sd;
  r.coverage = eb.coverage;
  r.gate = convergence_report(s).pass;
  return r;
}

std::vector<Result> reproduction() {
  using clock = std::chrono::steady_clock;
  GenerativeConfig g;
  const auto t0 = clock::now();
  const World w = make_world(500);
  g.seed = unit_g_seed(w, g);
  const ScaleRun r1 = scale_run(w, g, 1), r5 = scale_run(w, g, 5), r100 = scale_run(w, g, 100);
  const double full_s = std::chrono::duration<double>(clock::now() - t0).count();
  auto near = [](double v, double ref, double tol) { return std::abs(v - ref) <= tol; };
  const bool full = near(r1.median_ratio, 0.74, 0.10) && near(r5.median_ratio, 0.90, 0.10) &&
                     near(r100.median_ratio, 0.99, 0.10) && near(r1.bayes_sd, 0.6, 0.15) &&
                     near(r1.conv_sd, 0.9, 0.15) && near(r5.bayes_sd, 0.3, 0.15) && near(r5.conv_sd, 0.4, 0.15) &&
                     full_s < 7200.0;

  // Desk scale: posterior SD below the conventional SD at 1 y (median ratio < 1), ratio rising with years.
  const auto t1 = clock::now();
  const World wd = make_world(50);
  const ScaleRun d1 = scale_run(wd, g, 1), d5 = scale_run(wd, g, 5), d100 = scale_run(wd, g, 100);
  const double desk_s = std::chrono::duration<double>(clock::now() - t1).count();
  const bool desk = d1.median_ratio < 1.0 && d1.median_ratio < d5.median_ratio &&
                    d5.median_ratio < d100.median_ratio && desk_s < 600.0;

  std::vector<Result> out;
  out.push_back({full && desk,
                 fmt("synthetic reproduction (seed %llu, n=500): median SD ratio %.3f/%.3f/%.3f at 1/5/100 y "
                     "(ref 0.74/0.90/0.99 +-0.10); error SD Bayes/conventional %.3f/%.3f at 1 y (ref 0.6/0.9), "
                     "%.3f/%.3f at 5 y (ref 0.3/0.4), +-0.15; gates %d%d%d; %.0f s (< 7200); "
                     "n=50: SD ratios %.3f < 1, %.3f < %.3f < %.3f, %.0f s (< 600); "
                     "n=50 error SD %.3f/%.3f at 1 y (not gated)",
                     static_cast<unsigned long long>(g.seed), r1.median_ratio, r5.median_ratio, r100.median_ratio,
                     r1.bayes_sd, r1.conv_sd, r5.bayes_sd, r5.conv_sd, r1.gate, r5.gate, r100.gate, full_s,
                     d1.median_ratio, d1.median_ratio, d5.median_ratio, d100.median_ratio, desk_s, d1.bayes_sd,
                     d1.conv_sd)});
  out.push_back({r5.coverage >= 0.90 && r5.coverage <= 0.98,
                 fmt("credible-interval coverage on the 5-year data: %.3f (limits 0.90-0.98)", r5.coverage)});
  return out;
}

// ---------------------------------------------------------------- 7, 8
int run_cli(const std::string& cli, const std::string& args, const std::string& log) {
  const std::string cmd = "cd '" + std::string(OUTRATE_SOURCE_DIR) + "' && '" + cli + "' " + args + " >>'" + log + "' 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct PipelineRun {
  std::vector<std::pair<std::string, int>> codes;
  bool ok() const {
    for (const auto& [stage, code] : codes) {
      if (code != 0 && stage != "sample") return false;
    }
    return true;
  }
};

PipelineRun bundled_pipeline(const std::string& cli, const std::string& config, const std::string& out,
                             const std::string& log) {
  const std::string common = " --config '" + config + "' --out '" + out + "'";
  PipelineRun r;
  r.codes.push_back({"ingest", run_cli(cli, "ingest" + common, log)});
  r.codes.push_back({"network", run_cli(cli, "network" + common, log)});
  r.codes.push_back({"fit", run_cli(cli, "fit" + common, log)});
  r.codes.push_back({"sample", run_cli(cli, "sample" + common, log)});
  r.codes.push_back({"report", run_cli(cli, "report" + common, log)});
  r.codes.push_back({"diagnose", run_cli(cli, "diagnose --no-gate" + common, log)});
  r.codes.push_back({"eval", run_cli(cli, "eval --truth data/synthetic_truth.csv --counts '" + out + "/counts.csv'" + common, log)});
  r.codes.push_back({"synth", run_cli(cli, "synth --years 1,5" + common, log)});
  return r;
}

std::string without_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.find("\"created\"") == std::string::npos) out += line + "\n";
  }
  return out;
}

std::vector<Result> bundled(const std::string& cli, const std::string& work) {
  const std::string config = "data/bundled_config.json";
  const fs::path base = fs::absolute(work) / "bundled";
  const fs::path first = fs::absolute(work) / "bundled_first";
  const std::string log = (fs::absolute(work) / "bundled.log").string();
  fs::remove_all(base);
  fs::remove_all(first);
  fs::remove(log);
  const PipelineRun a = bundled_pipeline(cli, config, base.string(), log);
  fs::rename(base, first);
  const PipelineRun b = bundled_pipeline(cli, config, base.string(), log);

  std::vector<Result> out;
  int sample_code = -1;
  for (const auto& [stage, code] : a.codes) {
    if (stage == "sample") sample_code = code;
  }
  double max_rhat = NAN, min_ess = NAN;
  bool gate = false;
  try {
    const Json j = Json::parse(read_text_file((first / "convergence.json").string()));
    max_rhat = j.at("max_rhat").get<double>();
    min_ess = j.at("min_ess_ratio").get<double>();
    gate = j.at("pass").get<bool>();
  } catch (const std::exception&) {
  }
  std::string failed;
  for (const auto& [stage, code] : a.codes) {
    if (code != 0) failed += " " + stage + "=" + std::to_string(code);
  }
  out.push_back({a.ok() && sample_code == 0 && gate,
                 fmt("bundled convergence gate: max R-hat %.4f (< 1.06), min ESS/N %.4f (> 0.004)%s%s", max_rhat,
                     min_ess, failed.empty() ? "" : ", nonzero exits:", failed.c_str())});

  // Byte comparison of every file; the samples sidecar is compared without its timestamp.
  std::set<std::string> names;
  for (const fs::path& root : {first, base}) {
    if (!fs::exists(root)) continue;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) names.insert(fs::relative(e.path(), root).string());
    }
  }
  std::vector<std::string> differ;
  for (const std::string& n : names) {
    const fs::path pa = first / n, pb = base / n;
    if (!fs::exists(pa) || !fs::exists(pb)) {
      differ.push_back(n + " (missing)");
      continue;
    }
    std::string ta = read_text_file(pa.string()), tb = read_text_file(pb.string());
    if (n == "samples.json") {
      ta = without_timestamp(ta);
      tb = without_timestamp(tb);
    }
    if (ta != tb) differ.push_back(n);
  }
  std::string list;
  for (std::size_t k = 0; k < differ.size() && k < 5; ++k) list += " " + differ[k];
  out.push_back({a.ok() && b.ok() && !names.empty() && differ.empty(),
                 fmt("determinism: %zu output files from 8 stages rerun with the same config and seed, %zu differ%s",
                     names.size(), differ.size(), list.c_str())});
  return out;
}

// ---------------------------------------------------------------- 9
Result zero_outage() {
  const World w = make_world(100);
  GenerativeConfig g;
  g.seed = unit_g_seed(w, g);
  g.n_years = 5;
  const SyntheticDataset d = generate(g, w.ids, w.covariates, w.kernels);
  PreparedModel p = prepare_model(w.lines, d.counts, w.distances);
  std::vector<Index> zero;
  for (Index i = 0; i < p.spec.n(); ++i) {
    if (p.spec.counts(i) == 0) zero.push_back(i);
  }
  if (zero.empty()) return {false, "zero-outage behavior: dataset has no all-zero line"};

  const std::vector<double> extra{0.0, 5.0, 15.0};
  MatrixXd mean(static_cast<Index>(zero.size()), 3), se(static_cast<Index>(zero.size()), 3);
  for (int k = 0; k < 3; ++k) {
    ModelSpec spec = p.spec;
    for (Index i : zero) spec.exposure(i) += extra[static_cast<std::size_t>(k)];
    ChainConfig cc;
    cc.seed = derive_seed(g.seed, 500 + static_cast<std::uint64_t>(k));
    const PosteriorSamples s = run_chains(spec, cc);
    for (std::size_t z = 0; z < zero.size(); ++z) {
      const std::string name = "lambda[" + std::to_string(zero[z]) + "]";
      const VectorXd x = s.pooled(name);
      mean(static_cast<Index>(z), k) = x.mean();
      se(static_cast<Index>(z), k) = sample_sd(x) / std::sqrt(effective_sample_size(s, name));
    }
  }
  bool positive = (mean.array() > 0.0).all();
  int violations = 0;
  double worst = -kInf;
  for (Index z = 0; z < mean.rows(); ++z) {
    for (int k = 0; k + 1 < 3; ++k) {
      const double rise = mean(z, k + 1) - mean(z, k);
      const double tol = 2.0 * std::hypot(se(z, k), se(z, k + 1));
      worst = std::max(worst, rise / tol);
      violations += rise >= tol;
    }
  }
  return {positive && violations == 0,
          fmt("zero-outage lines: %zu lines, min posterior mean %.4f > 0; mean rate %.3f -> %.3f -> %.3f at "
              "5/10/20 zero years; %d rises beyond 2 SE (worst rise %.2f x tolerance)",
              zero.size(), mean.minCoeff(), mean.col(0).mean(), mean.col(1).mean(), mean.col(2).mean(), violations,
              worst)};
}

// ---------------------------------------------------------------- 10
Result soft_checks(const std::string& records, const std::string& inventory, bool user_data) {
  const std::vector<OutageRecord> raw = parse_records_file(records);
  const FilterOutcome f = filter_records(raw);
  const DedupOutcome d = dedup_daily(f.kept);
  LineTable inv;
  if (!inventory.empty()) inv = read_line_table_file(inventory);
  const LineTable lines = build_line_table(d.kept, inventory.empty() ? nullptr : &inv);
  const CountMatrix counts = annual_counts(d.kept, lines, covering_years(d.kept));
  const PooledStatistics ps = pooled_statistics(counts);
  const MatrixXd dist = distance_matrix(build_graph(lines));
  const PreparedModel p = prepare_model(lines, counts, dist);
  return {true, fmt("soft checks on %s (reported, not gated): pooled mean/SD %.2f/%.2f (ref 0.6/0.7), "
                    "variance-to-mean %.2f (ref 1.2), fitted s1/s2/w %.2f/%.2f/%.2f (ref 0.45/0.42/0.52)",
                    user_data ? "user data" : "bundled synthetic data", ps.mean, ps.sd, ps.mean_variance_to_mean,
                    p.fit.sigma1_sq, p.fit.sigma2_sq, p.fit.w)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string cli = OUTRATE_CLI_PATH;
  std::string work = "acceptance_work";
  std::string records, inventory;
  app.add_option("--only", only, "criteria to run")->delimiter(',');
  app.add_option("--cli", cli, "outrate executable");
  app.add_option("--work", work, "scratch directory");
  app.add_option("--records", records, "real-format outage CSV for the soft checks");
  app.add_option("--inventory", inventory, "inventory for --records");
  CLI11_PARSE(app, argc, argv);

  const std::string src = OUTRATE_SOURCE_DIR;
  const bool user_data = !records.empty();
  if (!user_data) {
    records = src + "/data/synthetic_outages.csv";
    inventory = src + "/data/synthetic_inventory.csv";
  }
  fs::create_directories(work);

  const auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
  int failures = 0;
  const auto report = [&](int k, const Result& r, double seconds) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << k << "  " << r.detail << fmt(" [%.1f s]", seconds) << std::endl;
    failures += !r.pass;
  };
  const auto timed = [&](auto&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    return std::make_pair(r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  };
  const auto guarded = [&](int k, auto&& f) {
    try {
      auto [r, t] = timed(f);
      report(k, r, t);
    } catch (const std::exception& e) {
      report(k, {false, std::string("error: ") + e.what()}, 0.0);
    }
  };

  if (wanted(1)) guarded(1, conjugacy);
  if (wanted(2)) guarded(2, toy_posterior);
  if (wanted(3)) guarded(3, [&] { return diagonalization(src + "/data/synthetic_inventory.csv"); });
  if (wanted(4)) guarded(4, empirical_recovery);
  if (wanted(5) || wanted(6)) {
    try {
      auto [rs, t] = timed(reproduction);
      if (wanted(5)) report(5, rs[0], t);
      if (wanted(6)) report(6, rs[1], 0.0);
    } catch (const std::exception& e) {
      if (wanted(5)) report(5, {false, std::string("error: ") + e.what()}, 0.0);
      if (wanted(6)) report(6, {false, std::string("error: ") + e.what()}, 0.0);
    }
  }
  if (wanted(7) || wanted(8)) {
    try {
      auto [rs, t] = timed([&] { return bundled(cli, work); });
      if (wanted(7)) report(7, rs[0], t);
      if (wanted(8)) report(8, rs[1], 0.0);
    } catch (const std::exception& e) {
      if (wanted(7)) report(7, {false, std::string("error: ") + e.what()}, 0.0);
      if (wanted(8)) report(8, {false, std::string("error: ") + e.what()}, 0.0);
    }
  }
  if (wanted(9)) guarded(9, zero_outage);
  if (wanted(10)) guarded(10, [&] { return soft_checks(records, inventory, user_data); });
  return failures == 0 ? 0 : 1;
}
