#include "outrate/config.hpp"
#include "outrate/csv.hpp"
#include "outrate/error.hpp"
#include "outrate/features.hpp"
#include "outrate/inference.hpp"
#include "outrate/ingest.hpp"
#include "outrate/io.hpp"
#include "outrate/mcmc.hpp"
#include "outrate/network.hpp"
#include "outrate/pipeline.hpp"
#include "outrate/synthetic.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace outrate;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitGate = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool no_gate = false;
  std::vector<int> years;
  std::string records;
  std::string inventory;
  std::string truth;
  std::string estimates;
  std::string counts;
  std::string bundle;
};

RunConfig load_config(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : read_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.out.empty()) c.out = o.out;
  if (!o.records.empty()) c.records = o.records;
  if (!o.inventory.empty()) c.inventory = o.inventory;
  fs::create_directories(c.out);
  return c;
}

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.out) / name).string(); }

void require(const std::string& path, const std::string& stage) {
  if (!fs::exists(path)) throw ValidationError("missing " + path + "; run '" + stage + "' first");
}

void write_json(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

template <typename F>
void write_stream(const std::string& path, F&& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  f(out);
}

LineTable load_lines(const RunConfig& c) {
  const std::string p = path_in(c, "lines.csv");
  require(p, "ingest");
  return read_line_table_file(p);
}

CountMatrix load_counts(const RunConfig& c, const LineTable& lines) {
  const std::string p = path_in(c, "counts.csv");
  require(p, "ingest");
  return align_counts(read_count_matrix_file(p), lines);
}

MatrixXd load_distances(const RunConfig& c) {
  const std::string p = path_in(c, "distances.bin");
  require(p, "network");
  return read_matrix_file(p);
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// ---------------------------------------------------------------------------

int cmd_ingest(const Options& o) {
  const RunConfig c = load_config(o);
  if (c.records.empty()) throw ValidationError("ingest needs --records or 'records' in the config");
  const std::vector<OutageRecord> raw = parse_records_file(c.records);
  if (raw.empty()) throw ValidationError("no outage records in " + c.records);
  const FilterOutcome filtered = filter_records(raw, c.filter);
  const DedupOutcome dedup = dedup_daily(filtered.kept, c.day);
  std::optional<LineTable> inventory;
  if (!c.inventory.empty()) inventory = read_line_table_file(c.inventory);
  const LineTable lines = build_line_table(dedup.kept, inventory ? &*inventory : nullptr);
  if (dedup.kept.empty()) throw ValidationError("every record was removed by the filters");
  const YearRange years = covering_years(dedup.kept, c.day);
  const CountMatrix counts = annual_counts(dedup.kept, lines, years, c.day);
  write_stream(path_in(c, "lines.csv"), [&](std::ostream& s) { write_line_table(s, lines); });
  write_stream(path_in(c, "counts.csv"), [&](std::ostream& s) { write_count_matrix(s, counts); });

  const PooledStatistics pooled = pooled_statistics(counts);
  Json report = {{"schema_version", kSchemaVersion},
                 {"records_read", raw.size()},
                 {"dropped", {{"scheduled", filtered.dropped_scheduled},
                              {"momentary", filtered.dropped_momentary},
                              {"voltage", filtered.dropped_voltage}}},
                 {"merged_same_day", dedup.merged},
                 {"records_counted", dedup.kept.size()},
                 {"n_lines", lines.size()},
                 {"first_year", years.first},
                 {"last_year", years.last},
                 {"pooled", {{"mean", pooled.mean},
                             {"sd", pooled.sd},
                             {"mean_variance_to_mean", pooled.mean_variance_to_mean},
                             {"lines_in_ratio", pooled.lines_in_ratio}}},
                 {"warnings", dedup.warnings}};
  write_json(path_in(c, "ingest_report.json"), report);
  std::cout << "ingest: " << raw.size() << " records, dropped scheduled=" << filtered.dropped_scheduled
            << " momentary=" << filtered.dropped_momentary << " voltage=" << filtered.dropped_voltage
            << ", merged " << dedup.merged << "; " << lines.size() << " lines, years " << years.first << "-"
            << years.last << "\n";
  return kExitOk;
}

int cmd_network(const Options& o) {
  const RunConfig c = load_config(o);
  const LineTable lines = load_lines(c);
  const GridGraph graph = build_graph(lines);
  const MatrixXd d = distance_matrix(graph);
  write_matrix_file(path_in(c, "distances.bin"), d);
  write_stream(path_in(c, "edges.csv"), [&](std::ostream& s) { write_edge_list(s, graph); });
  const Index islands = disconnected_pairs(d);
  const KernelSet<double> k = build_kernels(lines, d, c.kernels);
  Json report = {{"schema_version", kSchemaVersion},
                 {"n_buses", graph.n_buses()},
                 {"n_lines", graph.n_lines()},
                 {"disconnected_pairs", islands},
                 {"network_kernel_off_diagonal_mass", off_diagonal_mass(k.network)},
                 {"district_kernel_off_diagonal_mass", off_diagonal_mass(k.district)}};
  write_json(path_in(c, "network_report.json"), report);
  std::cout << "network: " << graph.n_buses() << " buses, " << graph.n_lines() << " lines, " << islands
            << " disconnected pairs\n";
  return kExitOk;
}

int cmd_fit(const Options& o) {
  const RunConfig c = load_config(o);
  const LineTable lines = load_lines(c);
  const CountMatrix counts = load_counts(c, lines);
  const MatrixXd d = load_distances(c);
  const PreparedModel p = prepare_model(lines, counts, d, c.kernels, c.priors, c.fit);

  const SimDiag<double> sub = simdiag<double>(select_square(p.kernels.district, p.response.fitted),
                                              select_square(p.kernels.network, p.response.fitted));
  const ResidualReport r = pearson_residuals(p.fit, p.response.y, select(p.covariates.length, p.response.fitted),
                                             select(p.covariates.voltage, p.response.fitted), sub);
  write_stream(path_in(c, "residuals.csv"), [&](std::ostream& s) {
    csv::write_row(s, {"fitted", "raw", "pearson"});
    for (Index i = 0; i < r.pearson.size(); ++i) {
      csv::write_row(s, {csv::format_double(r.fitted(i)), csv::format_double(r.raw(i)), csv::format_double(r.pearson(i))});
    }
  });
  write_stream(path_in(c, "qq.csv"), [&](std::ostream& s) {
    csv::write_row(s, {"theoretical", "empirical"});
    for (Index i = 0; i < r.qq_empirical.size(); ++i) {
      csv::write_row(s, {csv::format_double(r.qq_theoretical(i)), csv::format_double(r.qq_empirical(i))});
    }
  });
  const CorrelationReport corr = correlation_report(lines.lengths(), lines.voltages(), p.covariates);
  Json j = {{"schema_version", kSchemaVersion},
            {"fit", to_json(p.fit)},
            {"converged", p.fit_converged},
            {"n_excluded_zero_lines", p.response.excluded.size()},
            {"correlation", {{"raw", number_or_null(corr.raw)}, {"transformed", number_or_null(corr.transformed)}}},
            {"kernels", {{"jitter", p.simdiag.jitter},
                         {"clipped_eigenvalues", p.simdiag.clipped},
                         {"min_raw_eigenvalue", p.simdiag.min_raw_eigenvalue},
                         {"network_off_diagonal_mass", off_diagonal_mass(p.kernels.network)},
                         {"rate", c.kernels.rate},
                         {"unit_miles", c.kernels.unit_miles}}},
            {"model", model_summary(p.spec)},
            {"warnings", p.warnings}};
  write_json(path_in(c, "fit.json"), j);
  std::cout << "fit: m=" << p.fit.m << " beta_L=" << p.fit.beta_length << " beta_V=" << p.fit.beta_voltage
            << " sigma1^2=" << p.fit.sigma1_sq << " sigma2^2=" << p.fit.sigma2_sq << " w=" << p.fit.w << "\n";
  return kExitOk;
}

ChainConfig chain_config(const RunConfig& c) {
  ChainConfig cc = c.chains;
  cc.seed = stage_seed(c, Stage::sample);
  return cc;
}

int gate(const ChainDiagnostics& d, bool no_gate, const char* stage) {
  std::cout << stage << ": max R-hat " << d.max_rhat << ", min ESS/N " << d.min_ess_ratio << " -> "
            << (d.pass ? "PASS" : "FAIL") << "\n";
  for (std::size_t k = 0; k < d.offenders.size() && k < 5; ++k) {
    std::cout << "  offender " << d.offenders[k].name << " rhat=" << d.offenders[k].rhat
              << " ess_ratio=" << d.offenders[k].ess_ratio << "\n";
  }
  if (!d.pass && !no_gate) return kExitGate;
  return kExitOk;
}

int cmd_sample(const Options& o) {
  const RunConfig c = load_config(o);
  require(path_in(c, "fit.json"), "fit");
  const LineTable lines = load_lines(c);
  const CountMatrix counts = load_counts(c, lines);
  const MatrixXd d = load_distances(c);
  const PreparedModel p = prepare_model(lines, counts, d, c.kernels, c.priors, c.fit);
  const ChainConfig cc = chain_config(c);
  const PosteriorSamples s = run_chains(p.spec, cc);
  write_samples_file(path_in(c, "samples.bin"), s);
  const ChainDiagnostics diag = convergence_report(s, c.thresholds);
  write_stream(path_in(c, "diagnostics.csv"), [&](std::ostream& f) { write_diagnostics_csv(f, diag); });
  write_json(path_in(c, "convergence.json"), to_json(diag));

  Json blocks = Json::array();
  for (std::size_t ch = 0; ch < s.block_stats.size(); ++ch) {
    for (const BlockStats& b : s.block_stats[ch]) {
      blocks.push_back({{"chain", ch}, {"block", b.name}, {"acceptance", b.acceptance()}, {"step", b.step},
                        {"divergences", b.divergences}});
    }
  }
  Json sidecar = {{"schema_version", kSchemaVersion},
                  {"build", build_hash()},
                  {"created", utc_now()},
                  {"seed", cc.seed},
                  {"global_seed", c.seed},
                  {"config", to_json(c)},
                  {"model", model_summary(p.spec)},
                  {"n_chains", s.n_chains()},
                  {"n_draws_per_chain", s.n_draws()},
                  {"blocks", blocks},
                  {"warnings", s.warnings}};
  write_json(path_in(c, "samples.json"), sidecar);
  for (const std::string& w : s.warnings) std::cerr << "warning: " << w << "\n";
  return gate(diag, o.no_gate, "sample");
}

void write_trace_files(const RunConfig& c, const PosteriorSamples& s) {
  const std::vector<std::string> hyper{"alpha", "beta_length", "beta_voltage", "m", "sigma_sq", "w"};
  write_stream(path_in(c, "traces.csv"), [&](std::ostream& f) {
    csv::Row header{"chain", "draw"};
    header.insert(header.end(), hyper.begin(), hyper.end());
    csv::write_row(f, header);
    for (Index ch = 0; ch < s.n_chains(); ++ch) {
      for (Index r = 0; r < s.n_draws(); ++r) {
        csv::Row row{std::to_string(ch), std::to_string(r)};
        for (const std::string& h : hyper) row.push_back(csv::format_double(s.chain(ch)(r, s.index_of(h))));
        csv::write_row(f, row);
      }
    }
  });
  const Index max_lag = std::min<Index>(50, s.n_draws() - 1);
  write_stream(path_in(c, "acf.csv"), [&](std::ostream& f) {
    csv::Row header{"lag"};
    std::vector<VectorXd> series;
    for (const std::string& h : hyper) {
      try {
        series.push_back(acf(s.traces(h), max_lag));
        header.push_back(h);
      } catch (const DiagnosticError&) {
      }
    }
    csv::write_row(f, header);
    for (Index lag = 0; lag <= max_lag; ++lag) {
      csv::Row row{std::to_string(lag)};
      for (const VectorXd& v : series) row.push_back(csv::format_double(v(lag)));
      csv::write_row(f, row);
    }
  });
}

int cmd_report(const Options& o) {
  const RunConfig c = load_config(o);
  const std::string sp = path_in(c, "samples.bin");
  require(sp, "sample");
  const PosteriorSamples s = read_samples_file(sp);
  const LineTable lines = load_lines(c);
  const CountMatrix counts = load_counts(c, lines);
  if (s.n_lines() != lines.size()) throw ValidationError("samples do not match the line table");
  const RateEstimates bayes = posterior_point(s);
  const ConventionalEstimates conv = conventional(counts);
  const ComparisonReport cmp = sd_ratio_report(bayes, conv, static_cast<double>(counts.n_years()));
  write_stream(path_in(c, "estimates.csv"), [&](std::ostream& f) { write_estimates_csv(f, counts.line_ids, bayes, conv); });
  write_stream(path_in(c, "sd_ratio_kde.csv"), [&](std::ostream& f) { write_kde_csv(f, cmp.histogram); });
  write_trace_files(c, s);

  Index below_one = 0;
  for (Index i = 0; i < bayes.size(); ++i) below_one += bayes.mean(i) < 1.0;
  Json j = {{"schema_version", kSchemaVersion},
            {"n_lines", bayes.size()},
            {"n_years", counts.n_years()},
            {"mean_posterior_rate", bayes.mean.mean()},
            {"fraction_below_one", static_cast<double>(below_one) / static_cast<double>(bayes.size())},
            {"median_sd_ratio", cmp.included.empty() ? Json(nullptr) : Json(cmp.median_ratio)},
            {"equivalent_years", cmp.included.empty() ? Json(nullptr) : Json(cmp.equivalent_years)},
            {"ratio_lines_excluded", cmp.excluded}};

  if (!o.years.empty()) {
    const MatrixXd d = load_distances(c);
    const Trajectory t = trajectory(lines, counts, d, o.years, chain_config(c), c.kernels, c.priors);
    write_stream(path_in(c, "trajectory.csv"), [&](std::ostream& f) {
      csv::Row header{"line_id"};
      for (int y : t.cutoffs) {
        header.push_back("mean_" + std::to_string(y) + "y");
        header.push_back("sd_" + std::to_string(y) + "y");
      }
      csv::write_row(f, header);
      for (Index i = 0; i < t.mean.rows(); ++i) {
        csv::Row row{counts.line_ids[static_cast<std::size_t>(i)]};
        for (Index k = 0; k < t.mean.cols(); ++k) {
          row.push_back(csv::format_double(t.mean(i, k)));
          row.push_back(csv::format_double(t.sd(i, k)));
        }
        csv::write_row(f, row);
      }
    });
    j["trajectory_cutoffs"] = o.years;
  }
  write_json(path_in(c, "report.json"), j);
  std::cout << "report: " << bayes.size() << " lines, mean posterior rate " << bayes.mean.mean();
  if (!cmp.included.empty()) {
    std::cout << ", median SD ratio " << cmp.median_ratio << " (equivalent " << cmp.equivalent_years << " years)";
  }
  std::cout << "\n";
  return kExitOk;
}

int cmd_diagnose(const Options& o) {
  const RunConfig c = load_config(o);
  const std::string sp = path_in(c, "samples.bin");
  require(sp, "sample");
  const PosteriorSamples s = read_samples_file(sp);
  const ChainDiagnostics d = convergence_report(s, c.thresholds);
  write_stream(path_in(c, "diagnostics.csv"), [&](std::ostream& f) { write_diagnostics_csv(f, d); });
  write_json(path_in(c, "convergence.json"), to_json(d));
  write_trace_files(c, s);
  return gate(d, o.no_gate, "diagnose");
}

struct SynthInputs {
  LineTable lines;
  MatrixXd distances;
  Covariates covariates;
  KernelSet<double> kernels;
  Json source;
};

SynthInputs synth_inputs(const RunConfig& c, bool generate_inventory) {
  SynthInputs in;
  if (!c.inventory.empty() && !generate_inventory) {
    in.lines = read_line_table_file(c.inventory);
    in.source = {{"inventory_file", c.inventory}};
  } else {
    in.lines = synthetic_inventory(c.synthetic.inventory);
    in.source = {{"generated_inventory", to_json(c).at("synthetic").at("inventory")}};
  }
  in.distances = distance_matrix(build_graph(in.lines));
  in.covariates = make_covariates(in.lines);
  in.kernels = build_kernels(in.lines, in.distances, c.kernels);
  return in;
}

std::vector<std::string> ids_of(const LineTable& lines) {
  std::vector<std::string> ids;
  for (const LineInfo& l : lines.lines()) ids.push_back(l.line_id);
  return ids;
}

int cmd_synth(const Options& o) {
  const RunConfig c = load_config(o);
  const SynthInputs in = synth_inputs(c, !o.bundle.empty());
  const std::vector<std::string> ids = ids_of(in.lines);
  GenerativeConfig g = c.synthetic.generative;
  g.seed = stage_seed(c, Stage::synth);

  if (!o.bundle.empty()) {
    // Record-level bundle for the ingest pipeline.
    fs::create_directories(o.bundle);
    const SyntheticDataset d = generate(g, ids, in.covariates, in.kernels);
    RecordOptions ro = c.synthetic.records;
    ro.seed = stage_seed(c, Stage::records);
    const std::vector<OutageRecord> records = synthetic_records(in.lines, d.counts, ro);
    const fs::path b(o.bundle);
    write_stream((b / "synthetic_inventory.csv").string(), [&](std::ostream& f) { write_line_table(f, in.lines); });
    write_stream((b / "synthetic_outages.csv").string(), [&](std::ostream& f) { write_records_csv(f, records); });
    write_stream((b / "synthetic_truth.csv").string(), [&](std::ostream& f) { write_truth_csv(f, ids, d.lambda); });
    std::cout << "synth: bundle with " << in.lines.size() << " lines, " << records.size() << " records over "
              << g.n_years << " years -> " << o.bundle << "\n";
    return kExitOk;
  }

  const std::vector<int> years = o.years.empty() ? c.synthetic.years : o.years;
  for (int y : years) {
    GenerativeConfig gy = g;
    gy.n_years = y;
    const SyntheticDataset d = generate(gy, ids, in.covariates, in.kernels);
    const fs::path dir = fs::path(c.out) / ("synth_" + std::to_string(y) + "y");
    fs::create_directories(dir);
    write_stream((dir / "lines.csv").string(), [&](std::ostream& f) { write_line_table(f, in.lines); });
    write_stream((dir / "counts.csv").string(), [&](std::ostream& f) { write_count_matrix(f, d.counts); });
    write_stream((dir / "truth.csv").string(), [&](std::ostream& f) { write_truth_csv(f, ids, d.lambda); });
    write_matrix_file((dir / "distances.bin").string(), in.distances);
    const VectorXd oracle = conventional_sd_oracle(gy, d.lambda, d.g, y, c.synthetic.oracle_replicates,
                                                   stage_seed(c, Stage::oracle));
    write_stream((dir / "oracle_sd.csv").string(), [&](std::ostream& f) {
      csv::write_row(f, {"line_id", "conventional_sd"});
      for (std::size_t i = 0; i < ids.size(); ++i) csv::write_row(f, {ids[i], csv::format_double(oracle(static_cast<Index>(i)))});
    });
    Json prov = {{"schema_version", kSchemaVersion},
                 {"generative", to_json(gy)},
                 {"g", d.g},
                 {"kernels", {{"rate", c.kernels.rate}, {"unit_miles", c.kernels.unit_miles}}},
                 {"source", in.source},
                 {"oracle", {{"replicates", c.synthetic.oracle_replicates}, {"seed", stage_seed(c, Stage::oracle)}}}};
    write_json((dir / "provenance.json").string(), prov);
    std::cout << "synth: " << y << "-year dataset, G=" << d.g << ", mean true rate " << d.lambda.mean() << " -> "
              << dir.string() << "\n";
  }
  return kExitOk;
}

struct EstimateColumns {
  std::vector<std::string> ids;
  VectorXd mean;
  VectorXd low;
  VectorXd high;
};

EstimateColumns read_estimates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open estimates " + path);
  const csv::Table t = csv::read(in);
  const int c_id = t.column("line_id");
  const int c_mean = t.column("posterior_mean");
  const int c_low = t.column("ci_low");
  const int c_high = t.column("ci_high");
  if (c_id < 0 || c_mean < 0) throw SchemaError("estimates need line_id and posterior_mean columns");
  EstimateColumns e;
  const Index n = static_cast<Index>(t.rows.size());
  e.mean.resize(n);
  e.low.resize(c_low >= 0 && c_high >= 0 ? n : 0);
  e.high.resize(e.low.size());
  for (Index i = 0; i < n; ++i) {
    const csv::Row& r = t.rows[static_cast<std::size_t>(i)];
    e.ids.push_back(r.at(static_cast<std::size_t>(c_id)));
    e.mean(i) = std::stod(r.at(static_cast<std::size_t>(c_mean)));
    if (e.low.size()) {
      e.low(i) = std::stod(r.at(static_cast<std::size_t>(c_low)));
      e.high(i) = std::stod(r.at(static_cast<std::size_t>(c_high)));
    }
  }
  return e;
}

Json evaluation_json(const EvaluationReport& r) {
  return {{"bias", r.bias}, {"error_sd", r.error_sd}, {"rmse", r.rmse}, {"coverage", number_or_null(r.coverage)}};
}

int cmd_eval(const Options& o) {
  const RunConfig c = load_config(o);
  const std::string est_path = o.estimates.empty() ? path_in(c, "estimates.csv") : o.estimates;
  if (o.truth.empty()) throw ValidationError("eval needs --truth");
  const EstimateColumns e = read_estimates(est_path);
  std::ifstream tin(o.truth);
  if (!tin) throw ValidationError("cannot open truth " + o.truth);
  const VectorXd truth = read_truth_csv(tin, e.ids);
  const EvaluationReport r = e.low.size() ? evaluate(e.mean, truth, &e.low, &e.high) : evaluate(e.mean, truth);
  Json j = {{"schema_version", kSchemaVersion}, {"n_lines", truth.size()}, {"bayes", evaluation_json(r)}};
  if (!o.counts.empty()) {
    CountMatrix counts = read_count_matrix_file(o.counts);
    std::ifstream tin2(o.truth);
    const VectorXd truth_c = read_truth_csv(tin2, counts.line_ids);
    j["conventional"] = evaluation_json(evaluate(conventional(counts).mean, truth_c));
  }
  write_json(path_in(c, "evaluation.json"), j);
  write_stream(path_in(c, "error_histogram.csv"), [&](std::ostream& f) {
    csv::write_row(f, {"bin_low", "bin_high", "count"});
    for (Index b = 0; b < r.histogram_counts.size(); ++b) {
      csv::write_row(f, {csv::format_double(r.histogram_edges(b)), csv::format_double(r.histogram_edges(b + 1)),
                         csv::format_double(r.histogram_counts(b))});
    }
  });
  std::cout << "eval: bias " << r.bias << ", error SD " << r.error_sd;
  if (std::isfinite(r.coverage)) std::cout << ", coverage " << r.coverage;
  std::cout << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transmission-line outage rate estimation"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON run configuration");
    sub->add_option("--seed", seed, "global seed (overrides the config)");
    sub->add_option("--out", o.out, "output and working directory");
    sub->add_flag("--no-gate", o.no_gate, "do not fail on the convergence gate");
    sub->add_option("--years", o.years, "dataset lengths (synth) or trajectory cutoffs (report)")->delimiter(',');
  };
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Command commands[] = {
      {"ingest", "parse, filter and count outage records", cmd_ingest},
      {"network", "build the grid graph and line distances", cmd_network},
      {"fit", "empirical correlated-intercept fit", cmd_fit},
      {"sample", "run the MCMC chains", cmd_sample},
      {"report", "posterior summaries and comparisons", cmd_report},
      {"synth", "generate synthetic datasets", cmd_synth},
      {"eval", "score estimates against a known truth", cmd_eval},
      {"diagnose", "convergence diagnostics of a samples file", cmd_diagnose},
  };
  std::vector<std::pair<CLI::App*, const Command*>> subs;
  for (const Command& cmd : commands) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    common(sub);
    subs.emplace_back(sub, &cmd);
  }
  app.get_subcommand("ingest")->add_option("--records", o.records, "outage CSV");
  app.get_subcommand("ingest")->add_option("--inventory", o.inventory, "optional line inventory CSV");
  app.get_subcommand("synth")->add_option("--inventory", o.inventory, "line inventory CSV (default: generated)");
  app.get_subcommand("synth")->add_option("--bundle", o.bundle, "write a record-level bundle to this directory");
  app.get_subcommand("eval")->add_option("--truth", o.truth, "truth CSV");
  app.get_subcommand("eval")->add_option("--estimates", o.estimates, "estimates CSV");
  app.get_subcommand("eval")->add_option("--counts", o.counts, "count CSV for the conventional estimator");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  }
  for (auto& [sub, cmd] : subs) {
    if (!sub->parsed()) continue;
    if (sub->count("--seed")) o.seed = seed;
    try {
      return cmd->run(o);
    } catch (const ValidationError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitValidation;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitOther;
    }
  }
  return kExitOther;
}
