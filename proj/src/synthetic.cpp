#include "outrate/synthetic.hpp"

#include "outrate/csv.hpp"
#include "outrate/error.hpp"
#include "outrate/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

namespace outrate {

namespace {

long poisson(double mean, Rng& rng) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<long> p(mean);
  return p(rng);
}

double gamma_draw(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  return g(rng);
}

std::string padded(const char* prefix, Index k, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*ld", prefix, width, static_cast<long>(k));
  return buf;
}

}  // namespace

std::string to_string(GMode mode) { return mode == GMode::per_dataset ? "per_dataset" : "per_count"; }

GMode parse_g_mode(const std::string& text) {
  if (text == "per_dataset") return GMode::per_dataset;
  if (text == "per_count") return GMode::per_count;
  throw ValidationError("unknown G mode '" + text + "'");
}

void GenerativeConfig::validate() const {
  if (!(a > 0.0)) throw ValidationError("overdispersion shape a must be positive");
  if (!(w >= 0.0 && w <= 1.0)) throw ValidationError("kernel weight must lie in [0, 1]");
  if (n_years < 1) throw ValidationError("n_years must be at least 1");
}

SyntheticDataset generate(const GenerativeConfig& config, const std::vector<std::string>& line_ids,
                          const Covariates& covariates, const KernelSet<double>& kernels) {
  config.validate();
  const Index n = static_cast<Index>(line_ids.size());
  if (covariates.length.size() != n || covariates.voltage.size() != n || kernels.district.rows() != n ||
      kernels.network.rows() != n) {
    throw ValidationError("generate: covariates and kernels must match the line set");
  }
  const MatrixXd sigma = config.w * kernels.district + (1.0 - config.w) * kernels.network;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success) throw ValidationError("generate: eigendecomposition failed");
  const double top = std::max(1.0, eig.eigenvalues().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -1e-8 * top) throw ValidationError("generate: covariance is not PSD");
  const MatrixXd root = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

  Rng truth_rng(derive_seed(config.seed, 0));
  VectorXd xi(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Index i = 0; i < n; ++i) xi(i) = normal(truth_rng);
  const VectorXd mean = (config.beta_length * covariates.length + config.beta_voltage * covariates.voltage).array() +
                        config.m;

  SyntheticDataset d;
  d.config = config;
  d.lambda = (mean + root * xi).array().exp().matrix();
  Rng g_rng(derive_seed(config.seed, 1));
  d.g = config.g_mode == GMode::per_dataset ? gamma_draw(config.a, config.a, g_rng) : 1.0;

  d.counts.line_ids = line_ids;
  d.counts.first_year = config.first_year;
  d.counts.counts = Eigen::MatrixXi::Zero(n, config.n_years);
  d.counts.exposure = VectorXd::Constant(n, config.n_years);
  Rng count_rng(derive_seed(config.seed, 2));
  // Years outer so shorter datasets are prefixes of longer ones.
  for (int j = 0; j < config.n_years; ++j) {
    for (Index i = 0; i < n; ++i) {
      const double g = config.g_mode == GMode::per_dataset ? d.g : gamma_draw(config.a, config.a, count_rng);
      d.counts.counts(i, j) = static_cast<int>(poisson(d.lambda(i) * g, count_rng));
    }
  }
  return d;
}

QuadraticFit variance_mean_fit(const CountMatrix& counts) {
  const Index n = counts.n_lines();
  if (counts.n_years() < 2) throw ValidationError("variance_mean_fit needs at least two years");
  MatrixXd x(n, 3);
  VectorXd y(n);
  std::set<double> distinct;
  for (Index i = 0; i < n; ++i) {
    const VectorXd row = counts.counts.row(i).cast<double>().transpose();
    const double mu = row.mean();
    x(i, 0) = 1.0;
    x(i, 1) = mu;
    x(i, 2) = mu * mu;
    y(i) = sample_variance(row);
    distinct.insert(mu);
  }
  if (distinct.size() < 3) throw ValidationError("variance_mean_fit needs at least three distinct line means");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < 3) throw ValidationError("variance_mean_fit: design is rank deficient");
  const Eigen::Vector3d c = qr.solve(y);
  return {c(0), c(1), c(2)};
}

VectorXd conventional_sd_oracle(const GenerativeConfig& config, const VectorXd& lambda, double g, int n_years,
                                int replicates, std::uint64_t seed, bool redraw_g) {
  if (n_years < 1 || replicates < 2) throw ValidationError("oracle needs n_years >= 1 and at least two replicates");
  const Index n = lambda.size();
  Rng rng(seed);
  VectorXd mean = VectorXd::Zero(n);
  VectorXd m2 = VectorXd::Zero(n);
  const bool per_count = redraw_g && config.g_mode == GMode::per_count;
  for (int b = 0; b < replicates; ++b) {
    const double g_b = redraw_g && !per_count ? gamma_draw(config.a, config.a, rng) : g;
    for (Index i = 0; i < n; ++i) {
      long total = 0;
      if (per_count) {
        for (int j = 0; j < n_years; ++j) total += poisson(lambda(i) * gamma_draw(config.a, config.a, rng), rng);
      } else {
        total = poisson(lambda(i) * g_b * n_years, rng);  // sum of n_years i.i.d. Poisson counts
      }
      const double est = static_cast<double>(total) / n_years;
      const double delta = est - mean(i);
      mean(i) += delta / (b + 1);
      m2(i) += delta * (est - mean(i));
    }
  }
  return (m2 / (replicates - 1)).cwiseSqrt();
}

EvaluationReport evaluate(const VectorXd& estimate, const VectorXd& truth, const VectorXd* ci_low,
                          const VectorXd* ci_high, Index bins) {
  if (estimate.size() != truth.size() || estimate.size() == 0) throw ValidationError("evaluate: line sets differ");
  EvaluationReport r;
  r.error = estimate - truth;
  r.bias = r.error.mean();
  r.error_sd = sample_sd(r.error);
  r.rmse = std::sqrt(r.error.squaredNorm() / static_cast<double>(r.error.size()));
  if (ci_low && ci_high) {
    if (ci_low->size() != truth.size() || ci_high->size() != truth.size()) {
      throw ValidationError("evaluate: interval arrays differ in length");
    }
    Index inside = 0;
    for (Index i = 0; i < truth.size(); ++i) inside += truth(i) >= (*ci_low)(i) && truth(i) <= (*ci_high)(i);
    r.coverage = static_cast<double>(inside) / static_cast<double>(truth.size());
  }
  bins = std::max<Index>(bins, 1);
  const double lo = r.error.minCoeff();
  const double hi = r.error.maxCoeff();
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  r.histogram_edges = VectorXd::LinSpaced(bins + 1, lo, lo + width * static_cast<double>(bins));
  r.histogram_counts = VectorXd::Zero(bins);
  for (Index i = 0; i < r.error.size(); ++i) {
    const Index b = std::min<Index>(bins - 1, static_cast<Index>((r.error(i) - lo) / width));
    r.histogram_counts(b) += 1.0;
  }
  return r;
}

LineTable synthetic_inventory(const InventoryConfig& config) {
  if (config.n_buses < 2 || config.n_lines < config.n_buses - 1) {
    throw ValidationError("inventory needs at least n_buses - 1 lines to connect every bus");
  }
  if (config.voltages.size() != config.voltage_weights.size() || config.voltages.empty()) {
    throw ValidationError("voltage levels and weights differ in length");
  }
  Rng rng(derive_seed(config.seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Index nb = config.n_buses;
  MatrixXd xy(nb, 2);
  for (Index b = 0; b < nb; ++b) {
    xy(b, 0) = unit(rng);
    xy(b, 1) = unit(rng);
  }
  const auto dist2 = [&](Index a, Index b) { return (xy.row(a) - xy.row(b)).squaredNorm(); };
  const auto district_of = [&](Index b) {
    const int col = std::min(config.district_cols - 1, static_cast<int>(xy(b, 0) * config.district_cols));
    const int row = std::min(config.district_rows - 1, static_cast<int>(xy(b, 1) * config.district_rows));
    return padded("D", row * config.district_cols + col + 1, 2);
  };

  std::vector<std::pair<Index, Index>> edges;
  for (Index b = 1; b < nb; ++b) {
    Index best = 0;
    for (Index a = 1; a < b; ++a) {
      if (dist2(a, b) < dist2(best, b)) best = a;
    }
    edges.emplace_back(best, b);
  }
  std::uniform_int_distribution<Index> pick_bus(0, nb - 1);
  const Index k_near = std::min<Index>(4, nb - 1);
  std::uniform_int_distribution<Index> pick_near(0, k_near - 1);
  while (static_cast<Index>(edges.size()) < config.n_lines) {
    const Index a = pick_bus(rng);
    std::vector<Index> others;
    for (Index b = 0; b < nb; ++b) {
      if (b != a) others.push_back(b);
    }
    std::partial_sort(others.begin(), others.begin() + k_near, others.end(), [&](Index u, Index v) {
      return dist2(a, u) < dist2(a, v) || (dist2(a, u) == dist2(a, v) && u < v);
    });
    const Index b = others[static_cast<std::size_t>(pick_near(rng))];
    edges.emplace_back(std::min(a, b), std::max(a, b));
  }

  std::lognormal_distribution<double> length(std::log(config.median_length), config.sdlog_length);
  std::discrete_distribution<int> voltage(config.voltage_weights.begin(), config.voltage_weights.end());
  std::vector<LineInfo> lines;
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const auto [a, b] = edges[k];
    LineInfo l;
    l.line_id = padded("L", static_cast<Index>(k + 1), 4);
    l.from_bus = padded("B", a + 1, 3);
    l.to_bus = padded("B", b + 1, 3);
    l.length_miles = std::round(length(rng) * 100.0) / 100.0;
    if (l.length_miles < 0.1) l.length_miles = 0.1;
    l.voltage_kv = config.voltages[static_cast<std::size_t>(voltage(rng))];
    std::set<std::string> ds{district_of(a), district_of(b)};
    l.districts.assign(ds.begin(), ds.end());
    lines.push_back(std::move(l));
  }
  return LineTable(std::move(lines));
}

std::vector<OutageRecord> synthetic_records(const LineTable& lines, const CountMatrix& counts,
                                            const RecordOptions& options) {
  using namespace std::chrono;
  static const char* const kCauses[] = {"lightning", "wind", "equipment", "vegetation", "fire", "unknown"};
  Rng rng(derive_seed(options.seed, 0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<OutageRecord> out;
  const auto make = [&](const LineInfo& l, sys_days day, seconds start_offset, seconds duration, OutageType type) {
    OutageRecord r;
    r.line_id = l.line_id;
    r.from_bus = l.from_bus;
    r.to_bus = l.to_bus;
    r.start = TimePoint{day} + start_offset;
    r.end = r.start + duration;
    r.type = type;
    r.cause = kCauses[static_cast<std::size_t>(unit(rng) * 6.0) % 6];
    r.voltage_kv = l.voltage_kv;
    r.length_miles = l.length_miles;
    r.districts = l.districts;
    return r;
  };
  const auto random_day = [&](int year) {
    const sys_days first{std::chrono::year{year} / January / 1};
    const sys_days next{std::chrono::year{year + 1} / January / 1};
    const auto span = (next - first).count();
    return first + days{static_cast<int>(unit(rng) * static_cast<double>(span)) % span};
  };
  const auto forced_duration = [&] { return seconds{120 + static_cast<long>(unit(rng) * 3.0 * 3600.0)}; };

  for (Index i = 0; i < counts.n_lines(); ++i) {
    const LineInfo& l = lines[lines.index_of(counts.line_ids[static_cast<std::size_t>(i)])];
    for (Index j = 0; j < counts.n_years(); ++j) {
      const int year = counts.first_year + static_cast<int>(j);
      const sys_days first{std::chrono::year{year} / January / 1};
      const sys_days next{std::chrono::year{year + 1} / January / 1};
      const int span = static_cast<int>((next - first).count());
      const int n = counts.counts(i, j);
      if (n > span) throw ValidationError("more outages than days in a year");
      std::vector<int> all(static_cast<std::size_t>(span));
      std::iota(all.begin(), all.end(), 0);
      std::vector<int> chosen;
      std::sample(all.begin(), all.end(), std::back_inserter(chosen), n, rng);
      for (int d : chosen) {
        const sys_days day = first + days{d};
        // Start before 18:00 so the reclosure below stays on the same calendar day.
        const seconds start{static_cast<long>(unit(rng) * 18.0 * 3600.0)};
        OutageRecord r = make(l, day, start, forced_duration(), OutageType::forced);
        const TimePoint end = r.end;
        out.push_back(r);
        if (unit(rng) < options.reclosure_fraction) {
          const seconds later = duration_cast<seconds>(end - TimePoint{day}) + seconds{300};
          out.push_back(make(l, day, later, seconds{600}, OutageType::forced));
        }
      }
      const auto extras = [&](double fraction) {
        return poisson(fraction * (static_cast<double>(n) + 0.2), rng);
      };
      for (long k = extras(options.momentary_fraction); k > 0; --k) {
        const seconds len{1 + static_cast<long>(unit(rng) * 59.0)};
        out.push_back(make(l, random_day(year), seconds{static_cast<long>(unit(rng) * 80000.0)}, len,
                           OutageType::forced));
      }
      for (long k = extras(options.scheduled_fraction); k > 0; --k) {
        out.push_back(make(l, random_day(year), seconds{static_cast<long>(unit(rng) * 40000.0)},
                           seconds{3600 * (1 + static_cast<long>(unit(rng) * 8.0))}, OutageType::scheduled));
      }
    }
  }
  const int first_year = counts.first_year;
  for (int h = 0; h < options.extra_high_voltage_lines; ++h) {
    LineInfo l;
    l.line_id = padded("HV", h + 1, 2);
    l.from_bus = padded("X", 2 * h + 1, 2);
    l.to_bus = padded("X", 2 * h + 2, 2);
    l.voltage_kv = 1000.0;
    l.length_miles = 150.0;
    l.districts = {"D01"};
    for (Index j = 0; j < counts.n_years(); ++j) {
      for (long k = poisson(1.0, rng); k > 0; --k) {
        out.push_back(make(l, random_day(first_year + static_cast<int>(j)), seconds{3600}, seconds{7200},
                           OutageType::forced));
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const OutageRecord& a, const OutageRecord& b) {
    return a.start != b.start ? a.start < b.start : a.line_id < b.line_id;
  });
  for (std::size_t k = 0; k < out.size(); ++k) out[k].source_row = k + 1;
  return out;
}

void write_records_csv(std::ostream& out, const std::vector<OutageRecord>& records) {
  csv::write_row(out, {"line_id", "from_bus", "to_bus", "start", "end", "type", "cause", "voltage_kv", "length_miles",
                       "districts"});
  for (const OutageRecord& r : records) {
    std::string d;
    for (std::size_t k = 0; k < r.districts.size(); ++k) d += (k ? ";" : "") + r.districts[k];
    csv::write_row(out, {r.line_id, r.from_bus, r.to_bus, format_timestamp(r.start), format_timestamp(r.end),
                         to_string(r.type), r.cause, csv::format_double(r.voltage_kv),
                         csv::format_double(r.length_miles), d});
  }
}

void write_truth_csv(std::ostream& out, const std::vector<std::string>& line_ids, const VectorXd& lambda) {
  csv::write_row(out, {"line_id", "lambda"});
  for (std::size_t i = 0; i < line_ids.size(); ++i) {
    csv::write_row(out, {line_ids[i], csv::format_double(lambda(static_cast<Index>(i)))});
  }
}

VectorXd read_truth_csv(std::istream& in, const std::vector<std::string>& line_ids) {
  const csv::Table t = csv::read(in);
  const int c_id = t.column("line_id");
  const int c_val = t.column("lambda");
  if (c_id < 0 || c_val < 0) throw SchemaError("truth CSV needs line_id and lambda columns");
  std::map<std::string, double> values;
  for (const csv::Row& row : t.rows) {
    values[row.at(static_cast<std::size_t>(c_id))] = std::stod(row.at(static_cast<std::size_t>(c_val)));
  }
  VectorXd out(static_cast<Index>(line_ids.size()));
  for (std::size_t i = 0; i < line_ids.size(); ++i) {
    const auto it = values.find(line_ids[i]);
    if (it == values.end()) throw ValidationError("truth CSV lacks line " + line_ids[i]);
    out(static_cast<Index>(i)) = it->second;
  }
  return out;
}

}  // namespace outrate
