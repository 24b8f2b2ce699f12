#include "outrate/features.hpp"

#include <map>
#include <set>

namespace outrate {

VectorXd transform_lengths(const VectorXd& lengths_miles) {
  if ((lengths_miles.array() <= 0.0).any()) throw ValidationError("line lengths must be positive");
  const VectorXd log_length = lengths_miles.array().log().matrix();
  return log_length / mad_scale(log_length);
}

VectorXd transform_voltages(const VectorXd& voltages_kv) {
  if ((voltages_kv.array() <= 0.0).any()) throw ValidationError("voltages must be positive");
  const double sd = sample_sd(voltages_kv);
  if (!(sd > 0.0)) throw DegenerateScaleError("voltage standard deviation is zero");
  const VectorXd u = voltages_kv / sd;
  return u / mad_scale(u);
}

Covariates make_covariates(const LineTable& lines) {
  return {transform_lengths(lines.lengths()), transform_voltages(lines.voltages())};
}

CorrelationReport correlation_report(const VectorXd& lengths, const VectorXd& voltages, const Covariates& covariates) {
  return {pearson(lengths, voltages), pearson(covariates.length, covariates.voltage)};
}

DistrictFeatures district_features(const LineTable& lines) {
  std::set<std::string> all;
  for (const auto& l : lines.lines()) all.insert(l.districts.begin(), l.districts.end());
  DistrictFeatures f;
  f.names.assign(all.begin(), all.end());
  std::map<std::string, Index> column;
  for (std::size_t k = 0; k < f.names.size(); ++k) column.emplace(f.names[k], static_cast<Index>(k));
  f.membership = MatrixXd::Zero(lines.size(), static_cast<Index>(f.names.size()));
  for (Index i = 0; i < lines.size(); ++i) {
    if (lines[i].districts.empty()) throw ValidationError("line " + lines[i].line_id + " has no district");
    for (const auto& d : lines[i].districts) f.membership(i, column.at(d)) = 1.0;
  }
  return f;
}

}  // namespace outrate
