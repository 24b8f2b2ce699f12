#pragma once

#include "outrate/types.hpp"

#include <chrono>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace outrate {

using TimePoint = std::chrono::sys_seconds;

enum class OutageType { forced, scheduled };

struct OutageRecord {
  std::string line_id;
  std::string from_bus;
  std::string to_bus;
  TimePoint start{};
  TimePoint end{};
  OutageType type = OutageType::forced;
  std::string cause;
  double voltage_kv = 0.0;
  double length_miles = 0.0;
  std::vector<std::string> districts;  // sorted, unique
  std::size_t source_row = 0;

  std::chrono::seconds duration() const { return end - start; }
};

struct LineInfo {
  std::string line_id;
  std::string from_bus;
  std::string to_bus;
  double voltage_kv = 0.0;
  double length_miles = 0.0;
  std::vector<std::string> districts;  // sorted, unique

  friend bool operator==(const LineInfo&, const LineInfo&) = default;
};

// Line attributes keyed by id, kept sorted by line id.
class LineTable {
 public:
  LineTable() = default;
  explicit LineTable(std::vector<LineInfo> lines);

  Index size() const { return static_cast<Index>(lines_.size()); }
  bool empty() const { return lines_.empty(); }
  const std::vector<LineInfo>& lines() const { return lines_; }
  const LineInfo& operator[](Index i) const { return lines_[static_cast<std::size_t>(i)]; }
  std::optional<Index> find(const std::string& line_id) const;
  Index index_of(const std::string& line_id) const;  // throws when unknown

  VectorXd lengths() const;
  VectorXd voltages() const;

 private:
  std::vector<LineInfo> lines_;
  std::map<std::string, Index> index_;
};

// Lines x years table of deduplicated outage counts.
struct CountMatrix {
  std::vector<std::string> line_ids;
  int first_year = 0;
  Eigen::MatrixXi counts;  // rows: lines, cols: consecutive years from first_year
  VectorXd exposure;       // t_i in years

  Index n_lines() const { return counts.rows(); }
  Index n_years() const { return counts.cols(); }
  VectorXd totals() const;  // N_i
  // Keeps the first `years` columns; exposure becomes `years` for every line.
  CountMatrix truncated(Index years) const;
};

struct YearRange {
  int first = 0;
  int last = 0;  // inclusive
};

struct FilterPolicy {
  bool drop_scheduled = true;
  // Outages lasting at most this long are momentary and discarded.
  std::chrono::seconds momentary_max{60};
  std::vector<double> excluded_voltages_kv{1000.0};
};

struct FilterOutcome {
  std::vector<OutageRecord> kept;
  std::size_t dropped_scheduled = 0;
  std::size_t dropped_momentary = 0;
  std::size_t dropped_voltage = 0;
};

struct DayConvention {
  // Fixed offset of the data's local time from UTC; calendar days and years
  // are taken in local time.
  std::chrono::minutes utc_offset{0};
};

struct DedupOutcome {
  std::vector<OutageRecord> kept;  // sorted by (line_id, start)
  std::size_t merged = 0;
  std::vector<std::string> warnings;
};

struct PooledStatistics {
  double mean = 0.0;
  double sd = 0.0;
  double mean_variance_to_mean = 0.0;
  Index lines_in_ratio = 0;
};

// ISO-8601 "YYYY-MM-DD[T ]HH:MM[:SS][Z|+HH:MM|-HH:MM|+HHMM]"; nullopt when malformed.
std::optional<TimePoint> parse_timestamp(const std::string& text);
std::string format_timestamp(TimePoint t);

std::chrono::sys_days local_day(TimePoint t, const DayConvention& convention);
int local_year(TimePoint t, const DayConvention& convention);

/// Parses the documented outage CSV schema: line_id, from_bus, to_bus, start,
/// end, type, cause, voltage_kv, length_miles, districts (';'-separated).
/// Missing columns raise SchemaError; bad rows are collected into ParseError.
std::vector<OutageRecord> parse_records(std::istream& in);
std::vector<OutageRecord> parse_records_file(const std::string& path);

FilterOutcome filter_records(const std::vector<OutageRecord>& records, const FilterPolicy& policy = {});

// At most one record per (line, local calendar day); the earliest start wins.
DedupOutcome dedup_daily(const std::vector<OutageRecord>& records, const DayConvention& convention = {});

// Union of the lines in `records` and the optional inventory; conflicting
// attributes for one line id are an error.
LineTable build_line_table(const std::vector<OutageRecord>& records, const LineTable* inventory = nullptr);

CountMatrix annual_counts(const std::vector<OutageRecord>& records, const LineTable& lines, YearRange years,
                          const DayConvention& convention = {});

// Smallest year range covering every record.
YearRange covering_years(const std::vector<OutageRecord>& records, const DayConvention& convention = {});

PooledStatistics pooled_statistics(const CountMatrix& counts);

// Inventory / line-table CSV: line_id, from_bus, to_bus, voltage_kv, length_miles, districts.
LineTable read_line_table(std::istream& in);
LineTable read_line_table_file(const std::string& path);
void write_line_table(std::ostream& out, const LineTable& lines);

// Count CSV: line_id, then one column per year. Exposure is the number of years.
void write_count_matrix(std::ostream& out, const CountMatrix& counts);
CountMatrix read_count_matrix(std::istream& in);
CountMatrix read_count_matrix_file(const std::string& path);

std::string to_string(OutageType type);

}  // namespace outrate
