#include "outrate/ingest.hpp"

#include "outrate/csv.hpp"
#include "outrate/error.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace outrate {

namespace {

using namespace std::chrono;

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

bool parse_positive(const std::string& text, double& out) {
  const std::string s = csv::trim(text);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size() && std::isfinite(out) && out > 0.0;
}

std::vector<std::string> split_districts(const std::string& text) {
  std::set<std::string> unique;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    const auto end = text.find(';', begin);
    const std::string item = csv::trim(text.substr(begin, end == std::string::npos ? std::string::npos : end - begin));
    if (!item.empty()) unique.insert(item);
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  return {unique.begin(), unique.end()};
}

std::string join_districts(const std::vector<std::string>& districts) {
  std::string out;
  for (std::size_t i = 0; i < districts.size(); ++i) {
    if (i) out += ';';
    out += districts[i];
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

LineInfo line_of(const OutageRecord& r) {
  return {r.line_id, r.from_bus, r.to_bus, r.voltage_kv, r.length_miles, r.districts};
}

int required_column(const csv::Table& table, const char* name) {
  const int c = table.column(name);
  if (c < 0) throw SchemaError(std::string("missing mandatory column '") + name + "'");
  return c;
}

}  // namespace

std::string to_string(OutageType type) { return type == OutageType::forced ? "forced" : "scheduled"; }

LineTable::LineTable(std::vector<LineInfo> lines) : lines_(std::move(lines)) {
  std::sort(lines_.begin(), lines_.end(), [](const LineInfo& a, const LineInfo& b) { return a.line_id < b.line_id; });
  for (std::size_t i = 0; i < lines_.size(); ++i) {
    if (!index_.emplace(lines_[i].line_id, static_cast<Index>(i)).second) {
      throw ValidationError("duplicate line id '" + lines_[i].line_id + "'");
    }
  }
}

std::optional<Index> LineTable::find(const std::string& line_id) const {
  const auto it = index_.find(line_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Index LineTable::index_of(const std::string& line_id) const {
  const auto found = find(line_id);
  if (!found) throw ValidationError("unknown line id '" + line_id + "'");
  return *found;
}

VectorXd LineTable::lengths() const {
  VectorXd out(size());
  for (Index i = 0; i < size(); ++i) out(i) = (*this)[i].length_miles;
  return out;
}

VectorXd LineTable::voltages() const {
  VectorXd out(size());
  for (Index i = 0; i < size(); ++i) out(i) = (*this)[i].voltage_kv;
  return out;
}

VectorXd CountMatrix::totals() const { return counts.cast<double>().rowwise().sum(); }

CountMatrix CountMatrix::truncated(Index years) const {
  if (years < 1 || years > n_years()) {
    throw ValidationError("year cutoff " + std::to_string(years) + " outside 1.." + std::to_string(n_years()));
  }
  CountMatrix out;
  out.line_ids = line_ids;
  out.first_year = first_year;
  out.counts = counts.leftCols(years);
  out.exposure = VectorXd::Constant(n_lines(), static_cast<double>(years));
  return out;
}

std::optional<TimePoint> parse_timestamp(const std::string& raw) {
  const std::string s = csv::trim(raw);
  // YYYY-MM-DD?HH:MM
  if (s.size() < 16 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') {
    return std::nullopt;
  }
  int y, mo, d, h, mi, sec = 0;
  const std::string_view v(s);
  if (!parse_int(v.substr(0, 4), y) || !parse_int(v.substr(5, 2), mo) || !parse_int(v.substr(8, 2), d) ||
      !parse_int(v.substr(11, 2), h) || !parse_int(v.substr(14, 2), mi)) {
    return std::nullopt;
  }
  std::size_t pos = 16;
  if (pos < s.size() && s[pos] == ':') {
    if (pos + 3 > s.size() || !parse_int(v.substr(pos + 1, 2), sec)) return std::nullopt;
    pos += 3;
    if (pos < s.size() && s[pos] == '.') {  // fractional seconds are truncated
      ++pos;
      while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    }
  }
  int offset_minutes = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      const int sign = s[pos] == '-' ? -1 : 1;
      std::string_view rest = v.substr(pos + 1);
      int oh, om;
      if (rest.size() == 5 && rest[2] == ':' && parse_int(rest.substr(0, 2), oh) && parse_int(rest.substr(3, 2), om)) {
      } else if (rest.size() == 4 && parse_int(rest.substr(0, 2), oh) && parse_int(rest.substr(2, 2), om)) {
      } else {
        return std::nullopt;
      }
      offset_minutes = sign * (oh * 60 + om);
      pos = s.size();
    }
  }
  if (pos != s.size()) return std::nullopt;
  if (h > 23 || mi > 59 || sec > 60) return std::nullopt;
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return std::nullopt;
  return TimePoint{sys_days{ymd}} + hours{h} + minutes{mi} + seconds{sec} - minutes{offset_minutes};
}

std::string format_timestamp(TimePoint t) {
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

sys_days local_day(TimePoint t, const DayConvention& convention) { return floor<days>(t + convention.utc_offset); }

int local_year(TimePoint t, const DayConvention& convention) {
  return static_cast<int>(year_month_day{local_day(t, convention)}.year());
}

std::vector<OutageRecord> parse_records(std::istream& in) {
  const csv::Table table = csv::read(in);
  if (table.header.empty()) throw SchemaError("empty input: no header row");
  const int c_line = required_column(table, "line_id");
  const int c_from = required_column(table, "from_bus");
  const int c_to = required_column(table, "to_bus");
  const int c_start = required_column(table, "start");
  const int c_end = required_column(table, "end");
  const int c_type = required_column(table, "type");
  const int c_cause = required_column(table, "cause");
  const int c_volt = required_column(table, "voltage_kv");
  const int c_len = required_column(table, "length_miles");
  const int c_dist = required_column(table, "districts");

  std::vector<OutageRecord> records;
  std::vector<RowIssue> issues;
  records.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t row_no = r + 1;
    if (row.size() != table.header.size()) {
      issues.push_back({row_no, "", "expected " + std::to_string(table.header.size()) + " fields, found " +
                                        std::to_string(row.size())});
      continue;
    }
    const std::size_t before = issues.size();
    auto field = [&](int c) { return csv::trim(row[static_cast<std::size_t>(c)]); };
    OutageRecord rec;
    rec.source_row = row_no;
    rec.line_id = field(c_line);
    rec.from_bus = field(c_from);
    rec.to_bus = field(c_to);
    rec.cause = field(c_cause);
    if (rec.line_id.empty()) issues.push_back({row_no, "line_id", "empty line id"});
    if (rec.from_bus.empty() || rec.to_bus.empty()) issues.push_back({row_no, "from_bus", "empty bus name"});
    const auto start = parse_timestamp(field(c_start));
    const auto end = parse_timestamp(field(c_end));
    if (!start) issues.push_back({row_no, "start", "unparseable timestamp '" + field(c_start) + "'"});
    if (!end) issues.push_back({row_no, "end", "unparseable timestamp '" + field(c_end) + "'"});
    if (start && end) {
      rec.start = *start;
      rec.end = *end;
      if (rec.end < rec.start) issues.push_back({row_no, "end", "end precedes start"});
    }
    const std::string type = lower(field(c_type));
    if (type == "forced" || type == "f") {
      rec.type = OutageType::forced;
    } else if (type == "scheduled" || type == "planned" || type == "s") {
      rec.type = OutageType::scheduled;
    } else {
      issues.push_back({row_no, "type", "unknown outage type '" + field(c_type) + "'"});
    }
    if (!parse_positive(row[static_cast<std::size_t>(c_volt)], rec.voltage_kv)) {
      issues.push_back({row_no, "voltage_kv", "voltage must be a positive number"});
    }
    if (!parse_positive(row[static_cast<std::size_t>(c_len)], rec.length_miles)) {
      issues.push_back({row_no, "length_miles", "length must be a positive number"});
    }
    rec.districts = split_districts(row[static_cast<std::size_t>(c_dist)]);
    if (rec.districts.empty()) issues.push_back({row_no, "districts", "at least one district required"});
    if (issues.size() == before) records.push_back(std::move(rec));
  }
  if (!issues.empty()) throw ParseError(std::move(issues));
  return records;
}

std::vector<OutageRecord> parse_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return parse_records(in);
}

FilterOutcome filter_records(const std::vector<OutageRecord>& records, const FilterPolicy& policy) {
  FilterOutcome out;
  for (const auto& r : records) {
    if (policy.drop_scheduled && r.type == OutageType::scheduled) {
      ++out.dropped_scheduled;
    } else if (r.duration() <= policy.momentary_max) {
      ++out.dropped_momentary;
    } else if (std::find(policy.excluded_voltages_kv.begin(), policy.excluded_voltages_kv.end(), r.voltage_kv) !=
               policy.excluded_voltages_kv.end()) {
      ++out.dropped_voltage;
    } else {
      out.kept.push_back(r);
    }
  }
  return out;
}

DedupOutcome dedup_daily(const std::vector<OutageRecord>& records, const DayConvention& convention) {
  std::vector<OutageRecord> sorted = records;
  std::stable_sort(sorted.begin(), sorted.end(), [](const OutageRecord& a, const OutageRecord& b) {
    if (a.line_id != b.line_id) return a.line_id < b.line_id;
    if (a.start != b.start) return a.start < b.start;
    return a.source_row < b.source_row;
  });
  DedupOutcome out;
  for (auto& r : sorted) {
    if (!out.kept.empty()) {
      const OutageRecord& prev = out.kept.back();
      if (prev.line_id == r.line_id && local_day(prev.start, convention) == local_day(r.start, convention)) {
        ++out.merged;
        if (!(line_of(prev) == line_of(r))) {
          out.warnings.push_back("line " + r.line_id + ": same-day record at row " + std::to_string(r.source_row) +
                                 " disagrees on attributes; keeping row " + std::to_string(prev.source_row));
        }
        continue;
      }
    }
    out.kept.push_back(std::move(r));
  }
  return out;
}

LineTable build_line_table(const std::vector<OutageRecord>& records, const LineTable* inventory) {
  std::map<std::string, LineInfo> lines;
  if (inventory) {
    for (const auto& l : inventory->lines()) lines.emplace(l.line_id, l);
  }
  for (const auto& r : records) {
    LineInfo info = line_of(r);
    auto [it, inserted] = lines.emplace(r.line_id, info);
    if (!inserted && !(it->second == info)) {
      throw ValidationError("line " + r.line_id + ": attributes at row " + std::to_string(r.source_row) +
                            " conflict with earlier records");
    }
  }
  std::vector<LineInfo> out;
  out.reserve(lines.size());
  for (auto& [id, info] : lines) out.push_back(std::move(info));
  return LineTable(std::move(out));
}

YearRange covering_years(const std::vector<OutageRecord>& records, const DayConvention& convention) {
  if (records.empty()) throw ValidationError("no records to derive a year range from");
  YearRange range{local_year(records.front().start, convention), local_year(records.front().start, convention)};
  for (const auto& r : records) {
    const int y = local_year(r.start, convention);
    range.first = std::min(range.first, y);
    range.last = std::max(range.last, y);
  }
  return range;
}

CountMatrix annual_counts(const std::vector<OutageRecord>& records, const LineTable& lines, YearRange years,
                          const DayConvention& convention) {
  if (years.last < years.first) throw ValidationError("empty year range");
  const Index n_years = years.last - years.first + 1;
  CountMatrix out;
  out.first_year = years.first;
  out.counts = Eigen::MatrixXi::Zero(lines.size(), n_years);
  out.exposure = VectorXd::Constant(lines.size(), static_cast<double>(n_years));
  out.line_ids.reserve(static_cast<std::size_t>(lines.size()));
  for (const auto& l : lines.lines()) out.line_ids.push_back(l.line_id);
  for (const auto& r : records) {
    const int y = local_year(r.start, convention);
    if (y < years.first || y > years.last) {
      throw ValidationError("record at row " + std::to_string(r.source_row) + " falls in " + std::to_string(y) +
                            ", outside " + std::to_string(years.first) + "-" + std::to_string(years.last));
    }
    out.counts(lines.index_of(r.line_id), y - years.first) += 1;
  }
  return out;
}

PooledStatistics pooled_statistics(const CountMatrix& counts) {
  if (counts.counts.size() == 0) throw ValidationError("pooled statistics of an empty count matrix");
  const Eigen::ArrayXXd c = counts.counts.cast<double>().array();
  PooledStatistics s;
  s.mean = c.mean();
  const double n = static_cast<double>(c.size());
  s.sd = c.size() > 1 ? std::sqrt((c - s.mean).square().sum() / (n - 1.0)) : 0.0;
  double ratio_sum = 0.0;
  for (Index i = 0; i < c.rows(); ++i) {
    const Eigen::ArrayXd row = c.row(i).transpose();
    const double m = row.mean();
    if (m <= 0.0 || row.size() < 2) continue;
    const double var = (row - m).square().sum() / static_cast<double>(row.size() - 1);
    ratio_sum += var / m;
    ++s.lines_in_ratio;
  }
  s.mean_variance_to_mean = s.lines_in_ratio ? ratio_sum / static_cast<double>(s.lines_in_ratio) : 0.0;
  return s;
}

LineTable read_line_table(std::istream& in) {
  const csv::Table table = csv::read(in);
  if (table.header.empty()) throw SchemaError("empty line table");
  const int c_line = required_column(table, "line_id");
  const int c_from = required_column(table, "from_bus");
  const int c_to = required_column(table, "to_bus");
  const int c_volt = required_column(table, "voltage_kv");
  const int c_len = required_column(table, "length_miles");
  const int c_dist = required_column(table, "districts");
  std::vector<LineInfo> lines;
  std::vector<RowIssue> issues;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      issues.push_back({r + 1, "", "wrong field count"});
      continue;
    }
    LineInfo l;
    l.line_id = csv::trim(row[static_cast<std::size_t>(c_line)]);
    l.from_bus = csv::trim(row[static_cast<std::size_t>(c_from)]);
    l.to_bus = csv::trim(row[static_cast<std::size_t>(c_to)]);
    l.districts = split_districts(row[static_cast<std::size_t>(c_dist)]);
    bool ok = !l.line_id.empty() && !l.from_bus.empty() && !l.to_bus.empty() && !l.districts.empty();
    ok = parse_positive(row[static_cast<std::size_t>(c_volt)], l.voltage_kv) && ok;
    ok = parse_positive(row[static_cast<std::size_t>(c_len)], l.length_miles) && ok;
    if (!ok) {
      issues.push_back({r + 1, "", "invalid line attributes"});
      continue;
    }
    lines.push_back(std::move(l));
  }
  if (!issues.empty()) throw ParseError(std::move(issues));
  return LineTable(std::move(lines));
}

LineTable read_line_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_line_table(in);
}

void write_line_table(std::ostream& out, const LineTable& lines) {
  csv::write_row(out, {"line_id", "from_bus", "to_bus", "voltage_kv", "length_miles", "districts"});
  for (const auto& l : lines.lines()) {
    csv::write_row(out, {l.line_id, l.from_bus, l.to_bus, csv::format_double(l.voltage_kv),
                         csv::format_double(l.length_miles), join_districts(l.districts)});
  }
}

void write_count_matrix(std::ostream& out, const CountMatrix& counts) {
  csv::Row header{"line_id"};
  for (Index y = 0; y < counts.n_years(); ++y) header.push_back(std::to_string(counts.first_year + y));
  csv::write_row(out, header);
  for (Index i = 0; i < counts.n_lines(); ++i) {
    csv::Row row{counts.line_ids[static_cast<std::size_t>(i)]};
    for (Index y = 0; y < counts.n_years(); ++y) row.push_back(std::to_string(counts.counts(i, y)));
    csv::write_row(out, row);
  }
}

CountMatrix read_count_matrix(std::istream& in) {
  const csv::Table table = csv::read(in);
  if (table.header.size() < 2 || table.header[0] != "line_id") {
    throw SchemaError("count matrix needs a 'line_id' column followed by year columns");
  }
  CountMatrix out;
  const Index n_years = static_cast<Index>(table.header.size()) - 1;
  if (!parse_int(table.header[1], out.first_year)) throw SchemaError("year column header must be an integer");
  for (Index y = 1; y < n_years; ++y) {
    int year = 0;
    if (!parse_int(table.header[static_cast<std::size_t>(y + 1)], year) || year != out.first_year + y) {
      throw SchemaError("year columns must be consecutive integers");
    }
  }
  out.counts.resize(static_cast<Index>(table.rows.size()), n_years);
  std::vector<RowIssue> issues;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      issues.push_back({r + 1, "", "wrong field count"});
      continue;
    }
    out.line_ids.push_back(csv::trim(row[0]));
    for (Index y = 0; y < n_years; ++y) {
      int v = 0;
      const std::string cell = csv::trim(row[static_cast<std::size_t>(y + 1)]);
      if (!parse_int(cell, v) || v < 0) {
        issues.push_back({r + 1, table.header[static_cast<std::size_t>(y + 1)], "count must be a nonnegative integer"});
        v = 0;
      }
      out.counts(static_cast<Index>(r), y) = v;
    }
  }
  if (!issues.empty()) throw ParseError(std::move(issues));
  out.exposure = VectorXd::Constant(out.counts.rows(), static_cast<double>(n_years));
  return out;
}

CountMatrix read_count_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return read_count_matrix(in);
}

}  // namespace outrate
