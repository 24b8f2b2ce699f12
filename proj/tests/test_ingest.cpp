#include "outrate/csv.hpp"
#include "outrate/error.hpp"
#include "outrate/ingest.hpp"

#include "doctest.h"

#include <sstream>

using namespace outrate;

namespace {

const char* kHeader = "line_id,from_bus,to_bus,start,end,type,cause,voltage_kv,length_miles,districts\n";

std::vector<OutageRecord> parse(const std::string& body) {
  std::istringstream in(std::string(kHeader) + body);
  return parse_records(in);
}

std::string row(const std::string& line, const std::string& start, const std::string& end,
                const std::string& type = "forced", const std::string& kv = "230") {
  return line + ",A,B," + start + "," + end + "," + type + ",lightning," + kv + ",10,D1\n";
}

}  // namespace

TEST_CASE("csv split honours quotes") {
  const csv::Row r = csv::split_line(R"(a,"b,c","d ""e""",)");
  REQUIRE(r.size() == 4);
  CHECK(r[1] == "b,c");
  CHECK(r[2] == "d \"e\"");
  CHECK(r[3].empty());
  CHECK(csv::quote("x,y") == "\"x,y\"");
}

TEST_CASE("csv doubles round trip") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}) {
    CHECK(std::stod(csv::format_double(v)) == v);
  }
}

TEST_CASE("timestamps") {
  const auto a = parse_timestamp("2004-07-12T08:30:00Z");
  const auto b = parse_timestamp("2004-07-12 01:30-07:00");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(*a == *b);
  CHECK(format_timestamp(*a) == "2004-07-12T08:30:00Z");
  CHECK_FALSE(parse_timestamp("2004-02-30T00:00"));
  CHECK_FALSE(parse_timestamp("yesterday"));
  CHECK(parse_timestamp("2004-07-12T08:30:00+0130"));
}

TEST_CASE("parse well-formed rows") {
  const auto recs = parse(row("X", "2004-07-12T08:00", "2004-07-12T09:00") +
                          row("Y", "2004-07-13T08:00", "2004-07-13T09:00", "scheduled") +
                          row("Z", "2005-01-01T00:00", "2005-01-01T02:00"));
  REQUIRE(recs.size() == 3);
  CHECK(recs[1].type == OutageType::scheduled);
  CHECK(recs[2].duration() == std::chrono::hours(2));
  CHECK(recs[0].districts == std::vector<std::string>{"D1"});
}

TEST_CASE("header only gives no records") { CHECK(parse("").empty()); }

TEST_CASE("empty input is a schema error") {
  std::istringstream in("");
  CHECK_THROWS_AS(parse_records(in), SchemaError);
}

TEST_CASE("missing column is a schema error") {
  std::istringstream in("line_id,from_bus,to_bus,start,end,type,cause,voltage_kv,length_miles\n");
  CHECK_THROWS_AS(parse_records(in), SchemaError);
}

TEST_CASE("end before start is reported with its row") {
  try {
    parse(row("X", "2004-07-12T08:00", "2004-07-12T09:00") + row("X", "2004-07-12T10:00", "2004-07-12T09:00") +
          row("X", "2004-07-12T10:00", "2004-07-12T11:00", "forced", "-5"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    REQUIRE(e.issues().size() == 2);
    CHECK(e.issues()[0].row == 2);
    CHECK(e.issues()[0].column == "end");
    CHECK(e.issues()[1].row == 3);
    CHECK(e.issues()[1].column == "voltage_kv");
  }
}

TEST_CASE("filter predicates") {
  const auto recs = parse(row("X", "2004-07-12T08:00:00", "2004-07-12T08:00:45") +
                          row("X", "2004-07-13T08:00", "2004-07-13T10:00", "scheduled") +
                          row("X", "2004-07-14T08:00", "2004-07-14T10:00") +
                          row("X", "2004-07-15T08:00", "2004-07-15T10:00", "forced", "1000"));
  const FilterOutcome f = filter_records(recs);
  CHECK(f.dropped_momentary == 1);
  CHECK(f.dropped_scheduled == 1);
  CHECK(f.dropped_voltage == 1);
  REQUIRE(f.kept.size() == 1);
  CHECK(f.kept[0].voltage_kv == 230);
}

TEST_CASE("daily dedup") {
  SUBCASE("three outages on one day count once") {
    const auto d = dedup_daily(parse(row("X", "2004-07-12T08:00", "2004-07-12T09:00") +
                                     row("X", "2004-07-12T12:00", "2004-07-12T13:00") +
                                     row("X", "2004-07-12T03:00", "2004-07-12T04:00")));
    REQUIRE(d.kept.size() == 1);
    CHECK(d.merged == 2);
    CHECK(format_timestamp(d.kept[0].start) == "2004-07-12T03:00:00Z");
  }
  SUBCASE("two days stay two") {
    CHECK(dedup_daily(parse(row("X", "2004-07-12T08:00", "2004-07-12T09:00") +
                            row("X", "2004-07-13T08:00", "2004-07-13T09:00")))
              .kept.size() == 2);
  }
  SUBCASE("midnight boundary") {
    CHECK(dedup_daily(parse(row("X", "2004-07-12T23:50", "2004-07-12T23:55") +
                            row("X", "2004-07-13T00:10", "2004-07-13T00:20")))
              .kept.size() == 2);
  }
  SUBCASE("local day convention shifts the boundary") {
    DayConvention local;
    local.utc_offset = std::chrono::hours(-8);
    // 23:50Z and 00:10Z are both on 07-12 at UTC-8.
    CHECK(dedup_daily(parse(row("X", "2004-07-12T23:50", "2004-07-12T23:55") +
                            row("X", "2004-07-13T00:10", "2004-07-13T00:20")),
                      local)
              .kept.size() == 1);
  }
  SUBCASE("different lines never merge") {
    CHECK(dedup_daily(parse(row("X", "2004-07-12T08:00", "2004-07-12T09:00") +
                            row("Y", "2004-07-12T08:00", "2004-07-12T09:00")))
              .kept.size() == 2);
  }
}

TEST_CASE("filtering before dedup differs from the reverse order") {
  // A momentary trip ahead of a sustained outage on the same day.
  const auto recs = parse(row("X", "2004-07-12T08:00:00", "2004-07-12T08:00:30") +
                          row("X", "2004-07-12T14:00", "2004-07-12T16:00"));
  const auto filter_first = dedup_daily(filter_records(recs).kept).kept;
  const auto dedup_first = filter_records(dedup_daily(recs).kept).kept;
  CHECK(filter_first.size() == 1);
  CHECK(dedup_first.empty());
}

TEST_CASE("annual counts") {
  std::string body;
  // 3 outages in the 9th year, 2 in the 10th, on distinct days.
  for (int d = 1; d <= 3; ++d) body += row("L29", "2008-03-0" + std::to_string(d) + "T10:00", "2008-03-0" + std::to_string(d) + "T11:00");
  for (int d = 1; d <= 2; ++d) body += row("L29", "2009-05-0" + std::to_string(d) + "T10:00", "2009-05-0" + std::to_string(d) + "T11:00");
  body += row("L01", "2003-01-01T10:00", "2003-01-01T11:00");
  body += row("L01", "2003-06-01T10:00", "2003-06-01T11:00");
  const auto recs = dedup_daily(filter_records(parse(body)).kept).kept;

  LineTable inventory({{"L99", "C", "D", 230, 5.0, {"D2"}}});
  const LineTable lines = build_line_table(recs, &inventory);
  REQUIRE(lines.size() == 3);
  const CountMatrix c = annual_counts(recs, lines, {2000, 2013});
  CHECK(c.n_years() == 14);
  Eigen::RowVectorXi expected(14);
  expected << 0, 0, 0, 0, 0, 0, 0, 0, 3, 2, 0, 0, 0, 0;
  CHECK(c.counts.row(lines.index_of("L29")) == expected);
  CHECK(c.counts.row(lines.index_of("L99")).sum() == 0);
  CHECK(c.counts(lines.index_of("L01"), 3) == 2);
  CHECK(c.totals()(lines.index_of("L29")) == 5);
  CHECK(c.exposure(0) == 14);

  const CountMatrix t = c.truncated(9);
  CHECK(t.n_years() == 9);
  CHECK(t.counts.row(lines.index_of("L29")).sum() == 3);
  CHECK_THROWS_AS(c.truncated(15), ValidationError);
  CHECK_THROWS_AS(annual_counts(recs, lines, {2004, 2013}), ValidationError);

  const YearRange yr = covering_years(recs);
  CHECK(yr.first == 2003);
  CHECK(yr.last == 2009);
}

TEST_CASE("conflicting line attributes are rejected") {
  std::string body = row("X", "2004-07-12T08:00", "2004-07-12T09:00");
  body += "X,A,B,2004-07-13T08:00,2004-07-13T09:00,forced,wind,500,10,D1\n";
  CHECK_THROWS_AS(build_line_table(parse(body)), ValidationError);
}

TEST_CASE("pooled statistics") {
  SUBCASE("single observation") {
    CountMatrix c;
    c.line_ids = {"X"};
    c.counts = Eigen::MatrixXi::Constant(1, 1, 1);
    c.exposure = VectorXd::Ones(1);
    const PooledStatistics s = pooled_statistics(c);
    CHECK(s.mean == 1.0);
    CHECK(s.sd == 0.0);
  }
  SUBCASE("hand computation") {
    CountMatrix c;
    c.line_ids = {"X", "Y"};
    c.counts.resize(2, 3);
    c.counts << 1, 2, 3, 0, 0, 0;
    c.exposure = VectorXd::Constant(2, 3.0);
    const PooledStatistics s = pooled_statistics(c);
    CHECK(s.mean == doctest::Approx(1.0));
    CHECK(s.sd == doctest::Approx(std::sqrt(8.0 / 5.0)));
    CHECK(s.lines_in_ratio == 1);
    CHECK(s.mean_variance_to_mean == doctest::Approx(0.5));
  }
}

TEST_CASE("line table and count matrix CSV round trip") {
  const LineTable lines({{"A1", "B1", "B2", 230, 7.5, {"D1", "D2"}}, {"A2", "B2", "B3", 500, 12.25, {"D2"}}});
  std::stringstream s;
  write_line_table(s, lines);
  const LineTable back = read_line_table(s);
  REQUIRE(back.size() == 2);
  CHECK(back.lines() == lines.lines());

  CountMatrix c;
  c.line_ids = {"A1", "A2"};
  c.first_year = 2001;
  c.counts.resize(2, 2);
  c.counts << 0, 4, 1, 2;
  c.exposure = VectorXd::Constant(2, 2.0);
  std::stringstream cs;
  write_count_matrix(cs, c);
  const CountMatrix cb = read_count_matrix(cs);
  CHECK(cb.line_ids == c.line_ids);
  CHECK(cb.first_year == 2001);
  CHECK(cb.counts == c.counts);
  CHECK(cb.exposure == c.exposure);
}
