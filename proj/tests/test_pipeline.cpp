#include "outrate/pipeline.hpp"

#include "helpers.hpp"

#include "doctest.h"

using namespace outrate;

TEST_CASE("count rows follow the line table") {
  const LineTable lines({{"A", "B1", "B2", 230, 5, {"N"}}, {"B", "B2", "B3", 230, 5, {"N"}},
                         {"C", "B3", "B4", 230, 5, {"N"}}});
  CountMatrix c;
  c.line_ids = {"C", "A"};
  c.first_year = 2000;
  c.counts.resize(2, 2);
  c.counts << 1, 2, 3, 4;
  c.exposure = VectorXd::Constant(2, 2.0);
  const CountMatrix a = align_counts(c, lines);
  CHECK(a.line_ids == std::vector<std::string>{"A", "B", "C"});
  CHECK(a.counts.row(0) == Eigen::RowVector2i(3, 4));
  CHECK(a.counts.row(1) == Eigen::RowVector2i(0, 0));
  CHECK(a.counts.row(2) == Eigen::RowVector2i(1, 2));
  CHECK(a.exposure(1) == 2.0);
}

TEST_CASE("prepared model fits lines with outages only") {
  const testing::Fixture f = testing::make_fixture(40, 2, 17);
  const PreparedModel p = prepare_model(f.lines, f.data.counts, f.distances);
  Index nonzero = 0;
  for (Index i = 0; i < f.data.counts.n_lines(); ++i) nonzero += f.data.counts.counts.row(i).sum() > 0;
  CHECK(p.fit.n_fitted == nonzero);
  CHECK(static_cast<Index>(p.response.excluded.size()) == 40 - nonzero);
  CHECK(p.spec.n() == 40);
  CHECK(p.spec.init.m == doctest::Approx(p.fit.m));
}

TEST_CASE("trajectory over cutoffs") {
  testing::Fixture f = testing::make_fixture(30, 14, 19);
  // Line 0: quiet for eight years, then 3 and 2 outages. Line 1: never fails.
  Eigen::RowVectorXi late(14);
  late << 0, 0, 0, 0, 0, 0, 0, 0, 3, 2, 0, 0, 0, 0;
  f.data.counts.counts.row(0) = late;
  f.data.counts.counts.row(1).setZero();
  ChainConfig cc;
  cc.seed = 5;
  const Trajectory t = trajectory(f.lines, f.data.counts, f.distances, {1, 7, 14}, cc);
  REQUIRE(t.mean.cols() == 3);
  CHECK(t.mean(0, 1) < t.mean(0, 0));  // more quiet years
  CHECK(t.mean(0, 2) > t.mean(0, 1));  // outages arrive
  CHECK((t.mean.row(1).array() > 0.0).all());
  CHECK(t.mean(1, 2) < t.mean(1, 0));
  CHECK((t.sd.array() > 0.0).all());
}
