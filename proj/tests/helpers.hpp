#pragma once

#include "outrate/features.hpp"
#include "outrate/ingest.hpp"
#include "outrate/network.hpp"
#include "outrate/pipeline.hpp"
#include "outrate/synthetic.hpp"

#include <string>
#include <vector>

namespace testing {

using namespace outrate;

inline std::vector<std::string> ids_of(const LineTable& lines) {
  std::vector<std::string> ids;
  for (const LineInfo& l : lines.lines()) ids.push_back(l.line_id);
  return ids;
}

// Small synthetic network with counts and a prepared model.
struct Fixture {
  LineTable lines;
  MatrixXd distances;
  Covariates covariates;
  KernelSet<double> kernels;
  SyntheticDataset data;
  std::vector<std::string> ids;
};

inline Fixture make_fixture(Index n_lines, int years, std::uint64_t seed = 3) {
  InventoryConfig ic;
  ic.n_lines = n_lines;
  ic.n_buses = std::max<Index>(3, n_lines * 357 / 500);
  ic.seed = seed;
  Fixture f;
  f.lines = synthetic_inventory(ic);
  f.distances = distance_matrix(build_graph(f.lines));
  f.covariates = make_covariates(f.lines);
  f.kernels = build_kernels(f.lines, f.distances, {});
  f.ids = ids_of(f.lines);
  GenerativeConfig g;
  g.n_years = years;
  g.seed = seed;
  f.data = generate(g, f.ids, f.covariates, f.kernels);
  return f;
}

}  // namespace testing
