#include "outrate/network.hpp"

#include "outrate/csv.hpp"
#include "outrate/error.hpp"

#include <algorithm>
#include <ostream>
#include <queue>
#include <set>

namespace outrate {

GridGraph::GridGraph(const LineTable& lines) {
  if (lines.empty()) throw ValidationError("cannot build a grid graph from an empty line table");
  std::set<std::string> names;
  for (const auto& l : lines.lines()) {
    names.insert(l.from_bus);
    names.insert(l.to_bus);
  }
  buses_.assign(names.begin(), names.end());
  std::map<std::string, Index> bus_index;
  for (std::size_t b = 0; b < buses_.size(); ++b) bus_index.emplace(buses_[b], static_cast<Index>(b));
  adjacency_.resize(buses_.size());
  for (const auto& l : lines.lines()) {
    if (l.from_bus == l.to_bus) throw ValidationError("line " + l.line_id + " has identical endpoint buses");
    if (!(l.length_miles > 0.0)) throw ValidationError("line " + l.line_id + " has nonpositive length");
    const Edge e{bus_index.at(l.from_bus), bus_index.at(l.to_bus), l.length_miles};
    line_index_.emplace(l.line_id, static_cast<Index>(edges_.size()));
    line_ids_.push_back(l.line_id);
    edges_.push_back(e);
    adjacency_[static_cast<std::size_t>(e.from)].emplace_back(e.to, e.length);
    adjacency_[static_cast<std::size_t>(e.to)].emplace_back(e.from, e.length);
  }
}

Index GridGraph::line_index(const std::string& line_id) const {
  const auto it = line_index_.find(line_id);
  if (it == line_index_.end()) throw ValidationError("unknown line id '" + line_id + "'");
  return it->second;
}

VectorXd GridGraph::bus_distances(Index source) const {
  VectorXd dist = VectorXd::Constant(n_buses(), kInf);
  using Item = std::pair<double, Index>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist(source) = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist(u)) continue;
    for (const auto& [v, w] : adjacency_[static_cast<std::size_t>(u)]) {
      const double nd = d + w;
      if (nd < dist(v)) {
        dist(v) = nd;
        heap.emplace(nd, v);
      }
    }
  }
  return dist;
}

GridGraph build_graph(const LineTable& lines) { return GridGraph(lines); }

namespace {

double combine_endpoints(const GridGraph::Edge& ei, const GridGraph::Edge& ej, const VectorXd& from_i_a,
                         const VectorXd& from_i_b) {
  const double best = std::min({from_i_a(ej.from), from_i_a(ej.to), from_i_b(ej.from), from_i_b(ej.to)});
  if (!std::isfinite(best)) return kInf;
  return 0.5 * ei.length + best + 0.5 * ej.length;
}

}  // namespace

double midpoint_distance(const GridGraph& graph, const std::string& line_i, const std::string& line_j) {
  const Index i = graph.line_index(line_i);
  const Index j = graph.line_index(line_j);
  if (i == j) return 0.0;
  const auto& ei = graph.edge(i);
  return combine_endpoints(ei, graph.edge(j), graph.bus_distances(ei.from), graph.bus_distances(ei.to));
}

MatrixXd distance_matrix(const GridGraph& graph) {
  const Index n = graph.n_lines();
  std::vector<VectorXd> from_bus(static_cast<std::size_t>(graph.n_buses()));
  std::vector<bool> done(static_cast<std::size_t>(graph.n_buses()), false);
  for (Index i = 0; i < n; ++i) {
    for (Index b : {graph.edge(i).from, graph.edge(i).to}) {
      if (!done[static_cast<std::size_t>(b)]) {
        from_bus[static_cast<std::size_t>(b)] = graph.bus_distances(b);
        done[static_cast<std::size_t>(b)] = true;
      }
    }
  }
  MatrixXd d = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto& ei = graph.edge(i);
    for (Index j = i + 1; j < n; ++j) {
      const double v = combine_endpoints(ei, graph.edge(j), from_bus[static_cast<std::size_t>(ei.from)],
                                         from_bus[static_cast<std::size_t>(ei.to)]);
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Index disconnected_pairs(const MatrixXd& distances) {
  Index count = 0;
  for (Index j = 0; j < distances.cols(); ++j) {
    for (Index i = j + 1; i < distances.rows(); ++i) count += std::isinf(distances(i, j)) ? 1 : 0;
  }
  return count;
}

void write_edge_list(std::ostream& out, const GridGraph& graph) {
  csv::write_row(out, {"line_id", "from_bus", "to_bus", "length_miles"});
  for (Index i = 0; i < graph.n_lines(); ++i) {
    const auto& e = graph.edge(i);
    csv::write_row(out, {graph.line_ids()[static_cast<std::size_t>(i)], graph.buses()[static_cast<std::size_t>(e.from)],
                         graph.buses()[static_cast<std::size_t>(e.to)], csv::format_double(e.length)});
  }
}

void write_distance_csv(std::ostream& out, const MatrixXd& distances, const std::vector<std::string>& line_ids) {
  csv::Row header{"line_id"};
  header.insert(header.end(), line_ids.begin(), line_ids.end());
  csv::write_row(out, header);
  for (Index i = 0; i < distances.rows(); ++i) {
    csv::Row row{line_ids[static_cast<std::size_t>(i)]};
    for (Index j = 0; j < distances.cols(); ++j) row.push_back(csv::format_double(distances(i, j)));
    csv::write_row(out, row);
  }
}

}  // namespace outrate
