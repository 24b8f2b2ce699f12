#pragma once

#include "outrate/ingest.hpp"
#include "outrate/types.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace outrate {

// Buses as vertices, one undirected edge per line weighted by its length.
// Parallel lines stay distinct edges.
class GridGraph {
 public:
  struct Edge {
    Index from = 0;
    Index to = 0;
    double length = 0.0;
  };

  explicit GridGraph(const LineTable& lines);

  Index n_buses() const { return static_cast<Index>(buses_.size()); }
  Index n_lines() const { return static_cast<Index>(edges_.size()); }
  const std::vector<std::string>& buses() const { return buses_; }
  const std::vector<std::string>& line_ids() const { return line_ids_; }
  const Edge& edge(Index line) const { return edges_[static_cast<std::size_t>(line)]; }
  Index line_index(const std::string& line_id) const;

  // Shortest bus-to-bus path lengths from `source` (Dijkstra); +inf when unreachable.
  VectorXd bus_distances(Index source) const;

 private:
  std::vector<std::string> buses_;
  std::vector<std::string> line_ids_;
  std::vector<Edge> edges_;
  std::map<std::string, Index> line_index_;
  std::vector<std::vector<std::pair<Index, double>>> adjacency_;
};

GridGraph build_graph(const LineTable& lines);

/// Length of the shortest network path joining the midpoints of two lines.
/// Zero for i == j, +inf when the lines lie in different components.
double midpoint_distance(const GridGraph& graph, const std::string& line_i, const std::string& line_j);

// Symmetric all-pairs midpoint distances, zero diagonal, +inf across islands.
// Runs one shortest-path search per distinct line endpoint.
MatrixXd distance_matrix(const GridGraph& graph);

Index disconnected_pairs(const MatrixXd& distances);

void write_edge_list(std::ostream& out, const GridGraph& graph);
void write_distance_csv(std::ostream& out, const MatrixXd& distances, const std::vector<std::string>& line_ids);

}  // namespace outrate
