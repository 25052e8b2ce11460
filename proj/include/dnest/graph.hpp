// Copyright 2026 The dnest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Interference graphs.
//
// An arc u -> v means that the treatment of u can move the outcome of v. The
// interference neighborhood of node i is therefore its *in*-neighbor set;
// `degree(i)` and `max_degree()` refer to it. Undirected graphs store every
// edge in both directions and the in/out views coincide.
//
// Adjacency is held in compressed sparse row form. Graphs are immutable once
// built and are safe to share across threads.

#ifndef DNEST_GRAPH_HPP_
#define DNEST_GRAPH_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dnest {

using NodeId = std::uint32_t;
using Arc = std::pair<NodeId, NodeId>;

class Partition;

class InterferenceGraph {
 public:
  InterferenceGraph() = default;

  // Arcs may contain duplicates in any order; self-loops are rejected. For an
  // undirected graph each pair only needs to be listed once, in either
  // orientation.
  static InterferenceGraph from_arcs(std::size_t num_nodes, std::vector<Arc> arcs,
                                     bool directed);

  std::size_t num_nodes() const { return num_nodes_; }
  bool directed() const { return directed_; }

  // Out-neighbors: nodes whose outcomes i's treatment can affect.
  std::span<const NodeId> neighbors(NodeId i) const;
  // In-neighbors: the interference neighborhood of i.
  std::span<const NodeId> in_neighbors(NodeId i) const;

  std::size_t degree(NodeId i) const { return in_neighbors(i).size(); }
  std::size_t out_degree(NodeId i) const { return neighbors(i).size(); }
  std::size_t max_degree() const { return max_degree_; }

  // Number of undirected edges, or arcs when directed.
  std::size_t num_edges() const;

  // Position of i's first in-neighbor in the flat in-adjacency array. Per-arc
  // data (edge weights) is stored aligned with this layout.
  std::size_t in_offset(NodeId i) const { return in_offsets()[i]; }
  std::size_t num_arcs() const { return out_targets_.size(); }

  // Sorted edge list: (u, v) with u < v when undirected, all arcs otherwise.
  std::vector<Arc> edges() const;

  // Throws std::logic_error when a structural invariant does not hold.
  void audit() const;

  friend bool operator==(const InterferenceGraph& a, const InterferenceGraph& b);

 private:
  const std::vector<std::size_t>& in_offsets() const {
    return directed_ ? in_offsets_ : out_offsets_;
  }
  void check_node(NodeId i) const {
    if (i >= num_nodes_) throw std::out_of_range("node id out of range: " + std::to_string(i));
  }

  std::size_t num_nodes_ = 0;
  bool directed_ = false;
  std::vector<std::size_t> out_offsets_{0};
  std::vector<NodeId> out_targets_;
  // Populated only for directed graphs.
  std::vector<std::size_t> in_offsets_;
  std::vector<NodeId> in_sources_;
  std::size_t max_degree_ = 0;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct EdgeListOptions {
  bool directed = false;
  // Keep node ids as written when the file carries a "# nodes: N" header and
  // every id is below N. Otherwise ids are remapped densely in increasing order.
  bool honor_node_header = true;
};

struct EdgeListStats {
  std::size_t lines = 0;
  std::size_t pairs = 0;
  std::size_t self_loops_dropped = 0;
  std::size_t duplicates_collapsed = 0;
};

struct LoadedGraph {
  InterferenceGraph graph;
  // original_ids[dense id] = id as written in the source.
  std::vector<std::uint64_t> original_ids;
  EdgeListStats stats;
};

LoadedGraph from_edge_list(std::string_view text, const EdgeListOptions& options = {});
LoadedGraph load_edge_list(const std::string& path, const EdgeListOptions& options = {});

// Writes a "# nodes: N" header followed by edges(), one "u v" pair per line.
std::string to_edge_list(const InterferenceGraph& graph);

// Each unordered pair is an edge independently with probability
// expected_degree / (n - 1).
InterferenceGraph erdos_renyi(std::size_t n, double expected_degree, std::uint64_t seed);

// Ring where every node links to its d/2 nearest neighbors on each side; each
// node's rightward edges are rewired to a uniform endpoint with probability q.
InterferenceGraph watts_strogatz(std::size_t n, std::size_t d, double q, std::uint64_t seed);

inline InterferenceGraph ring_lattice(std::size_t n, std::size_t d) {
  return watts_strogatz(n, d, 0.0, 0);
}

// Cluster-level graph: A -> B (A != B) iff some arc leaves a node of A for a
// node of B.
InterferenceGraph contract(const InterferenceGraph& graph, const Partition& partition);

}  // namespace dnest

#endif  // DNEST_GRAPH_HPP_
