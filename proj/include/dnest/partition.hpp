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

// Node-to-cluster partitions for cluster-level randomization.

#ifndef DNEST_PARTITION_HPP_
#define DNEST_PARTITION_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnest/graph.hpp"

namespace dnest {

using ClusterId = std::uint32_t;

class Partition {
 public:
  Partition() = default;

  // `assignment[i]` must already be dense: every id in [0, max] is used.
  static Partition from_assignment(std::vector<ClusterId> assignment);
  // Arbitrary labels, remapped densely in increasing label order.
  static Partition from_labels(std::span<const std::uint64_t> labels);

  std::size_t num_nodes() const { return assignment_.size(); }
  std::size_t num_clusters() const { return offsets_.size() - 1; }
  ClusterId cluster_of(NodeId i) const { return assignment_[i]; }
  const std::vector<ClusterId>& assignment() const { return assignment_; }

  // Members of cluster c in increasing node order.
  std::span<const NodeId> members(ClusterId c) const {
    return {members_.data() + offsets_[c], offsets_[c + 1] - offsets_[c]};
  }
  std::size_t cluster_size(ClusterId c) const { return offsets_[c + 1] - offsets_[c]; }

  friend bool operator==(const Partition& a, const Partition& b) {
    return a.assignment_ == b.assignment_;
  }

 private:
  std::vector<ClusterId> assignment_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> members_;
};

// Node i goes to cluster floor(i / m).
Partition contiguous_blocks(std::size_t n, std::size_t m);
Partition singleton(std::size_t n);
// Shuffled round-robin: cluster sizes differ by at most one.
Partition random_balanced(std::size_t n, std::size_t num_clusters, std::uint64_t seed);
// Asynchronous label propagation over the undirected view of the graph. Nodes
// are visited in a seeded random order each round; a node adopts the most
// frequent label among its neighbors, ties going to the smallest label.
Partition label_propagation(const InterferenceGraph& graph, std::uint64_t seed,
                            std::size_t max_rounds = 100);

// Parses "node_id cluster_id" lines ('#' comments). Node ids are dense graph
// ids unless `original_ids` is given, in which case they are translated
// through it (the mapping produced by from_edge_list). Every node must be
// listed exactly once.
Partition partition_from_text(std::string_view text, std::size_t num_nodes,
                              std::span<const std::uint64_t> original_ids = {});
Partition load_partition(const std::string& path, std::size_t num_nodes,
                         std::span<const std::uint64_t> original_ids = {});
std::string to_partition_text(const Partition& partition);

struct ClusterDegreeStats {
  std::vector<std::size_t> degree;                    // d_i
  std::vector<std::size_t> same_cluster_degree;       // d_i^C
  std::vector<std::size_t> cluster_neighbor_count;    // |N_i^C|, own cluster excluded
  double sum_out_of_cluster = 0.0;                    // sum_i (d_i - d_i^C)
  double sum_out_of_cluster_sq = 0.0;                 // sum_i (d_i - d_i^C)^2
  std::size_t max_cluster_neighbors = 0;              // d_C
};

ClusterDegreeStats cluster_degree_stats(const InterferenceGraph& graph, const Partition& partition);

// For each node, the sorted set of clusters other than its own that contain at
// least one in-neighbor. Shared by the cluster-level estimators.
class ClusterNeighborhoods {
 public:
  ClusterNeighborhoods(const InterferenceGraph& graph, const Partition& partition);

  std::size_t num_nodes() const { return offsets_.size() - 1; }
  std::size_t num_clusters() const { return num_clusters_; }
  ClusterId own(NodeId i) const { return own_[i]; }
  std::span<const ClusterId> of(NodeId i) const {
    return {clusters_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

 private:
  std::size_t num_clusters_ = 0;
  std::vector<ClusterId> own_;
  std::vector<std::size_t> offsets_;
  std::vector<ClusterId> clusters_;
};

}  // namespace dnest

#endif  // DNEST_PARTITION_HPP_
