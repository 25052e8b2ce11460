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

#include "dnest/partition.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "dnest/rng.hpp"

namespace dnest {

Partition Partition::from_assignment(std::vector<ClusterId> assignment) {
  Partition p;
  std::size_t k = 0;
  for (auto c : assignment) k = std::max<std::size_t>(k, std::size_t{c} + 1);
  p.offsets_.assign(k + 1, 0);
  for (auto c : assignment) ++p.offsets_[c + 1];
  for (std::size_t c = 0; c < k; ++c) {
    if (p.offsets_[c + 1] == 0) {
      throw std::invalid_argument("partition: cluster " + std::to_string(c) + " is empty");
    }
    p.offsets_[c + 1] += p.offsets_[c];
  }
  p.members_.resize(assignment.size());
  std::vector<std::size_t> cursor(p.offsets_.begin(), p.offsets_.end() - 1);
  for (NodeId i = 0; i < assignment.size(); ++i) p.members_[cursor[assignment[i]]++] = i;
  p.assignment_ = std::move(assignment);
  return p;
}

Partition Partition::from_labels(std::span<const std::uint64_t> labels) {
  std::vector<std::uint64_t> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<ClusterId> assignment(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    assignment[i] = static_cast<ClusterId>(
        std::lower_bound(distinct.begin(), distinct.end(), labels[i]) - distinct.begin());
  }
  return from_assignment(std::move(assignment));
}

Partition contiguous_blocks(std::size_t n, std::size_t m) {
  if (m == 0 || m > n) throw std::invalid_argument("contiguous_blocks: need 1 <= m <= n");
  std::vector<ClusterId> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = static_cast<ClusterId>(i / m);
  return Partition::from_assignment(std::move(a));
}

Partition singleton(std::size_t n) {
  std::vector<ClusterId> a(n);
  std::iota(a.begin(), a.end(), ClusterId{0});
  return Partition::from_assignment(std::move(a));
}

Partition random_balanced(std::size_t n, std::size_t num_clusters, std::uint64_t seed) {
  if (num_clusters == 0 || num_clusters > n) {
    throw std::invalid_argument("random_balanced: need 1 <= clusters <= n");
  }
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  auto engine = rng::make_engine(seed);
  rng::shuffle(order.begin(), order.end(), engine);
  std::vector<ClusterId> a(n);
  for (std::size_t k = 0; k < n; ++k) a[order[k]] = static_cast<ClusterId>(k % num_clusters);
  return Partition::from_assignment(std::move(a));
}

Partition label_propagation(const InterferenceGraph& graph, std::uint64_t seed,
                            std::size_t max_rounds) {
  const std::size_t n = graph.num_nodes();
  std::vector<std::uint64_t> label(n);
  std::iota(label.begin(), label.end(), std::uint64_t{0});
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), NodeId{0});
  auto engine = rng::make_engine(seed);
  std::vector<std::uint64_t> seen;

  for (std::size_t round = 0; round < max_rounds; ++round) {
    rng::shuffle(order.begin(), order.end(), engine);
    bool changed = false;
    for (NodeId i : order) {
      seen.clear();
      for (NodeId j : graph.in_neighbors(i)) seen.push_back(label[j]);
      if (graph.directed()) {
        for (NodeId j : graph.neighbors(i)) seen.push_back(label[j]);
      }
      if (seen.empty()) continue;
      std::sort(seen.begin(), seen.end());
      std::uint64_t best = seen.front();
      std::size_t best_count = 0;
      for (std::size_t a = 0; a < seen.size();) {
        std::size_t b = a;
        while (b < seen.size() && seen[b] == seen[a]) ++b;
        if (b - a > best_count) {  // strict: earlier (smaller) label wins ties
          best_count = b - a;
          best = seen[a];
        }
        a = b;
      }
      if (best != label[i]) {
        label[i] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return Partition::from_labels(label);
}

Partition partition_from_text(std::string_view text, std::size_t num_nodes,
                              std::span<const std::uint64_t> original_ids) {
  std::vector<std::uint64_t> labels(num_nodes);
  std::vector<char> seen(num_nodes, 0);
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string_view::npos || line[b] == '#') continue;
    line.remove_prefix(b);

    std::uint64_t vals[2];
    const char* p = line.data();
    const char* end = line.data() + line.size();
    for (auto& v : vals) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc() || ptr == p) throw ParseError(line_no, "expected 'node_id cluster_id'");
      p = ptr;
    }
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p != end) throw ParseError(line_no, "trailing characters");

    std::uint64_t node = vals[0];
    if (!original_ids.empty()) {
      auto it = std::lower_bound(original_ids.begin(), original_ids.end(), node);
      if (it == original_ids.end() || *it != node) {
        throw ParseError(line_no, "node " + std::to_string(node) + " is not in the graph");
      }
      node = static_cast<std::uint64_t>(it - original_ids.begin());
    }
    if (node >= num_nodes) throw ParseError(line_no, "node id out of range");
    if (seen[node]) throw ParseError(line_no, "node listed twice");
    seen[node] = 1;
    labels[node] = vals[1];
  }
  for (std::size_t i = 0; i < num_nodes; ++i) {
    if (!seen[i]) throw std::invalid_argument("partition file is missing node " + std::to_string(i));
  }
  return Partition::from_labels(labels);
}

Partition load_partition(const std::string& path, std::size_t num_nodes,
                         std::span<const std::uint64_t> original_ids) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open partition file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return partition_from_text(buffer.str(), num_nodes, original_ids);
}

std::string to_partition_text(const Partition& partition) {
  std::string out;
  for (NodeId i = 0; i < partition.num_nodes(); ++i) {
    out += std::to_string(i);
    out += ' ';
    out += std::to_string(partition.cluster_of(i));
    out += '\n';
  }
  return out;
}

ClusterDegreeStats cluster_degree_stats(const InterferenceGraph& graph, const Partition& partition) {
  if (partition.num_nodes() != graph.num_nodes()) {
    throw std::invalid_argument("cluster_degree_stats: partition does not cover the graph");
  }
  const std::size_t n = graph.num_nodes();
  ClusterDegreeStats s;
  s.degree.resize(n);
  s.same_cluster_degree.resize(n);
  s.cluster_neighbor_count.resize(n);
  const ClusterNeighborhoods hoods(graph, partition);
  for (NodeId i = 0; i < n; ++i) {
    const auto own = partition.cluster_of(i);
    std::size_t same = 0;
    for (NodeId j : graph.in_neighbors(i)) same += partition.cluster_of(j) == own;
    s.degree[i] = graph.degree(i);
    s.same_cluster_degree[i] = same;
    s.cluster_neighbor_count[i] = hoods.of(i).size();
    const auto out = static_cast<double>(s.degree[i] - same);
    s.sum_out_of_cluster += out;
    s.sum_out_of_cluster_sq += out * out;
    s.max_cluster_neighbors = std::max(s.max_cluster_neighbors, s.cluster_neighbor_count[i]);
  }
  return s;
}

ClusterNeighborhoods::ClusterNeighborhoods(const InterferenceGraph& graph,
                                           const Partition& partition)
    : num_clusters_(partition.num_clusters()) {
  if (partition.num_nodes() != graph.num_nodes()) {
    throw std::invalid_argument("partition does not cover the graph");
  }
  const std::size_t n = graph.num_nodes();
  own_.resize(n);
  offsets_.assign(n + 1, 0);
  std::vector<ClusterId> scratch;
  for (NodeId i = 0; i < n; ++i) {
    own_[i] = partition.cluster_of(i);
    scratch.clear();
    for (NodeId j : graph.in_neighbors(i)) {
      const auto c = partition.cluster_of(j);
      if (c != own_[i]) scratch.push_back(c);
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    clusters_.insert(clusters_.end(), scratch.begin(), scratch.end());
    offsets_[i + 1] = clusters_.size();
  }
}

}  // namespace dnest
