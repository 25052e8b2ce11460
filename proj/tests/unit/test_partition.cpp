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

#include <numeric>
#include <set>
#include <vector>

#include "dnest/graph.hpp"
#include "dnest/partition.hpp"
#include "doctest.h"

using namespace dnest;

namespace {

// Component id per node by plain DFS, used as an independent reference.
std::vector<std::size_t> components(const InterferenceGraph& g) {
  std::vector<std::size_t> comp(g.num_nodes(), SIZE_MAX);
  std::size_t next = 0;
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    if (comp[s] != SIZE_MAX) continue;
    std::vector<NodeId> stack{s};
    comp[s] = next;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (NodeId v : g.neighbors(u)) {
        if (comp[v] == SIZE_MAX) {
          comp[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return comp;
}

std::size_t crossing_edges(const InterferenceGraph& g, const Partition& p) {
  std::size_t c = 0;
  for (auto [u, v] : g.edges()) c += p.cluster_of(u) != p.cluster_of(v);
  return c;
}

}  // namespace

TEST_CASE("contiguous blocks") {
  const auto p = contiguous_blocks(6, 2);
  CHECK(p.assignment() == std::vector<ClusterId>{0, 0, 1, 1, 2, 2});
  CHECK(p.num_clusters() == 3);
  CHECK(contiguous_blocks(5, 5).num_clusters() == 1);
  CHECK(contiguous_blocks(5, 1) == singleton(5));
  const auto tail = contiguous_blocks(7, 3);
  CHECK(tail.num_clusters() == 3);
  CHECK(tail.cluster_size(2) == 1);
  CHECK_THROWS_AS(contiguous_blocks(5, 0), std::invalid_argument);
  CHECK_THROWS_AS(contiguous_blocks(5, 6), std::invalid_argument);
}

TEST_CASE("partition construction and members") {
  CHECK(singleton(3).assignment() == std::vector<ClusterId>{0, 1, 2});
  CHECK_THROWS_AS(Partition::from_assignment({0, 2}), std::invalid_argument);
  const std::vector<std::uint64_t> labels{90, 5, 90, 7};
  const auto p = Partition::from_labels(labels);
  CHECK(p.assignment() == std::vector<ClusterId>{2, 0, 2, 1});
  const auto m = p.members(2);
  CHECK(std::vector<NodeId>(m.begin(), m.end()) == std::vector<NodeId>{0, 2});
}

TEST_CASE("random balanced") {
  const auto p = random_balanced(103, 10, 5);
  CHECK(p.num_clusters() == 10);
  std::size_t lo = SIZE_MAX, hi = 0;
  for (ClusterId c = 0; c < 10; ++c) {
    lo = std::min(lo, p.cluster_size(c));
    hi = std::max(hi, p.cluster_size(c));
  }
  CHECK(hi - lo <= 1);
  CHECK(random_balanced(103, 10, 5) == p);
  CHECK_FALSE(random_balanced(103, 10, 6) == p);
}

TEST_CASE("label propagation") {
  const auto edgeless = InterferenceGraph::from_arcs(6, {}, false);
  CHECK(label_propagation(edgeless, 1).num_clusters() == 6);

  const auto triangles =
      InterferenceGraph::from_arcs(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}, false);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto p = label_propagation(triangles, seed);
    CHECK(p.num_clusters() == 2);
    CHECK(p.cluster_of(0) == p.cluster_of(1));
    CHECK(p.cluster_of(1) == p.cluster_of(2));
    CHECK(p.cluster_of(3) == p.cluster_of(5));
    CHECK(p.cluster_of(0) != p.cluster_of(3));
  }

  // Never merges across components.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = erdos_renyi(200, 1.5, seed);
    const auto comp = components(g);
    const auto p = label_propagation(g, seed);
    for (NodeId a = 0; a < g.num_nodes(); ++a) {
      for (NodeId b : p.members(p.cluster_of(a))) REQUIRE(comp[a] == comp[b]);
    }
    CHECK(label_propagation(g, seed) == p);
  }
}

TEST_CASE("partition files") {
  const auto p = partition_from_text("# header\n2 9\n0 4\n1 4\n", 3);
  CHECK(p.assignment() == std::vector<ClusterId>{0, 0, 1});
  CHECK(partition_from_text(to_partition_text(p), 3) == p);
  CHECK_THROWS_AS(partition_from_text("0 1\n2 1\n", 3), std::invalid_argument);
  CHECK_THROWS_AS(partition_from_text("0 1\n0 2\n1 1\n", 2), ParseError);
  CHECK_THROWS_AS(partition_from_text("0 a\n", 1), ParseError);

  // Original ids from a sparse edge list.
  const auto loaded = from_edge_list("10 20\n20 30\n");
  const auto q = partition_from_text("30 1\n10 0\n20 0\n", 3, loaded.original_ids);
  CHECK(q.assignment() == std::vector<ClusterId>{0, 0, 1});
  CHECK_THROWS_AS(partition_from_text("11 0\n", 3, loaded.original_ids), ParseError);
}

TEST_CASE("cluster degree stats") {
  const auto ring4 = watts_strogatz(4, 2, 0.0, 0);
  const auto p = Partition::from_assignment({0, 0, 1, 1});
  const auto s = cluster_degree_stats(ring4, p);
  CHECK(s.degree[0] == 2);
  CHECK(s.same_cluster_degree[0] == 1);
  CHECK(s.sum_out_of_cluster_sq == 4.0);
  CHECK(s.max_cluster_neighbors == 1);

  const auto g = erdos_renyi(40, 4, 2);
  const auto all = cluster_degree_stats(g, Partition::from_assignment(std::vector<ClusterId>(40, 0)));
  CHECK(all.sum_out_of_cluster == 0.0);
  CHECK(all.max_cluster_neighbors == 0);

  const auto single = cluster_degree_stats(g, singleton(40));
  double sq = 0.0;
  for (NodeId i = 0; i < 40; ++i) {
    CHECK(single.same_cluster_degree[i] == 0);
    sq += static_cast<double>(g.degree(i) * g.degree(i));
  }
  CHECK(single.sum_out_of_cluster_sq == sq);

  // sum_i (d_i - d_i^C) = 2 * crossing edges; ring blocks give 2N/m endpoints.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto h = erdos_renyi(60, 5, seed);
    const auto part = random_balanced(60, 7, seed);
    const auto st = cluster_degree_stats(h, part);
    CHECK(st.sum_out_of_cluster == 2.0 * crossing_edges(h, part));
    for (NodeId i = 0; i < 60; ++i) CHECK(st.same_cluster_degree[i] <= st.degree[i]);
    CHECK(st.max_cluster_neighbors >= 1);
  }
  for (std::size_t m : {1, 2, 5, 10}) {
    const auto ring = watts_strogatz(200, 2, 0.0, 0);
    CHECK(cluster_degree_stats(ring, contiguous_blocks(200, m)).sum_out_of_cluster ==
          doctest::Approx(2.0 * 200 / m));
  }
}

TEST_CASE("cluster neighborhoods exclude the own cluster") {
  const auto path = from_edge_list("0 1\n1 2").graph;
  const ClusterNeighborhoods h(path, Partition::from_assignment({0, 0, 1}));
  CHECK(h.of(0).empty());
  CHECK(std::vector<ClusterId>(h.of(1).begin(), h.of(1).end()) == std::vector<ClusterId>{1});
  CHECK(std::vector<ClusterId>(h.of(2).begin(), h.of(2).end()) == std::vector<ClusterId>{0});
  CHECK(h.own(2) == 1);
}
