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

#include "dnest/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>

#include "dnest/partition.hpp"
#include "dnest/rng.hpp"

namespace dnest {
namespace {

void build_csr(std::size_t n, std::span<const Arc> sorted_arcs, std::vector<std::size_t>& offsets,
               std::vector<NodeId>& targets) {
  offsets.assign(n + 1, 0);
  targets.resize(sorted_arcs.size());
  for (const auto& [u, v] : sorted_arcs) ++offsets[u + 1];
  for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
  for (std::size_t k = 0; k < sorted_arcs.size(); ++k) targets[k] = sorted_arcs[k].second;
}

}  // namespace

InterferenceGraph InterferenceGraph::from_arcs(std::size_t num_nodes, std::vector<Arc> arcs,
                                               bool directed) {
  if (num_nodes > std::numeric_limits<NodeId>::max()) {
    throw std::invalid_argument("too many nodes for 32-bit node ids");
  }
  for (const auto& [u, v] : arcs) {
    if (u >= num_nodes || v >= num_nodes) {
      throw std::out_of_range("arc endpoint out of range");
    }
    if (u == v) throw std::invalid_argument("self-loop on node " + std::to_string(u));
  }
  if (!directed) {
    const std::size_t m = arcs.size();
    arcs.reserve(2 * m);
    for (std::size_t k = 0; k < m; ++k) arcs.emplace_back(arcs[k].second, arcs[k].first);
  }
  std::sort(arcs.begin(), arcs.end());
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

  InterferenceGraph g;
  g.num_nodes_ = num_nodes;
  g.directed_ = directed;
  build_csr(num_nodes, arcs, g.out_offsets_, g.out_targets_);
  if (directed) {
    for (auto& a : arcs) std::swap(a.first, a.second);
    std::sort(arcs.begin(), arcs.end());
    build_csr(num_nodes, arcs, g.in_offsets_, g.in_sources_);
  }
  const auto& in_off = g.in_offsets();
  for (std::size_t i = 0; i < num_nodes; ++i) {
    g.max_degree_ = std::max(g.max_degree_, in_off[i + 1] - in_off[i]);
  }
  return g;
}

std::span<const NodeId> InterferenceGraph::neighbors(NodeId i) const {
  check_node(i);
  return {out_targets_.data() + out_offsets_[i], out_offsets_[i + 1] - out_offsets_[i]};
}

std::span<const NodeId> InterferenceGraph::in_neighbors(NodeId i) const {
  if (!directed_) return neighbors(i);
  check_node(i);
  return {in_sources_.data() + in_offsets_[i], in_offsets_[i + 1] - in_offsets_[i]};
}

std::size_t InterferenceGraph::num_edges() const {
  return directed_ ? out_targets_.size() : out_targets_.size() / 2;
}

std::vector<Arc> InterferenceGraph::edges() const {
  std::vector<Arc> out;
  out.reserve(num_edges());
  for (NodeId u = 0; u < num_nodes_; ++u) {
    for (NodeId v : neighbors(u)) {
      if (directed_ || u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

void InterferenceGraph::audit() const {
  auto fail = [](const std::string& what) { throw std::logic_error("graph audit: " + what); };
  if (out_offsets_.size() != num_nodes_ + 1) fail("offset array size");
  if (directed_ && in_offsets_.size() != num_nodes_ + 1) fail("in-offset array size");
  std::size_t recomputed_max = 0;
  for (NodeId i = 0; i < num_nodes_; ++i) {
    for (auto view : {neighbors(i), in_neighbors(i)}) {
      for (std::size_t k = 0; k < view.size(); ++k) {
        if (view[k] >= num_nodes_) fail("neighbor id out of range");
        if (view[k] == i) fail("self-loop at " + std::to_string(i));
        if (k > 0 && view[k - 1] >= view[k]) fail("adjacency not sorted/unique at " + std::to_string(i));
      }
    }
    for (NodeId j : neighbors(i)) {
      auto back = in_neighbors(j);
      if (!std::binary_search(back.begin(), back.end(), i)) fail("in/out adjacency mismatch");
    }
    recomputed_max = std::max(recomputed_max, degree(i));
  }
  std::size_t in_total = 0;
  for (NodeId i = 0; i < num_nodes_; ++i) in_total += in_neighbors(i).size();
  if (in_total != out_targets_.size()) fail("in/out arc counts differ");
  if (recomputed_max != max_degree_) fail("cached max degree is stale");
}

bool operator==(const InterferenceGraph& a, const InterferenceGraph& b) {
  return a.num_nodes_ == b.num_nodes_ && a.directed_ == b.directed_ &&
         a.out_offsets_ == b.out_offsets_ && a.out_targets_ == b.out_targets_;
}

// ---------------------------------------------------------------------------
// Edge lists

namespace {

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

bool parse_u64(std::string_view& s, std::uint64_t& out) {
  s = trim(s);
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  if (ec != std::errc() || ptr == s.data()) return false;
  if (ptr != end && *ptr != ' ' && *ptr != '\t' && *ptr != '\r') return false;
  s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
  return true;
}

std::optional<std::uint64_t> node_header(std::string_view line) {
  line = trim(line.substr(1));
  constexpr std::string_view key = "nodes:";
  if (!line.starts_with(key)) return std::nullopt;
  line.remove_prefix(key.size());
  std::uint64_t n = 0;
  if (!parse_u64(line, n) || !trim(line).empty()) return std::nullopt;
  return n;
}

}  // namespace

LoadedGraph from_edge_list(std::string_view text, const EdgeListOptions& options) {
  LoadedGraph out;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> raw;
  std::optional<std::uint64_t> declared_nodes;

  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!declared_nodes) declared_nodes = node_header(line);
      continue;
    }
    std::uint64_t u = 0, v = 0;
    std::string_view rest = line;
    if (!parse_u64(rest, u) || !parse_u64(rest, v) || !trim(rest).empty()) {
      throw ParseError(line_no, "expected two non-negative integer node ids, got '" +
                                    std::string(line) + "'");
    }
    ++out.stats.pairs;
    if (u == v) {
      ++out.stats.self_loops_dropped;
      continue;
    }
    raw.emplace_back(u, v);
  }
  out.stats.lines = line_no;

  bool identity = false;
  if (options.honor_node_header && declared_nodes) {
    identity = std::all_of(raw.begin(), raw.end(), [&](const auto& e) {
      return e.first < *declared_nodes && e.second < *declared_nodes;
    });
  }

  std::size_t n = 0;
  std::vector<Arc> arcs;
  arcs.reserve(raw.size());
  if (identity) {
    n = static_cast<std::size_t>(*declared_nodes);
    out.original_ids.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.original_ids[i] = i;
    for (const auto& [u, v] : raw) arcs.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
  } else {
    std::vector<std::uint64_t> ids;
    ids.reserve(2 * raw.size());
    for (const auto& [u, v] : raw) {
      ids.push_back(u);
      ids.push_back(v);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() > std::numeric_limits<NodeId>::max()) {
      throw std::invalid_argument("edge list has too many distinct node ids");
    }
    auto dense = [&](std::uint64_t id) {
      return static_cast<NodeId>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };
    for (const auto& [u, v] : raw) arcs.emplace_back(dense(u), dense(v));
    n = ids.size();
    out.original_ids = std::move(ids);
  }
  raw.clear();
  raw.shrink_to_fit();

  if (!options.directed) {
    for (auto& a : arcs) {
      if (a.first > a.second) std::swap(a.first, a.second);
    }
  }
  std::sort(arcs.begin(), arcs.end());
  const std::size_t before = arcs.size();
  arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());
  out.stats.duplicates_collapsed = before - arcs.size();

  out.graph = InterferenceGraph::from_arcs(n, std::move(arcs), options.directed);
  return out;
}

LoadedGraph load_edge_list(const std::string& path, const EdgeListOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open edge list: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_edge_list(buffer.str(), options);
}

std::string to_edge_list(const InterferenceGraph& graph) {
  std::string out = "# nodes: " + std::to_string(graph.num_nodes()) + "\n";
  for (const auto& [u, v] : graph.edges()) {
    out += std::to_string(u);
    out += ' ';
    out += std::to_string(v);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generators

InterferenceGraph erdos_renyi(std::size_t n, double expected_degree, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("erdos_renyi: need n >= 2");
  if (!(expected_degree >= 0.0) || expected_degree > static_cast<double>(n - 1)) {
    throw std::invalid_argument("erdos_renyi: expected_degree must lie in [0, n-1]");
  }
  const double p = expected_degree / static_cast<double>(n - 1);
  std::vector<Arc> arcs;
  if (p >= 1.0) {
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) arcs.emplace_back(u, v);
    }
  } else if (p > 0.0) {
    // Geometric skipping over the lower triangle (Batagelj & Brandes).
    auto engine = rng::make_engine(seed);
    const double log_q = std::log1p(-p);
    arcs.reserve(static_cast<std::size_t>(expected_degree * static_cast<double>(n) * 0.55) + 16);
    std::int64_t v = 1;
    std::int64_t w = -1;
    const auto nn = static_cast<std::int64_t>(n);
    while (v < nn) {
      const double r = rng::uniform01(engine);
      w += 1 + static_cast<std::int64_t>(std::floor(std::log1p(-r) / log_q));
      while (w >= v && v < nn) {
        w -= v;
        ++v;
      }
      if (v < nn) arcs.emplace_back(static_cast<NodeId>(w), static_cast<NodeId>(v));
    }
  }
  return InterferenceGraph::from_arcs(n, std::move(arcs), false);
}

InterferenceGraph watts_strogatz(std::size_t n, std::size_t d, double q, std::uint64_t seed) {
  if (d % 2 != 0) throw std::invalid_argument("watts_strogatz: d must be even");
  if (d < 2 || d >= n) throw std::invalid_argument("watts_strogatz: need 2 <= d < n");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("watts_strogatz: q must lie in [0, 1]");

  std::vector<std::set<NodeId>> adj(n);
  for (NodeId i = 0; i < n; ++i) {
    for (std::size_t k = 1; k <= d / 2; ++k) {
      const auto j = static_cast<NodeId>((i + k) % n);
      adj[i].insert(j);
      adj[j].insert(i);
    }
  }
  if (q > 0.0) {
    auto engine = rng::make_engine(seed);
    for (NodeId i = 0; i < n; ++i) {
      for (std::size_t k = 1; k <= d / 2; ++k) {
        if (!(rng::uniform01(engine) < q)) continue;
        if (adj[i].size() >= n - 1) continue;
        const auto old = static_cast<NodeId>((i + k) % n);
        NodeId fresh = 0;
        do {
          fresh = static_cast<NodeId>(rng::bounded(engine, n));
        } while (fresh == i || adj[i].count(fresh) != 0);
        adj[i].erase(old);
        adj[old].erase(i);
        adj[i].insert(fresh);
        adj[fresh].insert(i);
      }
    }
  }
  std::vector<Arc> arcs;
  arcs.reserve(n * d / 2);
  for (NodeId i = 0; i < n; ++i) {
    for (NodeId j : adj[i]) {
      if (i < j) arcs.emplace_back(i, j);
    }
  }
  return InterferenceGraph::from_arcs(n, std::move(arcs), false);
}

InterferenceGraph contract(const InterferenceGraph& graph, const Partition& partition) {
  if (partition.num_nodes() != graph.num_nodes()) {
    throw std::invalid_argument("contract: partition does not cover the graph");
  }
  std::vector<Arc> arcs;
  for (NodeId u = 0; u < graph.num_nodes(); ++u) {
    const auto cu = partition.cluster_of(u);
    for (NodeId v : graph.neighbors(u)) {
      const auto cv = partition.cluster_of(v);
      if (cu != cv) arcs.emplace_back(cu, cv);
    }
  }
  return InterferenceGraph::from_arcs(partition.num_clusters(), std::move(arcs), graph.directed());
}

}  // namespace dnest
