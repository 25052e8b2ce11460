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

#include <cmath>
#include <vector>

#include "dnest/design.hpp"
#include "dnest/estimators.hpp"
#include "dnest/rng.hpp"
#include "doctest.h"

using namespace dnest;

namespace {

using Bits = std::vector<Treatment>;
using Vals = std::vector<double>;

InterferenceGraph path2() { return InterferenceGraph::from_arcs(2, {{0, 1}}, false); }

// Textbook DN written from the definitions, no shared code with the library.
double dn_reference(const InterferenceGraph& g, const Bits& z, const Vals& y, double p) {
  double s = 0.0;
  for (NodeId i = 0; i < z.size(); ++i) {
    const double e = z[i] / p - (1 - z[i]) / (1 - p);
    double inner = y[i];
    for (NodeId j : g.neighbors(i)) {
      inner += (z[j] * (1 - p) / p + (1 - z[j]) * p / (1 - p)) * y[j];
    }
    s += e * inner;
  }
  return s / z.size();
}

struct Instance {
  InterferenceGraph g;
  Bits z;
  Vals y;
  double p;
};

Instance random_instance(std::uint64_t seed) {
  auto eng = rng::make_engine(seed);
  const std::size_t n = 2 + rng::bounded(eng, 63);
  const bool directed = seed % 2 == 1;
  std::vector<Arc> arcs;
  const double prob = rng::uniform01(eng) * 0.3;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = directed ? 0 : u + 1; v < n; ++v) {
      if (u != v && rng::uniform01(eng) < prob) arcs.emplace_back(u, v);
    }
  }
  if (seed % 7 == 0) {  // directed chain
    arcs.clear();
    for (NodeId u = 0; u + 1 < n; ++u) arcs.emplace_back(u, u + 1);
  }
  Instance in{InterferenceGraph::from_arcs(n, arcs, directed || seed % 7 == 0), Bits(n), Vals(n),
              0.1 + 0.8 * rng::uniform01(eng)};
  for (std::size_t i = 0; i < n; ++i) {
    in.z[i] = rng::uniform01(eng) < in.p;
    in.y[i] = 10 * rng::uniform01(eng) - 3;
  }
  return in;
}

}  // namespace

TEST_CASE("propensity moments") {
  for (double p : {0.2, 0.5, 0.7}) {
    const auto m = two_point_moments(p);
    const double q = 1 / (p * (1 - p));
    CHECK(std::abs(m.mean_eta) <= 1e-12);
    CHECK(std::abs(m.mean_abs_eta - 2) <= 1e-12);
    CHECK(std::abs(m.mean_xi - 1) <= 1e-12);
    CHECK(std::abs(m.mean_eta_sq - q) <= 1e-12);
    CHECK(std::abs(m.mean_xi_sq - (3 * p * p - 3 * p + 1) * q) <= 1e-12);
  }
  const auto m = two_point_moments(0.2);
  CHECK(m.mean_eta_sq == doctest::Approx(6.25).epsilon(1e-14));
  CHECK(m.mean_xi_sq == doctest::Approx(3.25).epsilon(1e-14));

  const auto t = PropensityTerms::from(Bits{1, 0}, 0.25);
  CHECK(t.eta == Vals{4.0, -4.0 / 3});
  CHECK(t.xi[0] == doctest::Approx(3.0));
  CHECK(t.xi[1] == doctest::Approx(1.0 / 3));
}

TEST_CASE("difference in means") {
  CHECK(dm(Bits{1}, Vals{1}, 0.5) == 2.0);
  CHECK(dm(Bits{1, 0}, Vals{3, 5}, 0.5) == -2.0);
  CHECK(dm(Bits{1, 0, 1}, Vals{0, 0, 0}, 0.3) == 0.0);
  CHECK_THROWS_AS(dm(Bits{1}, Vals{1}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(dm(Bits{1}, Vals{1, 2}, 0.5), std::invalid_argument);

  CHECK(dm_ratio(Bits{1, 0}, Vals{3, 5}) == -2.0);
  CHECK_FALSE(dm_ratio(Bits{1, 1}, Vals{3, 5}).has_value());
  CHECK(dm_ratio(Bits{1, 0, 1, 0}, Vals{4, 2, 6, 2}) == 3.0);
}

TEST_CASE("horvitz thompson") {
  const auto g = path2();
  CHECK(ht(g, Bits{1, 1}, Vals{3, 5}, 0.5) == 16.0);
  CHECK(ht(g, Bits{1, 0}, Vals{3, 5}, 0.5) == 0.0);
  CHECK(ht_detail(g, Bits{1, 0}, Vals{3, 5}, 0.5).exposed == 0);
  const auto iso = InterferenceGraph::from_arcs(1, {}, false);
  CHECK(ht(iso, Bits{1}, Vals{1}, 0.5) == 2.0);
  CHECK(ht(g, Bits{0, 0}, Vals{3, 5}, 0.5) == -16.0);
}

TEST_CASE("differences in neighbors") {
  const auto g = path2();
  CHECK(dn(g, Bits{1, 0}, Vals{3, 5}, 0.5) == 0.0);
  CHECK(dn(g, Bits{1, 1}, Vals{3, 5}, 0.5) == 16.0);
  CHECK(dn_credit(g, Bits{1, 0}, Vals{3, 5}, 0.5) == 0.0);
  CHECK(dn_credit(g, Bits{1, 1}, Vals{3, 5}, 0.5) == 16.0);

  // Directed 0 -> 1: node 0's impact includes xi_1 Y_1, node 1's credit eta_0.
  const auto chain = InterferenceGraph::from_arcs(2, {{0, 1}}, true);
  const Bits z{1, 0};
  const Vals y{0, 1};
  const double expected = (2 * (0 + 1 * 1) + (-2) * 1) / 2.0;  // 0
  CHECK(dn(chain, z, y, 0.5) == doctest::Approx(expected));
  CHECK(dn_credit(chain, z, y, 0.5) == doctest::Approx(expected));
  const Vals y2{2, 7};
  CHECK(dn(chain, Bits{1, 1}, y2, 0.3) ==
        doctest::Approx(dn_credit(chain, Bits{1, 1}, y2, 0.3)).epsilon(1e-13));

  const auto edgeless = InterferenceGraph::from_arcs(4, {}, false);
  const Bits ze{1, 0, 0, 1};
  const Vals ye{1, 2, 3, 4};
  CHECK(dn(edgeless, ze, ye, 0.4) == dm(ze, ye, 0.4));
  CHECK(ht(edgeless, ze, ye, 0.4) == dm(ze, ye, 0.4));
}

TEST_CASE("dn forms agree on random instances") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto in = random_instance(seed);
    const double a = dn(in.g, in.z, in.y, in.p);
    const double b = dn_credit(in.g, in.z, in.y, in.p);
    const double ref = dn_reference(in.g, in.z, in.y, in.p);
    const double scale = std::max(1.0, std::abs(ref));
    CHECK(std::abs(a - b) <= 1e-12 * scale);
    CHECK(std::abs(a - ref) <= 1e-12 * scale);
  }
}

TEST_CASE("estimators are linear in Y") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = random_instance(seed);
    auto eng = rng::make_engine(seed + 1000);
    Vals y2(a.y.size()), mix(a.y.size());
    const double alpha = 1.7, beta = -0.6;
    for (std::size_t i = 0; i < y2.size(); ++i) {
      y2[i] = rng::uniform01(eng) * 4 - 2;
      mix[i] = alpha * a.y[i] + beta * y2[i];
    }
    const ClusterNeighborhoods hoods(a.g, singleton(a.g.num_nodes()));
    auto all = [&](const Vals& y) {
      return Vals{dm(a.z, y, a.p), ht(a.g, a.z, y, a.p), dn(a.g, a.z, y, a.p),
                  dn_credit(a.g, a.z, y, a.p), dn_cluster(hoods, a.z, y, a.p),
                  ht_cluster_detail(hoods, a.z, y, a.p).estimate};
    };
    const auto e1 = all(a.y), e2 = all(y2), em = all(mix);
    for (std::size_t k = 0; k < e1.size(); ++k) {
      const double want = alpha * e1[k] + beta * e2[k];
      const double scale = std::max(1.0, std::abs(alpha * e1[k]) + std::abs(beta * e2[k]));
      CHECK(std::abs(em[k] - want) <= 1e-12 * scale);
    }
  }
}

TEST_CASE("cluster estimators") {
  const auto path = InterferenceGraph::from_arcs(3, {{0, 1}, {1, 2}}, false);
  const auto part = Partition::from_assignment({0, 0, 1});
  const auto draw = broadcast_clusters(part, {1, 0}, 0.5);
  CHECK(draw.z == Bits{1, 1, 0});
  CHECK(dn_cluster(path, part, draw, Vals{3, 4, 5}, 0.5) == doctest::Approx(2.0));

  const auto two = path2();
  const auto whole = Partition::from_assignment({0, 0});
  const auto d1 = broadcast_clusters(whole, {1}, 0.5);
  CHECK(dn_cluster(two, whole, d1, Vals{3, 5}, 0.5) == 8.0);
  CHECK(ht_cluster(two, whole, d1, Vals{3, 5}, 0.5) == 8.0);

  // Mixed closed cluster neighborhoods contribute zero.
  CHECK(ht_cluster(path, part, draw, Vals{3, 4, 5}, 0.5) == doctest::Approx(2.0 * 3 / 3));

  // A unit draw is not a cluster draw.
  const auto unit = draw_unit_bernoulli(3, 0.5, 1);
  CHECK_THROWS_AS(dn_cluster(path, part, unit, Vals{1, 2, 3}, 0.5), std::invalid_argument);
  auto bad = draw;
  bad.z[2] = 1;
  CHECK_THROWS_AS(dn_cluster(path, part, bad, Vals{1, 2, 3}, 0.5), std::invalid_argument);
}

TEST_CASE("singleton partitions reproduce the unit estimators bit for bit") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto in = random_instance(seed);
    const auto single = singleton(in.g.num_nodes());
    const auto draw = broadcast_clusters(single, in.z, in.p);
    CHECK(dn_cluster(in.g, single, draw, in.y, in.p) == dn_credit(in.g, in.z, in.y, in.p));
    CHECK(ht_cluster(in.g, single, draw, in.y, in.p) == ht(in.g, in.z, in.y, in.p));
  }
}

TEST_CASE("designs") {
  CHECK(draw_unit_bernoulli(20, 1.0, 3).z == Bits(20, 1));
  CHECK(draw_unit_bernoulli(20, 0.0, 3).z == Bits(20, 0));
  const std::size_t n = 100000;
  const auto d = draw_unit_bernoulli(n, 0.5, 8);
  double ones = 0;
  for (auto b : d.z) ones += b;
  CHECK(std::abs(ones / n - 0.5) < 4 * std::sqrt(0.25 / n));

  // Trial t does not depend on earlier trials.
  CHECK(draw_unit_bernoulli(50, 0.3, 4, 17).z == draw_unit_bernoulli(50, 0.3, 4, 17).z);
  CHECK(draw_unit_bernoulli(50, 0.3, 4, 17).z != draw_unit_bernoulli(50, 0.3, 4, 18).z);

  // Per-node marginals over many draws.
  const std::size_t draws = 20000;
  std::vector<double> hits(5, 0.0);
  for (std::size_t t = 0; t < draws; ++t) {
    const auto x = draw_unit_bernoulli(5, 0.3, 1, t);
    for (int i = 0; i < 5; ++i) hits[i] += x.z[i];
  }
  for (double h : hits) CHECK(std::abs(h / draws - 0.3) < 4 * std::sqrt(0.21 / draws));

  const auto part = random_balanced(40, 6, 2);
  double cover = 0;
  for (std::size_t t = 0; t < 2000; ++t) {
    const auto c = draw_cluster_bernoulli(part, 0.4, 9, t);
    check_cluster_draw(c, part);
    for (NodeId i = 0; i < 40; ++i) REQUIRE(c.z[i] == c.cluster_z[part.cluster_of(i)]);
    cover += c.z[0];
  }
  CHECK(std::abs(cover / 2000 - 0.4) < 4 * std::sqrt(0.24 / 2000));

  const auto whole = Partition::from_assignment(std::vector<ClusterId>(10, 0));
  int all_one = 0;
  for (std::size_t t = 0; t < 4000; ++t) {
    const auto c = draw_cluster_bernoulli(whole, 0.5, 5, t);
    const bool ones_only = c.z == Bits(10, 1), zeros_only = c.z == Bits(10, 0);
    REQUIRE((ones_only || zeros_only));
    all_one += ones_only;
  }
  CHECK(std::abs(all_one / 4000.0 - 0.5) < 4 * std::sqrt(0.25 / 4000));
}

TEST_CASE("estimate dispatch and flags") {
  const auto g = path2();
  const Bits z{1, 1};
  const Vals y{3, 5};
  TrialInputs in;
  in.graph = &g;
  in.z = z;
  in.y = y;
  in.p = 0.5;
  const auto r = estimate(Estimator::kDMRatio, in, 7);
  CHECK_FALSE(r.usable());
  CHECK(flags_to_string(r.flags) == "undefined");
  CHECK(r.trial == 7);
  const Bits mixed{1, 0};
  in.z = mixed;
  const auto h = estimate(Estimator::kHT, in);
  CHECK(h.usable());
  CHECK(flags_to_string(h.flags) == "ht_unexposed");
  CHECK(parse_estimator("dn_cluster") == Estimator::kDNCluster);
  CHECK_FALSE(parse_estimator("nope").has_value());
  CHECK_THROWS_AS(estimate(Estimator::kDNCluster, in), std::invalid_argument);
}
