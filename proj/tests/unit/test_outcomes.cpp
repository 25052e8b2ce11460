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
#include <memory>
#include <vector>

#include "dnest/graph.hpp"
#include "dnest/outcomes.hpp"
#include "doctest.h"

using namespace dnest;

namespace {

GraphPtr share(InterferenceGraph g) { return std::make_shared<const InterferenceGraph>(std::move(g)); }

GraphPtr path3() { return share(from_edge_list("0 1\n1 2").graph); }

MarkovChainSpec two_state_chain() {
  MarkovChainSpec c;
  c.num_states = 2;
  c.initial = {1.0, 0.0};
  c.transition = {{1.0, 0.0}, {0.0, 1.0}};
  c.perturbation = {{-0.5, 0.5}, {0.0, 0.0}};
  c.reward_control = {0.0, 1.0};
  c.reward_treated = {0.0, 1.0};
  c.delta = 1.0;
  return c;
}

}  // namespace

TEST_CASE("linear model") {
  const auto g = path3();
  const auto m = linear_model(g, {0, 0, 0}, 1.0, constant_edge_weights(*g, 0.1), 1.0);
  // node i gains 1 + 0.1 * degree(i); degrees are 1, 2, 1
  CHECK(ground_truth_ate(*m) == doctest::Approx(1.0 + 0.1 * 4 / 3).epsilon(1e-14));
  CHECK(m->smoothness_constant() == 0.0);

  const auto no_interference = linear_model(g, {1, 2, 3}, 0.7, constant_edge_weights(*g, 5), 0.0);
  CHECK(ground_truth_ate(*no_interference) == doctest::Approx(0.7));

  const auto constant = linear_model(g, {4, 4, 4}, 0.0, constant_edge_weights(*g, 0.0), 1.0);
  CHECK(ground_truth_ate(*constant) == 0.0);

  CHECK_THROWS_AS(linear_model(g, {0, 0, 0}, 1.0, EdgeWeights(3, 0.1), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(linear_model(g, {0, 0}, 1.0, constant_edge_weights(*g, 0.1), 1.0),
                  std::invalid_argument);
}

TEST_CASE("linear model honors per-edge weights") {
  // Directed 0 -> 2 and 1 -> 2 with distinct weights.
  const auto g = share(InterferenceGraph::from_arcs(3, {{0, 2}, {1, 2}}, true));
  EdgeWeights w(g->num_arcs());
  w[g->in_offset(2) + 0] = 0.25;  // from node 0
  w[g->in_offset(2) + 1] = 4.0;   // from node 1
  const auto m = linear_model(g, {0, 0, 0}, 0.0, w, 2.0);
  std::vector<Treatment> z{1, 0, 0};
  CHECK(m->evaluate(2, z) == doctest::Approx(0.5));
  z = {0, 1, 0};
  CHECK(m->evaluate(2, z) == doctest::Approx(8.0));
}

TEST_CASE("multiplicative model") {
  const auto g = share(InterferenceGraph::from_arcs(2, {{0, 1}}, false));
  const auto m = multiplicative_model(g, 1.0, constant_edge_weights(*g, 1.0), 0.5);
  std::vector<Treatment> z{0, 0};
  CHECK(m->evaluate(0, z) == 1.0);
  CHECK(m->evaluate(1, z) == 1.0);
  z = {1, 0};
  CHECK(m->evaluate(1, z) == doctest::Approx(1.5));

  const auto iso = share(InterferenceGraph::from_arcs(3, {}, false));
  const auto mi = multiplicative_model(iso, 2.5, {}, 0.5);
  std::vector<Treatment> ones{1, 1, 1};
  CHECK(mi->evaluate(1, ones) == 2.5);
}

TEST_CASE("multiplicative four-point difference matches closed form") {
  const auto g = share(watts_strogatz(12, 6, 0.0, 0));
  const double c0 = 1.3, delta = 0.8;
  const auto w = uniform_edge_weights(*g, 0.2, 1.5, 11);
  const auto m = multiplicative_model(g, c0, w, delta);
  const NodeId i = 5;
  const auto nb = g->in_neighbors(i);
  const double s = delta / static_cast<double>(nb.size());
  std::vector<Treatment> z(12, 0);
  z[nb[2]] = 1;
  z[nb[4]] = 1;
  z[i] = 1;
  for (std::size_t a = 0; a < nb.size(); ++a) {
    for (std::size_t b = a + 1; b < nb.size(); ++b) {
      if (a == 2 || a == 4 || b == 2 || b == 4) continue;
      auto corner = [&](Treatment x, Treatment y) {
        auto zz = z;
        zz[nb[a]] = x;
        zz[nb[b]] = y;
        return m->evaluate(i, zz);
      };
      const double delta_jk = corner(1, 1) - corner(0, 1) - corner(1, 0) + corner(0, 0);
      const double ca = w[g->in_offset(i) + a], cb = w[g->in_offset(i) + b];
      const double closed = c0 * s * s * ca * cb * (1 + s * w[g->in_offset(i) + 2]) *
                            (1 + s * w[g->in_offset(i) + 4]);
      CHECK(delta_jk == doctest::Approx(closed).epsilon(1e-12));
    }
  }
}

TEST_CASE("low-order model") {
  const auto g = share(from_edge_list("0 1\n0 2\n1 2\n").graph);
  std::vector<std::vector<LowOrderTerm>> terms(3);
  terms[0].push_back({{1, 2}, 2.0});
  const auto m = std::make_shared<LowOrderModel>(g, std::vector<double>{0.3, 0.3, 0.3},
                                                 std::vector<double>{0, 0, 0}, terms, 0.5, 0.0);
  std::vector<Treatment> z(3, 0);
  CHECK(m->evaluate(0, z) == 0.3);
  auto corner = [&](Treatment a, Treatment b) {
    z[1] = a;
    z[2] = b;
    return m->evaluate(0, z);
  };
  CHECK(corner(1, 1) - corner(0, 1) - corner(1, 0) + corner(0, 0) == doctest::Approx(0.5));
  CHECK(m->node_smoothness_constant(0) == 2.0);
  CHECK(m->node_smoothness_constant(1) == 0.0);

  // Order one is linear: L = 0.
  std::vector<std::vector<LowOrderTerm>> linear(3);
  linear[1].push_back({{0}, 1.0});
  linear[1].push_back({{2}, -1.0});
  const LowOrderModel lin(g, {0, 0, 0}, {1, 1, 1}, linear, 0.5, 0.0);
  CHECK(lin.smoothness_constant() == 0.0);

  std::vector<std::vector<LowOrderTerm>> bad(3);
  bad[0].push_back({{0, 1}, 1.0});  // contains i itself
  CHECK_THROWS_AS(LowOrderModel(g, {0, 0, 0}, {0, 0, 0}, bad, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("random low-order model respects its config") {
  const auto g = share(erdos_renyi(30, 4, 3));
  LowOrderConfig cfg;
  cfg.max_order = 3;
  cfg.terms_per_node = 5;
  cfg.coefficient_bound = 0.7;
  const auto m = random_low_order_model(g, cfg, 42);
  for (NodeId i = 0; i < 30; ++i) {
    const auto nb = g->in_neighbors(i);
    double l = 0.0;
    for (const auto& t : m->terms(i)) {
      CHECK(t.subset.size() <= 3);
      CHECK(std::abs(t.coefficient) <= 0.7);
      for (NodeId j : t.subset) CHECK(std::binary_search(nb.begin(), nb.end(), j));
      if (t.subset.size() >= 2) {
        l += std::pow(cfg.delta, static_cast<double>(t.subset.size() - 2)) * std::abs(t.coefficient);
      }
    }
    CHECK(*m->node_smoothness_constant(i) == doctest::Approx(l));
  }
}

TEST_CASE("benchmark model") {
  const auto ring = share(watts_strogatz(6, 2, 0.0, 0));
  const auto m = benchmark_model(ring, 1.0, 1.0, 0.1);
  std::vector<Treatment> zero(6, 0), one(6, 1);
  for (NodeId i = 0; i < 6; ++i) CHECK(m->evaluate(i, zero) == 1.0);
  // f_i(1) = c0 (1 + 2) / 2 + c1 1.1^3
  CHECK(ground_truth_ate(*m) == doctest::Approx(1.5 + 1.331 - 1.0).epsilon(1e-14));

  // Second difference with c1 = 1, other neighbors untreated, z_i = 0: c2^2.
  const auto star = share(InterferenceGraph::from_arcs(4, {{0, 1}, {0, 2}, {0, 3}}, false));
  const auto b = benchmark_model(star, 0.7, 1.0, 0.2);
  std::vector<Treatment> z(4, 0);
  auto corner = [&](Treatment x, Treatment y) {
    z[1] = x;
    z[2] = y;
    return b->evaluate(0, z);
  };
  CHECK(corner(1, 1) - corner(0, 1) - corner(1, 0) + corner(0, 0) == doctest::Approx(0.04));
  z[3] = 1;
  CHECK(corner(1, 1) - corner(0, 1) - corner(1, 0) + corner(0, 0) == doctest::Approx(0.048));

  const auto iso = share(InterferenceGraph::from_arcs(2, {}, false));
  const auto bi = benchmark_model(iso, 2.0, 1.0, 0.5);
  std::vector<Treatment> t{1, 0};
  CHECK(bi->evaluate(0, t) == doctest::Approx(2.0 + 1.5));
  CHECK(bi->evaluate(1, t) == 1.0);
}

TEST_CASE("markovian model") {
  const auto m = markovian_model(two_state_chain(), 3, 2);
  CHECK(ground_truth_ate(*m) == doctest::Approx((0 + 0.5 + 0.75) / 3.0).epsilon(1e-14));

  // delta = 0: f_t = rho P^t r_{z_t}
  auto c = two_state_chain();
  c.transition = {{0.9, 0.1}, {0.3, 0.7}};
  c.reward_control = {1.0, 0.0};
  c.reward_treated = {2.0, 5.0};
  c.delta = 0.0;
  const auto flat = markovian_model(c, 4, 3);
  double expect = 0.0;
  std::vector<double> rho{1.0, 0.0};
  for (int t = 0; t < 4; ++t) {
    expect += rho[0] * (2.0 - 1.0) + rho[1] * (5.0 - 0.0);
    rho = {rho[0] * 0.9 + rho[1] * 0.3, rho[0] * 0.1 + rho[1] * 0.7};
  }
  CHECK(ground_truth_ate(*flat) == doctest::Approx(expect / 4).epsilon(1e-14));

  MarkovChainSpec one;
  one.num_states = 1;
  one.initial = {1.0};
  one.transition = {{1.0}};
  one.perturbation = {{0.0}};
  one.reward_control = {0.25};
  one.reward_treated = {1.0};
  CHECK(ground_truth_ate(*markovian_model(one, 5, 1)) == doctest::Approx(0.75));

  auto broken = two_state_chain();
  broken.delta = 3.0;  // P + 3D has a negative entry
  CHECK_THROWS_AS(markovian_model(broken, 3, 2), std::invalid_argument);
  broken = two_state_chain();
  broken.transition[1] = {0.2, 0.7};
  CHECK_THROWS_AS(markovian_model(broken, 3, 2), std::invalid_argument);
}

TEST_CASE("markovian evaluate_all matches per-node evaluation") {
  auto c = two_state_chain();
  c.transition = {{0.6, 0.4}, {0.2, 0.8}};
  c.perturbation = {{-0.3, 0.3}, {-0.1, 0.1}};
  c.reward_treated = {0.5, 2.0};
  const auto m = markovian_model(c, 9, 2);
  CHECK(m->graph().directed());
  CHECK(m->graph().degree(5) == 2);
  CHECK(m->graph().degree(1) == 1);
  std::vector<Treatment> z{1, 0, 1, 1, 0, 0, 1, 0, 1};
  std::vector<double> all(9);
  m->evaluate_all(z, all);
  for (NodeId t = 0; t < 9; ++t) CHECK(all[t] == doctest::Approx(m->evaluate(t, z)).epsilon(1e-14));
}

TEST_CASE("neighborhood audit") {
  const auto g = share(erdos_renyi(40, 3, 8));
  const auto w = uniform_edge_weights(*g, -1, 1, 2);
  std::vector<std::shared_ptr<const OutcomeModel>> models{
      linear_model(g, std::vector<double>(40, 0.5), 1.0, w, 0.3),
      multiplicative_model(g, 1.0, w, 0.4),
      random_low_order_model(g, {}, 5),
      benchmark_model(g, 1.0, 0.5, 0.2),
  };
  for (const auto& m : models) {
    const auto a = audit_neighborhood(*m, 100, 17);
    CHECK(a.checked == 100);
    CHECK(a.violations == 0);
    CHECK_FALSE(a.approximate);
  }

  const auto full = markovian_model(two_state_chain(), 12, 11);
  const auto fa = audit_neighborhood(*full, 100, 3);
  CHECK(fa.violations == 0);
  CHECK_FALSE(fa.approximate);

  const auto truncated = markovian_model(two_state_chain(), 12, 3);
  const auto ta = audit_neighborhood(*truncated, 100, 3);
  CHECK(ta.violations == 0);
  CHECK(ta.approximate);
}

TEST_CASE("noise is reproducible and order independent") {
  const auto g = share(erdos_renyi(50, 3, 1));
  const auto m = benchmark_model(g, 1.0, 1.0, 0.1, 0.5);
  std::vector<Treatment> z(50, 1);
  std::vector<double> a(50), b(50), clean(50);
  m->observe(z, 99, 4, a);
  m->observe(z, 99, 4, b);
  CHECK(a == b);
  m->observe(z, 99, 5, b);
  CHECK(a != b);
  m->evaluate_all(z, clean);
  double ss = 0.0;
  for (int i = 0; i < 50; ++i) ss += (a[i] - clean[i]) * (a[i] - clean[i]);
  CHECK(ss > 0.0);
  CHECK(ground_truth_ate(*m) == ground_truth_ate(*benchmark_model(g, 1.0, 1.0, 0.1)));
}
