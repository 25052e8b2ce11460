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

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "dnest/rideshare.hpp"
#include "doctest.h"

using namespace dnest;
using namespace dnest::rideshare;

namespace {

CityConfig small_city() {
  CityConfig c;
  c.width = 20;
  c.height = 20;
  c.fleet = 10;
  c.zones_x = 2;
  c.zones_y = 2;
  c.horizon_min = 120;
  c.arrival_rate = 3;
  return c;
}

Eyeball at(double t, std::uint32_t px, std::uint32_t py) {
  Eyeball e;
  e.t = t;
  e.px = e.dx = px;
  e.py = e.dy = py;
  return e;
}

bool has_edge(const InterferenceGraph& g, NodeId a, NodeId b) {
  const auto nb = g.neighbors(a);
  return std::find(nb.begin(), nb.end(), b) != nb.end();
}

}  // namespace

TEST_CASE("eyeball generation respects the horizon and grid") {
  const auto city = small_city();
  const auto eyes = generate_eyeballs(city, 5);
  // Poisson(360): 6 sd either side is generous.
  CHECK(eyes.size() > 360 - 6 * 19);
  CHECK(eyes.size() < 360 + 6 * 19);
  for (std::size_t i = 0; i < eyes.size(); ++i) {
    CHECK(eyes[i].index == i);
    CHECK(eyes[i].t >= 0.0);
    CHECK(eyes[i].t < city.horizon_min);
    CHECK(eyes[i].px < city.width);
    CHECK(eyes[i].dy < city.height);
    if (i) CHECK(eyes[i - 1].t <= eyes[i].t);
  }
  const auto again = generate_eyeballs(city, 5);
  REQUIRE(again.size() == eyes.size());
  CHECK(again.back().t == eyes.back().t);
  CHECK(generate_eyeballs(city, 6).size() != 0);
}

TEST_CASE("city and policy validation") {
  auto c = small_city();
  c.zones_x = 3;  // 20 is not divisible by 3
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_city();
  c.speed_km_per_min = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  PricingPolicy p;
  p.beta_price = 0.1;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = PricingPolicy{};
  p.beta_eta = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);

  c = small_city();
  CHECK(c.zone_of(0, 0) == 0);
  CHECK(c.zone_of(10, 0) == 1);
  CHECK(c.zone_of(0, 10) == 2);
  CHECK(c.zone_of(19, 19) == 3);
  // 7 cells of 0.1 km at 0.5 km/min
  CHECK(c.travel_min(0, 0, 3, 4) == doctest::Approx(1.4).epsilon(1e-15));
}

TEST_CASE("logistic choice") {
  PricingPolicy p;
  p.beta0 = 0.15 * 10.0 + 0.1 * 2.0;
  CHECK(p.accept_probability(10.0, 2.0) == 0.5);
  CHECK(p.accept_probability(12.0, 2.0) < 0.5);
  CHECK(p.accept_probability(10.0, 5.0) < 0.5);
  CHECK(p.price(10.0, 0) == 10.0);
  CHECK(p.price(10.0, 1) == doctest::Approx(12.0));
  // Weakly decreasing in price: a fixed coin that accepts at a higher price
  // also accepts at a lower one.
  double prev = 1.0;
  for (double price = 0; price < 60; price += 0.5) {
    const double a = p.accept_probability(price, 3.0);
    CHECK(a <= prev);
    prev = a;
  }
}

TEST_CASE("no fleet means every request is rejected") {
  auto city = small_city();
  city.fleet = 0;
  const Simulator sim(city, PricingPolicy{}, 3);
  REQUIRE(sim.num_eyeballs() > 0);
  const auto r = sim.simulate(std::vector<Treatment>(sim.num_eyeballs(), 1), true);
  CHECK(r.accepted == 0);
  CHECK(r.total_reward == 0.0);
  for (double y : r.y) CHECK(y == 0.0);
  CHECK(ground_truth_ate(sim) == 0.0);
}

TEST_CASE("a late flip leaves earlier outcomes unchanged") {
  const Simulator sim(small_city(), PricingPolicy{}, 9);
  const std::size_t n = sim.num_eyeballs();
  std::vector<Treatment> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = static_cast<Treatment>(i % 3 == 0);
  const auto a = sim.simulate(z);
  const std::size_t flip = n - n / 10;
  z[flip] ^= 1;
  const auto b = sim.simulate(z);
  for (std::size_t i = 0; i < flip; ++i) CHECK(a.y[i] == b.y[i]);
}

TEST_CASE("paired runs and reproducibility") {
  auto city = small_city();
  PricingPolicy pol;
  pol.price_increase = 0.0;
  const Simulator sim(city, pol, 21);
  const std::size_t n = sim.num_eyeballs();
  const auto t = sim.simulate(std::vector<Treatment>(n, 1));
  const auto c = sim.simulate(std::vector<Treatment>(n, 0));
  CHECK(t.y == c.y);  // bit-for-bit
  CHECK(ground_truth_ate(sim) == 0.0);

  pol.price_increase = 0.2;
  const double a1 = ground_truth_ate_rideshare(city, pol, 21);
  const double a2 = ground_truth_ate_rideshare(city, pol, 21);
  CHECK(std::isfinite(a1));
  CHECK(a1 == a2);
  CHECK(a1 != ground_truth_ate_rideshare(city, pol, 22));
}

TEST_CASE("desk-scale paired ATE is finite and reproducible") {
  CityConfig city;  // 60x60, 100 cars, ~21.6k eyeballs
  const PricingPolicy pol;
  const Simulator sim(city, pol, 1);
  CHECK(sim.num_eyeballs() >= 20000);
  const double ate = ground_truth_ate(sim);
  CHECK(std::isfinite(ate));
  CHECK(ate == ground_truth_ate(Simulator(city, pol, 1)));
}

TEST_CASE("conservation and occupancy") {
  auto city = small_city();
  city.fleet = 3;  // scarce supply so cars get reused
  const Simulator sim(city, PricingPolicy{}, 4);
  const std::size_t n = sim.num_eyeballs();
  std::vector<Treatment> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = static_cast<Treatment>(i & 1);
  const auto r = sim.simulate(z, true);
  CHECK(r.accepted > 0);
  CHECK(r.accepted <= n);
  CHECK(occupancy_audit(r, city.fleet));
  double total = 0.0;
  std::size_t positive = 0;
  for (double y : r.y) {
    total += y;
    positive += y > 0;
  }
  CHECK(total == r.total_reward);
  CHECK(positive <= r.accepted);

  // The audit notices a double-booked car.
  auto bad = r;
  REQUIRE(bad.trips.size() >= 2);
  bad.trips[1].car = bad.trips[0].car;
  bad.trips[1].start = bad.trips[0].start;
  bad.trips[0].end = bad.trips[0].start + 1.0;
  CHECK_FALSE(occupancy_audit(bad, city.fleet));
}

TEST_CASE("direct effect is monotone for the first rider") {
  // Supply is identical for the first eyeball under either arm, so acceptance
  // depends only on the price against a shared coin.
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Simulator sim(small_city(), PricingPolicy{}, seed);
    const std::size_t n = sim.num_eyeballs();
    std::vector<Treatment> z(n, 0);
    const auto c = sim.simulate(z);
    z[0] = 1;
    const auto t = sim.simulate(z);
    if (t.y[0] > 0) CHECK(c.y[0] > 0);
    if (t.y[0] > 0) CHECK(t.y[0] >= c.y[0]);
  }
}

TEST_CASE("interference graph thresholds") {
  CityConfig city = small_city();
  // 1 km = 10 cells
  std::vector<Eyeball> eyes{at(0, 0, 0), at(5, 5, 5), at(20, 5, 5)};
  auto g = build_interference_graph(eyes, city, 10, 2);
  CHECK(g.num_edges() == 1);
  CHECK(has_edge(g, 0, 1));
  CHECK(has_edge(g, 1, 0));
  CHECK_FALSE(has_edge(g, 1, 2));  // 15 min apart

  // Boundary is inclusive: exactly 2 km and 10 min.
  std::vector<Eyeball> edge{at(0, 0, 0), at(10, 20, 0)};
  CHECK(build_interference_graph(edge, city, 10, 2).num_edges() == 1);
  CHECK(build_interference_graph(edge, city, 9.99, 2).num_edges() == 0);
  CHECK(build_interference_graph(edge, city, 10, 1.99).num_edges() == 0);

  std::vector<Eyeball> tri{at(1, 3, 3), at(1, 3, 3), at(1, 3, 3)};
  g = build_interference_graph(tri, city, 10, 2);
  CHECK(g.num_edges() == 3);
  for (NodeId i = 0; i < 3; ++i) {
    CHECK(g.neighbors(i).size() == 2);
    CHECK_FALSE(has_edge(g, i, i));
  }
  CHECK_THROWS_AS(build_interference_graph(tri, city, -1, 2), std::invalid_argument);
}

TEST_CASE("switchback partition") {
  CityConfig one = small_city();
  one.zones_x = one.zones_y = 1;
  const auto eyes = generate_eyeballs(one, 2);
  CHECK(switchback_partition(eyes, one, one.horizon_min).num_clusters() == 1);

  std::vector<Eyeball> pair{at(3, 1, 1), at(17, 1, 1)};
  const auto p = switchback_partition(pair, one, 15);
  CHECK(p.num_clusters() == 2);
  CHECK(p.cluster_of(0) != p.cluster_of(1));
  CHECK(switchback_partition(pair, one, 20).num_clusters() == 1);

  // Short windows: at most zones x slots clusters, most of them occupied.
  CityConfig week = small_city();
  week.horizon_min = 7 * 1440;
  week.arrival_rate = 5;
  const auto many = generate_eyeballs(week, 3);
  const auto sb = switchback_partition(many, week, 2);
  const double slots = week.num_zones() * week.horizon_min / 2;
  CHECK(sb.num_clusters() <= slots);
  CHECK(sb.num_clusters() > 0.9 * slots);

  // Different zones in one window are different clusters.
  std::vector<Eyeball> zones{at(1, 0, 0), at(1, 15, 0)};
  CHECK(switchback_partition(zones, small_city(), 60).num_clusters() == 2);
  CHECK_THROWS_AS(switchback_partition(zones, small_city(), 0), std::invalid_argument);
}

TEST_CASE("trace round trip") {
  const auto city = small_city();
  const auto eyes = generate_eyeballs(city, 8);
  std::ostringstream out;
  write_trace(out, eyes);
  const auto back = parse_trace(out.str(), city);
  REQUIRE(back.size() == eyes.size());
  for (std::size_t i = 0; i < eyes.size(); ++i) {
    CHECK(back[i].t == eyes[i].t);
    CHECK(back[i].px == eyes[i].px);
    CHECK(back[i].py == eyes[i].py);
    CHECK(back[i].dx == eyes[i].dx);
    CHECK(back[i].dy == eyes[i].dy);
  }
  // Unsorted input is ordered by time.
  const auto s = parse_trace("t_min,px,py,dx,dy\n5,1,1,2,2\n1,3,3,4,4\n", city);
  REQUIRE(s.size() == 2);
  CHECK(s[0].t == 1.0);
  CHECK(s[0].index == 0);
  CHECK_THROWS_AS(parse_trace("t,px,py,dx,dy\n", city), ParseError);
  CHECK_THROWS_AS(parse_trace("t_min,px,py,dx,dy\n1,2,3\n", city), ParseError);
  CHECK_THROWS_AS(parse_trace("t_min,px,py,dx,dy\n1,20,3,4,5\n", city), ParseError);
  CHECK_THROWS_AS(parse_trace("t_min,px,py,dx,dy\n500,2,3,4,5\n", city), ParseError);
}

TEST_CASE("pricing experiment table") {
  const auto city = small_city();
  const PricingPolicy pol;
  const double single[] = {15};
  const auto one = run_pricing_experiment(city, pol, single, 0.5, 1, 3);
  REQUIRE(one.durations.size() == 1);
  CHECK(one.durations[0].summaries.size() == 3);  // dm_ratio, dm, dn_cluster
  CHECK(one.durations[0].summaries[0].trials == 1);
  CHECK(one.find(15, Estimator::kDNCluster) != nullptr);
  CHECK(one.find(15, Estimator::kHT) == nullptr);
  CHECK(one.graph_edges > 0);

  const double ds[] = {5, 30};
  const auto two = run_pricing_experiment(city, pol, ds, 0.5, 20, 3);
  REQUIRE(two.durations.size() == 2);
  CHECK(two.ate == one.ate);
  CHECK(two.durations[0].num_clusters > two.durations[1].num_clusters);
  CHECK(two.durations[1].summaries[2].partition_id == "switchback_30");
  CHECK_THROWS_AS(run_pricing_experiment(city, pol, std::span<const double>{}, 0.5, 1, 3),
                  std::invalid_argument);

  // Width does not change results.
  ExperimentOptions wide;
  wide.parallel = 4;
  const auto w = run_pricing_experiment(city, pol, ds, 0.5, 20, 3, wide);
  for (std::size_t d = 0; d < 2; ++d) {
    for (std::size_t e = 0; e < 3; ++e) {
      CHECK(w.durations[d].summaries[e].rmse == two.durations[d].summaries[e].rmse);
    }
  }
}

TEST_CASE("null treatment switches to absolute error") {
  PricingPolicy pol;
  pol.price_increase = 0.0;
  const double ds[] = {15};
  const auto r = run_pricing_experiment(small_city(), pol, ds, 0.5, 30, 2);
  CHECK(r.ate == 0.0);
  CHECK(r.absolute);
  for (const auto& s : r.durations[0].summaries) {
    CHECK(s.absolute);
    CHECK(s.bias == doctest::Approx(s.mean_estimate).epsilon(1e-12));
    CHECK(s.identity_holds());
  }
}

TEST_CASE("rideshare config") {
  const auto c = parse_rideshare_config(Json::parse(R"({
    "run_id": "rs", "city": {"fleet": 50, "zones_x": 2, "zones_y": 4},
    "policy": {"price_increase": 0.3}, "durations": [5, 10], "trials": 7,
    "estimators": ["dm", "dn_cluster"], "seed": 11})"));
  CHECK(c.run_id == "rs");
  CHECK(c.city.fleet == 50);
  CHECK(c.city.num_zones() == 8);
  CHECK(c.policy.price_increase == 0.3);
  CHECK(c.durations == std::vector<double>{5, 10});
  CHECK(c.options.estimators.size() == 2);
  CHECK(c.trials == 7);
  const auto back = parse_rideshare_config(to_json(c));
  CHECK(to_json(back) == to_json(c));

  try {
    parse_rideshare_config(Json::parse(R"({"city": {"zones_x": 7, "speed": 1},
      "policy": {"beta_price": 1}, "p": 1.5, "durations": [0],
      "estimators": ["nope"], "bogus": 1})"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::vector<std::string> ptrs;
    for (const auto& i : e.issues()) ptrs.push_back(i.pointer);
    for (const char* want : {"/city/zones_x", "/city/speed", "/policy/beta_price", "/p",
                             "/durations/0", "/estimators/0", "/bogus"}) {
      CHECK_MESSAGE(std::find(ptrs.begin(), ptrs.end(), want) != ptrs.end(), want);
    }
  }
}
