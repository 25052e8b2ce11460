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

#include "dnest/rideshare.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dnest/rng.hpp"

namespace dnest::rideshare {

namespace {

std::uint32_t manhattan(std::uint32_t x0, std::uint32_t y0, std::uint32_t x1, std::uint32_t y1) {
  const auto ax = x0 > x1 ? x0 - x1 : x1 - x0;
  const auto ay = y0 > y1 ? y0 - y1 : y1 - y0;
  return ax + ay;
}

std::vector<Eyeball> sorted_and_indexed(std::vector<Eyeball> eyeballs) {
  std::stable_sort(eyeballs.begin(), eyeballs.end(),
                   [](const Eyeball& a, const Eyeball& b) { return a.t < b.t; });
  for (std::size_t i = 0; i < eyeballs.size(); ++i) eyeballs[i].index = static_cast<std::uint32_t>(i);
  return eyeballs;
}

}  // namespace

void CityConfig::validate() const {
  if (width == 0 || height == 0) throw std::invalid_argument("grid must have at least one cell");
  if (!(cell_km > 0.0)) throw std::invalid_argument("cell size must be positive");
  if (!(speed_km_per_min > 0.0)) throw std::invalid_argument("car speed must be positive");
  if (zones_x == 0 || zones_y == 0 || width % zones_x != 0 || height % zones_y != 0) {
    throw std::invalid_argument("zones must tile the grid exactly");
  }
  if (!(horizon_min > 0.0)) throw std::invalid_argument("horizon must be positive");
  if (trace_path.empty() && !(arrival_rate > 0.0)) {
    throw std::invalid_argument("arrival rate must be positive");
  }
}

std::uint32_t CityConfig::zone_of(std::uint32_t x, std::uint32_t y) const {
  const std::uint32_t zx = x / (width / zones_x);
  const std::uint32_t zy = y / (height / zones_y);
  return zy * zones_x + zx;
}

double CityConfig::travel_min(std::uint32_t x0, std::uint32_t y0, std::uint32_t x1,
                              std::uint32_t y1) const {
  return static_cast<double>(manhattan(x0, y0, x1, y1)) * cell_km / speed_km_per_min;
}

void PricingPolicy::validate() const {
  if (!(rate_per_min > 0.0)) throw std::invalid_argument("rate must be positive");
  if (!(price_increase > -1.0)) throw std::invalid_argument("price adjustment must exceed -1");
  if (!(beta_price < 0.0)) throw std::invalid_argument("beta_price must be negative");
  if (!(beta_eta < 0.0)) throw std::invalid_argument("beta_eta must be negative");
}

double PricingPolicy::price(double trip_min, Treatment z) const {
  return rate_per_min * (1.0 + (z ? price_increase : 0.0)) * trip_min;
}

double PricingPolicy::accept_probability(double price, double eta_min) const {
  const double u = beta0 + beta_price * price + beta_eta * eta_min;
  return 1.0 / (1.0 + std::exp(-u));
}

std::vector<Eyeball> generate_eyeballs(const CityConfig& city, std::uint64_t seed) {
  city.validate();
  if (!city.trace_path.empty()) return load_trace(city.trace_path, city);
  auto eng = rng::make_engine(rng::mix(seed, static_cast<std::uint64_t>(rng::Stream::kEyeballs)));
  std::vector<Eyeball> out;
  double t = 0.0;
  for (;;) {
    t += -std::log1p(-rng::uniform01(eng)) / city.arrival_rate;
    if (t >= city.horizon_min) break;
    Eyeball e;
    e.index = static_cast<std::uint32_t>(out.size());
    e.t = t;
    e.px = static_cast<std::uint32_t>(rng::bounded(eng, city.width));
    e.py = static_cast<std::uint32_t>(rng::bounded(eng, city.height));
    e.dx = static_cast<std::uint32_t>(rng::bounded(eng, city.width));
    e.dy = static_cast<std::uint32_t>(rng::bounded(eng, city.height));
    out.push_back(e);
  }
  return out;
}

std::vector<Eyeball> parse_trace(std::string_view text, const CityConfig& city) {
  std::vector<Eyeball> out;
  std::size_t line_no = 0;
  bool header = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (!header) {
      if (line != "t_min,px,py,dx,dy") {
        throw ParseError(line_no, "expected header t_min,px,py,dx,dy");
      }
      header = true;
      continue;
    }
    std::string_view fields[5];
    std::size_t nf = 0;
    while (nf < 5) {
      const auto c = line.find(',');
      fields[nf++] = line.substr(0, c);
      if (c == std::string_view::npos) {
        line = {};
        break;
      }
      line = line.substr(c + 1);
    }
    if (nf != 5 || !line.empty()) throw ParseError(line_no, "expected 5 comma-separated fields");
    Eyeball e;
    const std::string tstr(fields[0]);
    std::size_t used = 0;
    try {
      e.t = std::stod(tstr, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tstr.size() || tstr.empty()) throw ParseError(line_no, "bad time '" + tstr + "'");
    std::uint32_t* cells[4] = {&e.px, &e.py, &e.dx, &e.dy};
    for (int k = 0; k < 4; ++k) {
      const auto f = fields[k + 1];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), *cells[k]);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw ParseError(line_no, "bad cell coordinate '" + std::string(f) + "'");
      }
    }
    if (!(e.t >= 0.0 && e.t < city.horizon_min)) throw ParseError(line_no, "time outside horizon");
    if (e.px >= city.width || e.dx >= city.width || e.py >= city.height || e.dy >= city.height) {
      throw ParseError(line_no, "cell outside the grid");
    }
    out.push_back(e);
  }
  if (!header) throw ParseError(1, "empty trace");
  return sorted_and_indexed(std::move(out));
}

std::vector<Eyeball> load_trace(const std::string& path, const CityConfig& city) {
  return parse_trace(read_text_file(path), city);
}

void write_trace(std::ostream& out, std::span<const Eyeball> eyeballs) {
  out << "t_min,px,py,dx,dy\n";
  for (const auto& e : eyeballs) {
    out << format_g17(e.t) << ',' << e.px << ',' << e.py << ',' << e.dx << ',' << e.dy << '\n';
  }
}

Simulator::Simulator(CityConfig city, PricingPolicy policy, std::uint64_t seed)
    : Simulator(city, policy, generate_eyeballs(city, seed), seed) {}

Simulator::Simulator(CityConfig city, PricingPolicy policy, std::vector<Eyeball> eyeballs,
                     std::uint64_t seed)
    : city_(std::move(city)), policy_(policy), eyeballs_(sorted_and_indexed(std::move(eyeballs))) {
  city_.validate();
  policy_.validate();
  auto eng = rng::make_engine(rng::mix(seed, static_cast<std::uint64_t>(rng::Stream::kFleet)));
  start_positions_.resize(city_.fleet);
  for (auto& [x, y] : start_positions_) {
    x = static_cast<std::uint32_t>(rng::bounded(eng, city_.width));
    y = static_cast<std::uint32_t>(rng::bounded(eng, city_.height));
  }
  const rng::CounterStream coins(seed, rng::Stream::kAcceptance);
  coins_.resize(eyeballs_.size());
  for (std::size_t i = 0; i < coins_.size(); ++i) coins_[i] = coins.uniform(i);
}

SimulationResult Simulator::simulate(std::span<const Treatment> assignment,
                                     bool record_trips) const {
  if (assignment.size() != eyeballs_.size()) {
    throw std::invalid_argument("assignment needs one bit per eyeball");
  }
  SimulationResult r;
  r.y.assign(eyeballs_.size(), 0.0);
  const std::size_t fleet = city_.fleet;
  std::vector<std::uint32_t> cx(fleet), cy(fleet);
  std::vector<double> free_at(fleet, 0.0);
  for (std::size_t c = 0; c < fleet; ++c) {
    cx[c] = start_positions_[c].first;
    cy[c] = start_positions_[c].second;
  }
  for (std::size_t i = 0; i < eyeballs_.size(); ++i) {
    const Eyeball& e = eyeballs_[i];
    // Nearest free car; ties go to the lowest car id.
    std::size_t best = fleet;
    std::uint32_t best_dist = std::numeric_limits<std::uint32_t>::max();
    for (std::size_t c = 0; c < fleet; ++c) {
      if (free_at[c] > e.t) continue;
      const auto dist = manhattan(cx[c], cy[c], e.px, e.py);
      if (dist < best_dist) {
        best_dist = dist;
        best = c;
      }
    }
    if (best == fleet) continue;  // no supply: forced reject
    const double eta = static_cast<double>(best_dist) * city_.cell_km / city_.speed_km_per_min;
    const double trip = city_.travel_min(e.px, e.py, e.dx, e.dy);
    const double price = policy_.price(trip, assignment[i]);
    if (!(coins_[i] < policy_.accept_probability(price, eta))) continue;
    r.y[i] = price;
    ++r.accepted;
    r.total_reward += price;
    free_at[best] = e.t + eta + trip;
    cx[best] = e.dx;
    cy[best] = e.dy;
    if (record_trips) {
      r.trips.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(best), e.t,
                         free_at[best]});
    }
  }
  return r;
}

void Simulator::simulate_into(std::span<const Treatment> assignment, std::span<double> y) const {
  auto r = simulate(assignment);
  std::copy(r.y.begin(), r.y.end(), y.begin());
}

bool occupancy_audit(const SimulationResult& result, std::size_t fleet) {
  if (result.trips.size() != result.accepted || result.accepted > result.y.size()) return false;
  std::vector<double> busy_until(fleet, -std::numeric_limits<double>::infinity());
  double reward = 0.0;
  for (const auto& t : result.trips) {
    if (t.car >= fleet || t.end < t.start) return false;
    if (t.start < busy_until[t.car]) return false;  // overlapping trips on one car
    busy_until[t.car] = t.end;
    reward += result.y[t.eyeball];
  }
  double total = 0.0;
  for (double v : result.y) total += v;
  return reward == result.total_reward && total == result.total_reward;
}

InterferenceGraph build_interference_graph(std::span<const Eyeball> eyeballs,
                                           const CityConfig& city, double time_threshold_min,
                                           double dist_threshold_km) {
  if (!(time_threshold_min >= 0.0) || !(dist_threshold_km >= 0.0)) {
    throw std::invalid_argument("thresholds must be non-negative");
  }
  for (std::size_t i = 1; i < eyeballs.size(); ++i) {
    if (eyeballs[i].t < eyeballs[i - 1].t) throw std::invalid_argument("eyeballs must be time-sorted");
  }
  // Compare in cells; the slack absorbs rounding in threshold / cell size.
  const double max_cells = dist_threshold_km / city.cell_km + 1e-9;
  std::vector<Arc> arcs;
  for (std::size_t i = 0; i < eyeballs.size(); ++i) {
    for (std::size_t j = i + 1; j < eyeballs.size(); ++j) {
      if (eyeballs[j].t - eyeballs[i].t > time_threshold_min) break;
      const auto d = manhattan(eyeballs[i].px, eyeballs[i].py, eyeballs[j].px, eyeballs[j].py);
      if (static_cast<double>(d) <= max_cells) {
        arcs.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
      }
    }
  }
  return InterferenceGraph::from_arcs(eyeballs.size(), std::move(arcs), false);
}

Partition switchback_partition(std::span<const Eyeball> eyeballs, const CityConfig& city,
                               double duration_min) {
  if (!(duration_min > 0.0)) throw std::invalid_argument("switchback duration must be positive");
  std::vector<std::uint64_t> labels(eyeballs.size());
  const std::uint64_t zones = city.num_zones();
  for (std::size_t i = 0; i < eyeballs.size(); ++i) {
    const auto slot = static_cast<std::uint64_t>(std::floor(eyeballs[i].t / duration_min));
    labels[i] = slot * zones + city.zone_of(eyeballs[i].px, eyeballs[i].py);
  }
  return Partition::from_labels(labels);
}

double ground_truth_ate(const Simulator& sim) {
  const std::size_t n = sim.num_eyeballs();
  if (n == 0) return 0.0;
  const auto treated = sim.simulate(std::vector<Treatment>(n, 1));
  const auto control = sim.simulate(std::vector<Treatment>(n, 0));
  return (treated.total_reward - control.total_reward) / static_cast<double>(n);
}

double ground_truth_ate_rideshare(const CityConfig& city, const PricingPolicy& policy,
                                  std::uint64_t seed) {
  return ground_truth_ate(Simulator(city, policy, seed));
}

const TrialSummary* PricingExperiment::find(double duration, Estimator e) const {
  for (const auto& d : durations) {
    if (d.duration_min != duration) continue;
    for (const auto& s : d.summaries) {
      if (s.estimator == e) return &s;
    }
  }
  return nullptr;
}

PricingExperiment run_pricing_experiment(const CityConfig& city, const PricingPolicy& policy,
                                         std::span<const double> durations, double p,
                                         std::size_t trials, std::uint64_t seed,
                                         const ExperimentOptions& options) {
  if (durations.empty()) throw std::invalid_argument("need at least one switchback duration");
  const Simulator sim(city, policy, seed);
  PricingExperiment out;
  out.num_eyeballs = sim.num_eyeballs();
  out.ate = ground_truth_ate(sim);
  out.absolute = out.ate == 0.0;
  const auto graph = build_interference_graph(sim.eyeballs(), sim.city(),
                                              options.time_threshold_min, options.dist_threshold_km);
  out.graph_edges = graph.num_edges();
  const OutcomeFn outcomes = [&sim](std::span<const Treatment> z, std::uint64_t,
                                    std::span<double> y) { sim.simulate_into(z, y); };
  for (double duration : durations) {
    const Partition part = switchback_partition(sim.eyeballs(), sim.city(), duration);
    TrialPlan plan;
    plan.graph = &graph;
    plan.partition = &part;
    plan.estimators = resolve_estimators(options.estimators, DesignKind::kCluster);
    plan.p = p;
    plan.trials = trials;
    plan.seed = derive_seed(seed, "switchback");
    plan.parallel = options.parallel;
    DurationResult d;
    d.duration_min = duration;
    d.num_clusters = part.num_clusters();
    d.run = run_trials(plan, outcomes);
    d.summaries = summarize(d.run, out.ate, out.absolute);
    std::ostringstream id;
    id << "switchback_" << duration;
    for (auto& s : d.summaries) s.partition_id = id.str();
    out.durations.push_back(std::move(d));
  }
  return out;
}

RideshareConfig parse_rideshare_config(const Json& doc) {
  std::vector<ConfigIssue> issues;
  ConfigReader r(doc, "", issues);
  RideshareConfig c;
  c.run_id = r.string("run_id", c.run_id);
  if (c.run_id.empty() || c.run_id.find_first_of(",\n\"") != std::string::npos) {
    r.fail("run_id", "must be non-empty without commas, quotes or newlines");
  }
  {
    auto k = r.child("city");
    auto& city = c.city;
    city.width = static_cast<std::uint32_t>(k.integer("width", city.width));
    city.height = static_cast<std::uint32_t>(k.integer("height", city.height));
    city.cell_km = k.number("cell_km", city.cell_km);
    city.speed_km_per_min = k.number("speed_km_per_min", city.speed_km_per_min);
    city.fleet = k.integer("fleet", city.fleet);
    city.zones_x = static_cast<std::uint32_t>(k.integer("zones_x", city.zones_x));
    city.zones_y = static_cast<std::uint32_t>(k.integer("zones_y", city.zones_y));
    city.horizon_min = k.number("horizon_min", city.horizon_min);
    city.arrival_rate = k.number("arrival_rate", city.arrival_rate);
    city.trace_path = k.string("trace_path", "");
    if (city.width == 0) k.fail("width", "must be at least 1");
    if (city.height == 0) k.fail("height", "must be at least 1");
    if (!(city.cell_km > 0)) k.fail("cell_km", "must be positive");
    if (!(city.speed_km_per_min > 0)) k.fail("speed_km_per_min", "must be positive");
    if (city.zones_x == 0 || (city.width && city.width % city.zones_x != 0)) {
      k.fail("zones_x", "must divide the grid width");
    }
    if (city.zones_y == 0 || (city.height && city.height % city.zones_y != 0)) {
      k.fail("zones_y", "must divide the grid height");
    }
    if (!(city.horizon_min > 0)) k.fail("horizon_min", "must be positive");
    if (city.trace_path.empty() && !(city.arrival_rate > 0)) {
      k.fail("arrival_rate", "must be positive");
    }
    k.finish();
  }
  {
    auto k = r.child("policy");
    auto& pol = c.policy;
    pol.rate_per_min = k.number("rate_per_min", pol.rate_per_min);
    pol.price_increase = k.number("price_increase", pol.price_increase);
    pol.beta0 = k.number("beta0", pol.beta0);
    pol.beta_price = k.number("beta_price", pol.beta_price);
    pol.beta_eta = k.number("beta_eta", pol.beta_eta);
    if (!(pol.rate_per_min > 0)) k.fail("rate_per_min", "must be positive");
    if (!(pol.price_increase > -1)) k.fail("price_increase", "must exceed -1");
    if (!(pol.beta_price < 0)) k.fail("beta_price", "must be negative");
    if (!(pol.beta_eta < 0)) k.fail("beta_eta", "must be negative");
    k.finish();
  }
  if (r.has("durations")) {
    c.durations = r.numbers("durations");
    if (c.durations.empty()) r.fail("durations", "expected a non-empty array of minutes");
    for (std::size_t i = 0; i < c.durations.size(); ++i) {
      if (!(c.durations[i] > 0)) {
        issues.push_back({"/durations/" + std::to_string(i), "must be positive"});
      }
    }
  }
  if (r.has("estimators")) {
    r.touch("estimators");
    const auto& list = doc.at("estimators");
    if (!list.is_array() || list.empty()) {
      r.fail("estimators", "expected a non-empty array of estimator names");
    } else {
      c.options.estimators.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto e = list[i].is_string() ? parse_estimator(list[i].get<std::string>())
                                           : std::nullopt;
        if (!e) {
          issues.push_back({"/estimators/" + std::to_string(i), "unknown estimator"});
          continue;
        }
        c.options.estimators.push_back(*e);
      }
    }
  }
  c.options.time_threshold_min = r.number("time_threshold_min", c.options.time_threshold_min);
  c.options.dist_threshold_km = r.number("dist_threshold_km", c.options.dist_threshold_km);
  if (!(c.options.time_threshold_min >= 0)) r.fail("time_threshold_min", "must be non-negative");
  if (!(c.options.dist_threshold_km >= 0)) r.fail("dist_threshold_km", "must be non-negative");
  c.p = r.number("p", c.p);
  if (!(c.p > 0.0 && c.p < 1.0)) r.fail("p", "treatment probability must be in (0, 1)");
  c.trials = r.integer("trials", c.trials);
  if (c.trials == 0) r.fail("trials", "must be at least 1");
  c.seed = r.integer("seed", c.seed);
  c.options.parallel = r.integer("parallel", c.options.parallel);
  if (c.options.parallel == 0) r.fail("parallel", "must be at least 1");
  r.finish();
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

Json to_json(const RideshareConfig& c) {
  Json j;
  j["run_id"] = c.run_id;
  Json city;
  city["width"] = c.city.width;
  city["height"] = c.city.height;
  city["cell_km"] = c.city.cell_km;
  city["speed_km_per_min"] = c.city.speed_km_per_min;
  city["fleet"] = c.city.fleet;
  city["zones_x"] = c.city.zones_x;
  city["zones_y"] = c.city.zones_y;
  city["horizon_min"] = c.city.horizon_min;
  city["arrival_rate"] = c.city.arrival_rate;
  if (!c.city.trace_path.empty()) city["trace_path"] = c.city.trace_path;
  j["city"] = city;
  Json pol;
  pol["rate_per_min"] = c.policy.rate_per_min;
  pol["price_increase"] = c.policy.price_increase;
  pol["beta0"] = c.policy.beta0;
  pol["beta_price"] = c.policy.beta_price;
  pol["beta_eta"] = c.policy.beta_eta;
  j["policy"] = pol;
  j["durations"] = c.durations;
  Json est = Json::array();
  for (auto e : c.options.estimators) est.push_back(std::string(estimator_name(e)));
  j["estimators"] = est;
  j["time_threshold_min"] = c.options.time_threshold_min;
  j["dist_threshold_km"] = c.options.dist_threshold_km;
  j["p"] = c.p;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["parallel"] = c.options.parallel;
  return j;
}

}  // namespace dnest::rideshare
