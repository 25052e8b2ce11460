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

// Grid-city ride-hailing simulator for switchback pricing experiments.
//
// Riders ("eyeballs") arrive over time with a pickup and a dropoff cell. Each
// one is quoted a price and the ETA of the nearest free car, and accepts with
// logistic probability. An accepted trip occupies its car until dropoff, so a
// rider's decision changes the supply seen by later nearby riders: that is the
// interference the estimators must cope with.

#ifndef DNEST_RIDESHARE_HPP_
#define DNEST_RIDESHARE_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dnest/config.hpp"
#include "dnest/graph.hpp"
#include "dnest/harness.hpp"
#include "dnest/outcomes.hpp"
#include "dnest/partition.hpp"

namespace dnest::rideshare {

struct Eyeball {
  std::uint32_t index = 0;
  double t = 0.0;  // request time, minutes
  std::uint32_t px = 0, py = 0;  // pickup cell
  std::uint32_t dx = 0, dy = 0;  // dropoff cell
};

struct CityConfig {
  std::uint32_t width = 60, height = 60;  // cells
  double cell_km = 0.1;
  double speed_km_per_min = 0.5;
  std::size_t fleet = 100;
  std::uint32_t zones_x = 3, zones_y = 3;  // rectangular zone tiling
  double horizon_min = 1440.0;
  double arrival_rate = 15.0;  // eyeballs per minute (Poisson)
  std::string trace_path;      // optional CSV trace replacing the Poisson source

  // Throws std::invalid_argument naming the first violated invariant.
  void validate() const;
  std::uint32_t num_zones() const { return zones_x * zones_y; }
  std::uint32_t zone_of(std::uint32_t x, std::uint32_t y) const;
  double travel_min(std::uint32_t x0, std::uint32_t y0, std::uint32_t x1, std::uint32_t y1) const;
};

struct PricingPolicy {
  double rate_per_min = 1.0;
  // Treated riders pay rate * (1 + price_increase) per minute of trip.
  double price_increase = 0.2;
  double beta0 = 1.605;
  double beta_price = -0.15;
  double beta_eta = -0.1;

  void validate() const;
  double price(double trip_min, Treatment z) const;
  double accept_probability(double price, double eta_min) const;
};

// Poisson arrivals with uniform pickup/dropoff cells, or the trace file when
// the config names one. Sorted by request time.
std::vector<Eyeball> generate_eyeballs(const CityConfig& city, std::uint64_t seed);
// CSV with header t_min,px,py,dx,dy.
std::vector<Eyeball> load_trace(const std::string& path, const CityConfig& city);
std::vector<Eyeball> parse_trace(std::string_view text, const CityConfig& city);
void write_trace(std::ostream& out, std::span<const Eyeball> eyeballs);

struct Trip {
  std::uint32_t eyeball = 0;
  std::uint32_t car = 0;
  double start = 0.0;  // dispatch time
  double end = 0.0;    // dropoff completion
};

struct SimulationResult {
  std::vector<double> y;  // reward per eyeball: price if accepted, else 0
  std::size_t accepted = 0;
  double total_reward = 0.0;
  std::vector<Trip> trips;
};

// A city instance: fixed eyeballs and starting fleet for one seed. The
// acceptance coins are drawn per eyeball from the same seed, so changing the
// assignment changes only what the assignment touches (common random numbers).
class Simulator {
 public:
  Simulator(CityConfig city, PricingPolicy policy, std::uint64_t seed);
  Simulator(CityConfig city, PricingPolicy policy, std::vector<Eyeball> eyeballs,
            std::uint64_t seed);

  const CityConfig& city() const { return city_; }
  const PricingPolicy& policy() const { return policy_; }
  const std::vector<Eyeball>& eyeballs() const { return eyeballs_; }
  std::size_t num_eyeballs() const { return eyeballs_.size(); }

  SimulationResult simulate(std::span<const Treatment> assignment, bool record_trips = false) const;
  void simulate_into(std::span<const Treatment> assignment, std::span<double> y) const;

 private:
  CityConfig city_;
  PricingPolicy policy_;
  std::vector<Eyeball> eyeballs_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> start_positions_;
  std::vector<double> coins_;
};

// Every car serves at most one trip at a time and trips are time-ordered.
bool occupancy_audit(const SimulationResult& result, std::size_t fleet);

InterferenceGraph build_interference_graph(std::span<const Eyeball> eyeballs,
                                           const CityConfig& city, double time_threshold_min,
                                           double dist_threshold_km);
Partition switchback_partition(std::span<const Eyeball> eyeballs, const CityConfig& city,
                               double duration_min);

// Mean per-eyeball reward difference between the all-treated and all-control
// runs, both on the same seed.
double ground_truth_ate(const Simulator& sim);
double ground_truth_ate_rideshare(const CityConfig& city, const PricingPolicy& policy,
                                  std::uint64_t seed);

struct ExperimentOptions {
  std::vector<Estimator> estimators{Estimator::kDMRatio, Estimator::kDM, Estimator::kDNCluster};
  double time_threshold_min = 10.0;
  double dist_threshold_km = 2.0;
  std::size_t parallel = 1;
};

struct DurationResult {
  double duration_min = 0.0;
  std::size_t num_clusters = 0;
  std::vector<TrialSummary> summaries;
  TrialRun run;
};

struct PricingExperiment {
  double ate = 0.0;
  bool absolute = false;  // set when the paired ATE is exactly 0
  std::size_t num_eyeballs = 0;
  std::size_t graph_edges = 0;
  std::vector<DurationResult> durations;

  const TrialSummary* find(double duration, Estimator e) const;
};

PricingExperiment run_pricing_experiment(const CityConfig& city, const PricingPolicy& policy,
                                         std::span<const double> durations, double p,
                                         std::size_t trials, std::uint64_t seed,
                                         const ExperimentOptions& options = {});

struct RideshareConfig {
  std::string run_id = "rideshare";
  CityConfig city;
  PricingPolicy policy;
  std::vector<double> durations{2, 5, 15, 30, 60};
  ExperimentOptions options;
  double p = 0.5;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
};

RideshareConfig parse_rideshare_config(const Json& doc);  // throws ConfigError
Json to_json(const RideshareConfig& config);

}  // namespace dnest::rideshare

#endif  // DNEST_RIDESHARE_HPP_
