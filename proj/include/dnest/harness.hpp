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

// Monte Carlo runner: repeated randomized trials, error metrics, cluster-size
// sweeps and exact-vs-theory bound tables.

#ifndef DNEST_HARNESS_HPP_
#define DNEST_HARNESS_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dnest/config.hpp"
#include "dnest/design.hpp"
#include "dnest/estimators.hpp"
#include "dnest/outcomes.hpp"
#include "dnest/partition.hpp"

namespace dnest {

// Everything a config describes, materialized for one replicate.
struct Instance {
  GraphPtr graph;
  std::vector<std::uint64_t> original_ids;  // edge-list graphs only
  ModelPtr model;
  std::optional<Partition> partition;  // cluster design
  double ate = 0.0;                    // config override or exact ground truth
  std::uint64_t seed = 0;              // replicate master seed
  std::uint64_t trial_seed = 0;        // seeds treatment and noise streams
};

GraphPtr build_graph(const GraphSpec& spec, std::uint64_t master_seed,
                     std::vector<std::uint64_t>* original_ids = nullptr);
ModelPtr build_model(const ModelSpec& spec, GraphPtr graph, std::uint64_t master_seed);
Partition build_partition(const PartitionSpec& spec, const InterferenceGraph& graph,
                          std::uint64_t master_seed,
                          std::span<const std::uint64_t> original_ids = {});
Instance build_instance(const ExperimentConfig& config, std::size_t replicate = 0);

// Under a cluster design the unit-level DN/HT estimators are replaced by
// their cluster forms; others pass through.
std::vector<Estimator> resolve_estimators(std::span<const Estimator> requested, DesignKind design);

// Writes outcomes for assignment z in trial t into y. Must be safe to call
// concurrently from several threads.
using OutcomeFn =
    std::function<void(std::span<const Treatment> z, std::uint64_t trial, std::span<double> y)>;

struct TrialPlan {
  const InterferenceGraph* graph = nullptr;
  const Partition* partition = nullptr;  // null: unit Bernoulli design
  std::vector<Estimator> estimators;     // already resolved
  double p = 0.5;
  std::size_t trials = 1;
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
};

struct TrialRun {
  std::vector<Estimator> estimators;
  std::size_t trials = 0;
  // Trial-major: reports[t * estimators.size() + e].
  std::vector<EstimateReport> reports;
};

// Trial t draws treatments from (seed, t) alone, so results do not depend on
// the parallel width or scheduling; all estimators share each trial's draw.
TrialRun run_trials(const TrialPlan& plan, const OutcomeFn& outcomes);
// Model outcomes with noise drawn from (instance.trial_seed, t).
TrialRun run_trials(const Instance& instance, const ExperimentConfig& config,
                    const Partition* partition_override = nullptr);

struct TrialSummary {
  Estimator estimator = Estimator::kDM;
  std::string partition_id;
  std::size_t trials = 0;   // usable trials K
  std::size_t dropped = 0;  // undefined / non-finite
  double ate = 0.0;
  bool absolute = false;
  double mean_estimate = 0.0;
  double mean_rel_err = 0.0;  // or mean absolute error in absolute mode
  double ci_lo = 0.0, ci_hi = 0.0;
  double rmse = 0.0;
  double bias = 0.0;
  double variance = 0.0;  // sample variance, K - 1 denominator
  // |RMSE^2 - (bias^2 + variance (K-1)/K)| / max(RMSE^2, tiny)
  double identity_residual = 0.0;
  std::size_t ht_unexposed = 0;  // trials with no exposed node (HT only)

  bool identity_holds(double tol = 1e-9) const { return identity_residual <= tol; }
};

// Summary over raw estimates against a fixed ATE. Throws std::invalid_argument
// when ATE = 0 and absolute mode is off.
TrialSummary summarize(std::span<const double> estimates, double true_ate, bool absolute = false);
TrialSummary summarize(const TrialRun& run, Estimator estimator, double true_ate,
                       bool absolute = false);
std::vector<TrialSummary> summarize(const TrialRun& run, double true_ate, bool absolute = false);

// Several runs (e.g. independent graphs), each against its own ATE.
struct RunWithTruth {
  const TrialRun* run = nullptr;
  double ate = 0.0;
};
TrialSummary summarize_pooled(std::span<const RunWithTruth> runs, Estimator estimator,
                              bool absolute = false);

struct SweepRow {
  std::string partition_id;
  std::size_t num_clusters = 0;
  TrialSummary summary;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  // Per estimator: partition id with the smallest RMSE (first on ties).
  std::vector<std::pair<Estimator, std::string>> argmin;
  std::vector<std::pair<std::string, TrialRun>> runs;

  const SweepRow* best(Estimator e) const;
};

// Each partition spec runs as a cluster design on the same instance and seed.
SweepResult sweep_clusters(const Instance& instance, const ExperimentConfig& config,
                           std::span<const PartitionSpec> partitions);

struct BoundRow {
  Estimator estimator = Estimator::kDM;
  double exact_bias = 0.0;      // E[estimator] - ATE
  double exact_variance = 0.0;
  double bias_bound = 0.0;
  double variance_bound = 0.0;
  std::string bias_form;      // expression the bound instantiates
  std::string variance_form;
  bool bias_explicit = false;      // explicit constant: the bound is checked
  bool variance_explicit = false;  // otherwise only the rate is reported
  bool holds = true;
};

// Exact moments of DM/DN/HT (or their cluster forms) beside the theoretical
// bias and variance expressions instantiated for this instance.
std::vector<BoundRow> compare_bounds(const Instance& instance, double p);

// CSV writers; doubles are written with 17 significant digits. `extra` adds
// trailing constant columns (name, value) such as a sweep partition id.
using CsvExtra = std::vector<std::pair<std::string, std::string>>;
void write_trials_header(std::ostream& out, const CsvExtra& extra = {});
void write_trials_csv(std::ostream& out, const std::string& run_id, const TrialRun& run,
                      const CsvExtra& extra = {});
void write_summary_header(std::ostream& out, const CsvExtra& extra = {});
void write_summary_csv(std::ostream& out, const std::string& run_id,
                       std::span<const TrialSummary> rows, const CsvExtra& extra = {});
void write_bounds_csv(std::ostream& out, const std::string& run_id,
                      std::span<const BoundRow> rows);
std::string format_g17(double v);

}  // namespace dnest

#endif  // DNEST_HARNESS_HPP_
