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

// Point estimators of the global average treatment effect from one trial.
//
// Notation: eta_i = z_i/p - (1-z_i)/(1-p), xi_i = z_i(1-p)/p + (1-z_i)p/(1-p).
// All functions require p in (0, 1) and |z| = |Y| = N; they are pure and
// thread-safe.

#ifndef DNEST_ESTIMATORS_HPP_
#define DNEST_ESTIMATORS_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnest/design.hpp"
#include "dnest/graph.hpp"
#include "dnest/outcomes.hpp"
#include "dnest/partition.hpp"

namespace dnest {

inline double eta(Treatment z, double p) { return z ? 1.0 / p : -1.0 / (1.0 - p); }
inline double xi(Treatment z, double p) { return z ? (1.0 - p) / p : p / (1.0 - p); }

struct PropensityTerms {
  std::vector<double> eta;
  std::vector<double> xi;

  static PropensityTerms from(std::span<const Treatment> z, double p);
};

struct PropensityMoments {
  double mean_eta = 0.0;      // E[eta]
  double mean_abs_eta = 0.0;  // E[|eta|]
  double mean_xi = 0.0;       // E[xi]
  double mean_eta_sq = 0.0;   // E[eta^2]
  double mean_xi_sq = 0.0;    // E[xi^2]
};

// p * value(z=1) + (1-p) * value(z=0).
PropensityMoments two_point_moments(double p);

// Difference in means, inverse-propensity form.
double dm(std::span<const Treatment> z, std::span<const double> y, double p);
// mean(Y | z=1) - mean(Y | z=0); nullopt when an arm is empty.
std::optional<double> dm_ratio(std::span<const Treatment> z, std::span<const double> y);

struct HtDetail {
  double estimate = 0.0;
  std::size_t exposed = 0;  // nodes whose closed neighborhood is all-treated or all-control
};

// Horvitz-Thompson with exposure over the closed neighborhood {i} + N_i.
double ht(const InterferenceGraph& g, std::span<const Treatment> z, std::span<const double> y,
          double p);
HtDetail ht_detail(const InterferenceGraph& g, std::span<const Treatment> z,
                   std::span<const double> y, double p);

// Impact form: each treated/control unit is credited with its own outcome and
// the xi-weighted outcomes of the units it affects (out-neighbors).
double dn(const InterferenceGraph& g, std::span<const Treatment> z, std::span<const double> y,
          double p);
// Credit form: each outcome is weighted by its own eta plus xi_i times the
// etas of its in-neighbors. Equal to dn() up to rounding.
double dn_credit(const InterferenceGraph& g, std::span<const Treatment> z,
                 std::span<const double> y, double p);

double dn_cluster(const InterferenceGraph& g, const Partition& partition,
                  const TreatmentDraw& draw, std::span<const double> y, double p);
double dn_cluster(const ClusterNeighborhoods& hoods, std::span<const Treatment> cluster_z,
                  std::span<const double> y, double p);

double ht_cluster(const InterferenceGraph& g, const Partition& partition,
                  const TreatmentDraw& draw, std::span<const double> y, double p);
HtDetail ht_cluster_detail(const ClusterNeighborhoods& hoods, std::span<const Treatment> cluster_z,
                           std::span<const double> y, double p);

enum class Estimator { kDM, kDMRatio, kHT, kDN, kDNCredit, kDNCluster, kHTCluster };

std::string_view estimator_name(Estimator e);
std::optional<Estimator> parse_estimator(std::string_view name);
bool is_cluster_estimator(Estimator e);

enum EstimateFlag : std::uint32_t {
  kFlagUndefined = 1u << 0,    // e.g. dm_ratio with an empty arm
  kFlagNonFinite = 1u << 1,    // value overflowed / NaN; never reported silently
  kFlagHtUnexposed = 1u << 2,  // HT: no node had a uniform closed neighborhood
};

struct EstimateReport {
  Estimator estimator = Estimator::kDM;
  double estimate = 0.0;
  std::uint64_t trial = 0;
  std::uint32_t flags = 0;

  // Trials with undefined or non-finite values are dropped by summaries.
  bool usable() const { return (flags & (kFlagUndefined | kFlagNonFinite)) == 0; }
};

// "undefined|ht_unexposed" style; empty when no flags are set.
std::string flags_to_string(std::uint32_t flags);

// Everything an estimator may need for one trial.
struct TrialInputs {
  const InterferenceGraph* graph = nullptr;
  const ClusterNeighborhoods* clusters = nullptr;  // cluster estimators only
  std::span<const Treatment> z;
  std::span<const Treatment> cluster_z;  // cluster estimators only
  std::span<const double> y;
  double p = 0.5;
};

EstimateReport estimate(Estimator e, const TrialInputs& in, std::uint64_t trial = 0);

}  // namespace dnest

#endif  // DNEST_ESTIMATORS_HPP_
