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

// Exact computations on small instances by exhaustive enumeration.
//
// Moments are accumulated per fixed-size chunk of the assignment space with a
// weighted Welford update and merged in chunk order, so results do not depend
// on the number of worker threads.

#ifndef DNEST_ORACLE_HPP_
#define DNEST_ORACLE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnest/estimators.hpp"
#include "dnest/outcomes.hpp"
#include "dnest/partition.hpp"

namespace dnest {

inline constexpr std::size_t kMaxEnumerationUnits = 24;
inline constexpr std::size_t kMaxExactNeighborhood = 20;
inline constexpr double kCertificateSlack = 1e-9;

struct Enumeration {
  double mass = 0.0;  // total probability visited; 1 up to rounding
  double mean = 0.0;
  double variance = 0.0;
  std::uint64_t assignments = 0;
};

// Statistic of the randomized unit bits (nodes for unit designs, clusters for
// cluster designs). Must be callable concurrently when threads > 1.
using Statistic = std::function<double(std::span<const Treatment>)>;

Enumeration enumerate(std::size_t units, double p, const Statistic& statistic,
                      std::size_t threads = 1);

struct ExactMoments {
  double expectation = 0.0;
  double variance = 0.0;
  double ate = 0.0;
  double bias = 0.0;  // expectation - ate
  double mass = 0.0;
  std::uint64_t assignments = 0;
};

// Exact moments of an estimator under Bernoulli(p) unit randomization, or
// cluster randomization when `partition` is given. Noise is ignored.
ExactMoments enumerate_moments(const OutcomeModel& model, double p, Estimator estimator,
                               const Partition* partition = nullptr, std::size_t threads = 1);

// (1/N) sum_i (E[f_i | z_i = 1] - E[f_i | z_i = 0]) computed node by node over
// the closed neighborhood, independent of the full-space enumeration.
double dm_expectation_local(const OutcomeModel& model, double p);

// Second-order difference of f_i in coordinates j and k at z (z_i and all
// other coordinates held fixed).
double finite_difference(const OutcomeModel& model, NodeId i, NodeId j, NodeId k,
                         std::span<const Treatment> z);

enum class SmoothnessMode { kExact, kSampled };

struct Smoothness {
  double epsilon = 0.0;
  std::vector<double> per_node;  // max |Delta| at each node
  SmoothnessMode mode = SmoothnessMode::kExact;
  bool lower_bound = false;  // sampled mode only ever under-estimates
};

Smoothness smoothness(const OutcomeModel& model, SmoothnessMode mode = SmoothnessMode::kExact,
                      std::size_t sample_budget = 0, std::uint64_t seed = 0);

// max over i and z of |f_i(z)|, by scanning every closed-neighborhood corner.
double max_abs_outcome(const OutcomeModel& model);

struct Certificate {
  std::string check;
  std::string instance;  // human-readable descriptor
  double lhs = 0.0;
  double bound = 0.0;
  bool pass = false;
  std::string epsilon_source;  // "exact" | "analytic" | ""
  std::vector<std::pair<std::string, double>> extra;

  std::string to_json() const;
};

// |E[DN] - ATE| <= d^2 eps. Also reports the per-node refinement sum_i d_i^2 eps / N.
Certificate certify_dn_bias(const OutcomeModel& model, double p);
// |E[DN-Cluster] - ATE| <= (1/N) sum_i (d_i - d_i^C)^2 eps.
Certificate certify_dn_cluster_bias(const OutcomeModel& model, const Partition& partition,
                                    double p);
// Var[DN] <= (Y_max^2 / N)(8d^4 + qd^3 + 20d^3 + 7qd^2 - 20d^2 + q^2 d + 16d + q).
Certificate certify_dn_variance(const OutcomeModel& model, double p,
                                std::optional<double> y_max = std::nullopt);
// |E[HT] - ATE| <= slack.
Certificate certify_ht_unbiased(const OutcomeModel& model, double p);

double dn_variance_bound(std::size_t n, std::size_t d, double p, double y_max);

struct HessianCheck {
  double offdiag_poly = 0.0;  // |exact multilinear mixed partial - E[Delta_jk f]|
  double offdiag_fd = 0.0;    // |central four-point difference - E[Delta_jk f]|
  double max_diag = 0.0;      // max |d^2 F / dw_j^2|
};

// Max over j in N_i and a in {0,1} of |dF^a/dw_j (central difference) -
// (E[f^a | Z_j=1] - E[f^a | Z_j=0])| at w = p.
double taylor_gradient_check(const OutcomeModel& model, NodeId i, double p, double fd_step);
HessianCheck taylor_hessian_check(const OutcomeModel& model, NodeId i, double p,
                                  double fd_step = 1e-4);

}  // namespace dnest

#endif  // DNEST_ORACLE_HPP_
