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

// Potential-outcome models f_i(z) under neighborhood interference.
//
// Every model owns (shares) its interference graph and only reads z_i and
// z_j for j in the in-neighborhood of i. `evaluate` is the noiseless outcome;
// `observe` adds the optional Gaussian noise, drawn from a counter-based stream
// keyed by (seed, trial, node) so that it does not depend on evaluation order.

#ifndef DNEST_OUTCOMES_HPP_
#define DNEST_OUTCOMES_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dnest/graph.hpp"

namespace dnest {

using Treatment = std::uint8_t;
using GraphPtr = std::shared_ptr<const InterferenceGraph>;

// One weight per arc j -> i, stored at graph.in_offset(i) + (position of j in
// in_neighbors(i)).
using EdgeWeights = std::vector<double>;

EdgeWeights constant_edge_weights(const InterferenceGraph& graph, double value);
EdgeWeights uniform_edge_weights(const InterferenceGraph& graph, double lo, double hi,
                                 std::uint64_t seed);

class OutcomeModel {
 public:
  OutcomeModel(GraphPtr graph, double delta, double noise_std);
  virtual ~OutcomeModel() = default;

  const InterferenceGraph& graph() const { return *graph_; }
  const GraphPtr& graph_ptr() const { return graph_; }
  std::size_t num_nodes() const { return graph_->num_nodes(); }
  double delta() const { return delta_; }
  double noise_std() const { return noise_std_; }

  virtual std::string_view kind() const = 0;

  // Bound L on the mixed second derivatives of g_i (f_i(z) = g_i(delta z)),
  // when the model family gives one in closed form.
  virtual std::optional<double> smoothness_constant() const { return std::nullopt; }
  virtual std::optional<double> node_smoothness_constant(NodeId) const {
    return smoothness_constant();
  }

  virtual double evaluate(NodeId i, std::span<const Treatment> z) const = 0;
  virtual void evaluate_all(std::span<const Treatment> z, std::span<double> out) const;

  // Noisy observation Y = f(z) + noise for one trial.
  void observe(std::span<const Treatment> z, std::uint64_t noise_seed, std::uint64_t trial,
               std::span<double> out) const;

  // Whether f_i can depend on z_j at all. Defaults to the closed neighborhood;
  // models whose exposed neighborhood is a truncation override it.
  virtual bool may_depend_on(NodeId i, NodeId j) const;
  virtual bool neighborhood_exact() const { return true; }

 protected:
  void check_size(std::span<const Treatment> z) const;

 private:
  GraphPtr graph_;
  double delta_;
  double noise_std_;
};

using ModelPtr = std::shared_ptr<const OutcomeModel>;

// f_i(z) = alpha_i + beta z_i + delta * sum_j c_ij z_j
class LinearModel final : public OutcomeModel {
 public:
  LinearModel(GraphPtr graph, std::vector<double> alpha, double beta, EdgeWeights weights,
              double delta, double noise_std);
  std::string_view kind() const override { return "linear"; }
  std::optional<double> smoothness_constant() const override { return 0.0; }
  double evaluate(NodeId i, std::span<const Treatment> z) const override;

 private:
  std::vector<double> alpha_;
  double beta_;
  EdgeWeights weights_;
};

// f_i(z) = c0 * prod_j (1 + (delta / |N_i|) c_ij z_j)
class MultiplicativeModel final : public OutcomeModel {
 public:
  MultiplicativeModel(GraphPtr graph, double c0, EdgeWeights weights, double delta,
                      double noise_std);
  std::string_view kind() const override { return "multiplicative"; }
  std::optional<double> smoothness_constant() const override;
  std::optional<double> node_smoothness_constant(NodeId i) const override;
  double evaluate(NodeId i, std::span<const Treatment> z) const override;

 private:
  double c0_;
  EdgeWeights weights_;
};

struct LowOrderTerm {
  std::vector<NodeId> subset;  // distinct in-neighbors of the owning node
  double coefficient = 0.0;
};

// f_i(z) = c0_i + direct_i z_i + sum_S c_S prod_{j in S} (delta z_j)
//
// The direct term is an extension on top of the pure neighbor polynomial so
// that random instances also carry a treatment effect of their own.
class LowOrderModel final : public OutcomeModel {
 public:
  LowOrderModel(GraphPtr graph, std::vector<double> c0, std::vector<double> direct,
                std::vector<std::vector<LowOrderTerm>> terms, double delta, double noise_std);
  std::string_view kind() const override { return "low_order"; }
  std::optional<double> smoothness_constant() const override;
  std::optional<double> node_smoothness_constant(NodeId i) const override;
  double evaluate(NodeId i, std::span<const Treatment> z) const override;
  const std::vector<LowOrderTerm>& terms(NodeId i) const { return terms_[i]; }

 private:
  std::vector<double> c0_;
  std::vector<double> direct_;
  std::vector<std::vector<LowOrderTerm>> terms_;
  std::vector<double> node_l_;
};

struct LowOrderConfig {
  std::size_t max_order = 3;       // largest |S|
  std::size_t terms_per_node = 4;  // random subsets drawn per node (capped by availability)
  double coefficient_bound = 1.0;  // coefficients uniform in [-b, b]
  double baseline_lo = 0.0, baseline_hi = 1.0;
  double direct_lo = 0.5, direct_hi = 1.5;
  double delta = 0.5;
  double noise_std = 0.0;
};

std::shared_ptr<LowOrderModel> random_low_order_model(GraphPtr graph, const LowOrderConfig& config,
                                                      std::uint64_t seed);

// f_i(z) = c0 sum_{j in N_i + i} z_i z_j / |N_i| + c1 prod_{j in N_i + i} (1 + c2 z_j)
//
// The interference strength reported by delta() is c2. Isolated nodes use
// c0 z_i for the first term.
class BenchmarkModel final : public OutcomeModel {
 public:
  BenchmarkModel(GraphPtr graph, double c0, double c1, double c2, double noise_std);
  std::string_view kind() const override { return "benchmark"; }
  std::optional<double> smoothness_constant() const override;
  std::optional<double> node_smoothness_constant(NodeId i) const override;
  double evaluate(NodeId i, std::span<const Treatment> z) const override;

  double c0() const { return c0_; }
  double c1() const { return c1_; }
  double c2() const { return c2_; }

 private:
  double c0_, c1_, c2_;
};

struct MarkovChainSpec {
  std::size_t num_states = 0;
  std::vector<double> initial;                  // length S
  std::vector<std::vector<double>> transition;  // P, S x S row-stochastic
  std::vector<std::vector<double>> perturbation;  // D, rows sum to zero
  std::vector<double> reward_control;           // r_0
  std::vector<double> reward_treated;           // r_1
  double delta = 1.0;

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

// Nodes are time steps 0..n-1. f_t(z) = rho^T [prod_{s<t} (P + z_s delta D)] r_{z_t}.
// The exposed interference graph links s -> t for t - h <= s < t; outcomes are
// always computed exactly from the full history.
class MarkovianModel final : public OutcomeModel {
 public:
  MarkovianModel(MarkovChainSpec chain, std::size_t horizon, std::size_t truncation,
                 double noise_std);
  std::string_view kind() const override { return "markovian"; }
  double evaluate(NodeId i, std::span<const Treatment> z) const override;
  void evaluate_all(std::span<const Treatment> z, std::span<double> out) const override;
  bool may_depend_on(NodeId i, NodeId j) const override { return j <= i; }
  bool neighborhood_exact() const override { return truncation_ + 1 >= num_nodes(); }
  std::size_t truncation() const { return truncation_; }

 private:
  void step(std::vector<double>& row, Treatment z, std::vector<double>& scratch) const;

  MarkovChainSpec chain_;
  std::size_t truncation_;
  // Row-major S x S matrices for the two actions.
  std::vector<double> control_;
  std::vector<double> treated_;
};

std::shared_ptr<LinearModel> linear_model(GraphPtr graph, std::vector<double> alpha, double beta,
                                          EdgeWeights weights, double delta,
                                          double noise_std = 0.0);
std::shared_ptr<MultiplicativeModel> multiplicative_model(GraphPtr graph, double c0,
                                                          EdgeWeights weights, double delta,
                                                          double noise_std = 0.0);
std::shared_ptr<BenchmarkModel> benchmark_model(GraphPtr graph, double c0, double c1, double c2,
                                                double noise_std = 0.0);
std::shared_ptr<MarkovianModel> markovian_model(MarkovChainSpec chain, std::size_t horizon,
                                                std::size_t truncation, double noise_std = 0.0);

// (1/N) sum_i (f_i(1) - f_i(0)), noiseless.
double ground_truth_ate(const OutcomeModel& model);

struct NeighborhoodAudit {
  std::size_t checked = 0;
  std::size_t violations = 0;
  // True when the model's exposed neighborhood is a truncation and only
  // coordinates outside the true dependency range were flipped.
  bool approximate = false;
};

// Flips random coordinates that the model must not depend on and checks that
// evaluate(i, z) stays bit-identical.
NeighborhoodAudit audit_neighborhood(const OutcomeModel& model, std::size_t samples,
                                     std::uint64_t seed);

}  // namespace dnest

#endif  // DNEST_OUTCOMES_HPP_
