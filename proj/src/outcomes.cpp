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

#include "dnest/outcomes.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "dnest/rng.hpp"

namespace dnest {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

bool contains(std::span<const NodeId> sorted, NodeId j) {
  return std::binary_search(sorted.begin(), sorted.end(), j);
}

}  // namespace

EdgeWeights constant_edge_weights(const InterferenceGraph& graph, double value) {
  return EdgeWeights(graph.num_arcs(), value);
}

EdgeWeights uniform_edge_weights(const InterferenceGraph& graph, double lo, double hi,
                                 std::uint64_t seed) {
  require(lo <= hi, "uniform_edge_weights: lo > hi");
  auto engine = rng::make_engine(seed);
  EdgeWeights w(graph.num_arcs());
  for (auto& x : w) x = lo + (hi - lo) * rng::uniform01(engine);
  return w;
}

// --- OutcomeModel ------------------------------------------------------------

OutcomeModel::OutcomeModel(GraphPtr graph, double delta, double noise_std)
    : graph_(std::move(graph)), delta_(delta), noise_std_(noise_std) {
  require(graph_ != nullptr, "outcome model needs a graph");
  require(std::isfinite(delta_) && delta_ >= 0.0, "interference strength must be >= 0");
  require(std::isfinite(noise_std_) && noise_std_ >= 0.0, "noise std must be >= 0");
}

void OutcomeModel::check_size(std::span<const Treatment> z) const {
  if (z.size() != num_nodes()) {
    throw std::invalid_argument("treatment vector has length " + std::to_string(z.size()) +
                                ", expected " + std::to_string(num_nodes()));
  }
}

void OutcomeModel::evaluate_all(std::span<const Treatment> z, std::span<double> out) const {
  check_size(z);
  if (out.size() != num_nodes()) throw std::invalid_argument("output span has wrong length");
  for (NodeId i = 0; i < num_nodes(); ++i) out[i] = evaluate(i, z);
}

void OutcomeModel::observe(std::span<const Treatment> z, std::uint64_t noise_seed,
                           std::uint64_t trial, std::span<double> out) const {
  evaluate_all(z, out);
  if (noise_std_ == 0.0) return;
  const rng::CounterStream noise(noise_seed, rng::Stream::kNoise, trial);
  for (NodeId i = 0; i < out.size(); ++i) out[i] += noise_std_ * noise.normal(i);
}

bool OutcomeModel::may_depend_on(NodeId i, NodeId j) const {
  return i == j || contains(graph_->in_neighbors(i), j);
}

// --- Linear --------------------------------------------------------------------

LinearModel::LinearModel(GraphPtr graph, std::vector<double> alpha, double beta,
                         EdgeWeights weights, double delta, double noise_std)
    : OutcomeModel(std::move(graph), delta, noise_std),
      alpha_(std::move(alpha)),
      beta_(beta),
      weights_(std::move(weights)) {
  require(alpha_.size() == num_nodes(), "linear model: need one alpha per node");
  require(weights_.size() == this->graph().num_arcs(),
          "linear model: need one weight per edge (missing edge weight)");
}

double LinearModel::evaluate(NodeId i, std::span<const Treatment> z) const {
  const auto nb = graph().in_neighbors(i);
  const double* w = weights_.data() + graph().in_offset(i);
  double s = 0.0;
  for (std::size_t k = 0; k < nb.size(); ++k) s += w[k] * z[nb[k]];
  return alpha_[i] + beta_ * z[i] + delta() * s;
}

// --- Multiplicative -------------------------------------------------------------

MultiplicativeModel::MultiplicativeModel(GraphPtr graph, double c0, EdgeWeights weights,
                                         double delta, double noise_std)
    : OutcomeModel(std::move(graph), delta, noise_std), c0_(c0), weights_(std::move(weights)) {
  require(weights_.size() == this->graph().num_arcs(),
          "multiplicative model: need one weight per edge");
}

double MultiplicativeModel::evaluate(NodeId i, std::span<const Treatment> z) const {
  const auto nb = graph().in_neighbors(i);
  if (nb.empty()) return c0_;
  const double* w = weights_.data() + graph().in_offset(i);
  const double scale = delta() / static_cast<double>(nb.size());
  double f = c0_;
  for (std::size_t k = 0; k < nb.size(); ++k) {
    if (z[nb[k]]) f *= 1.0 + scale * w[k];
  }
  return f;
}

std::optional<double> MultiplicativeModel::node_smoothness_constant(NodeId i) const {
  const auto nb = graph().in_neighbors(i);
  if (nb.size() < 2) return 0.0;
  const double* w = weights_.data() + graph().in_offset(i);
  // Largest product of two distinct |c|'s: the top two magnitudes.
  double a = 0.0, b = 0.0, cmax = 0.0;
  for (std::size_t k = 0; k < nb.size(); ++k) {
    const double m = std::abs(w[k]);
    cmax = std::max(cmax, m);
    if (m > a) {
      b = a;
      a = m;
    } else if (m > b) {
      b = m;
    }
  }
  const double d = static_cast<double>(nb.size());
  return std::abs(c0_) * a * b / (d * d) *
         std::pow(1.0 + delta() * cmax / d, static_cast<double>(nb.size() - 2));
}

std::optional<double> MultiplicativeModel::smoothness_constant() const {
  double l = 0.0;
  for (NodeId i = 0; i < num_nodes(); ++i) l = std::max(l, *node_smoothness_constant(i));
  return l;
}

// --- Low order -----------------------------------------------------------------

LowOrderModel::LowOrderModel(GraphPtr graph, std::vector<double> c0, std::vector<double> direct,
                             std::vector<std::vector<LowOrderTerm>> terms, double delta,
                             double noise_std)
    : OutcomeModel(std::move(graph), delta, noise_std),
      c0_(std::move(c0)),
      direct_(std::move(direct)),
      terms_(std::move(terms)) {
  const std::size_t n = num_nodes();
  require(c0_.size() == n, "low-order model: need one baseline per node");
  require(direct_.size() == n, "low-order model: need one direct effect per node");
  require(terms_.size() == n, "low-order model: need one term list per node");
  node_l_.assign(n, 0.0);
  for (NodeId i = 0; i < n; ++i) {
    const auto nb = this->graph().in_neighbors(i);
    for (auto& t : terms_[i]) {
      std::sort(t.subset.begin(), t.subset.end());
      require(!t.subset.empty(), "low-order model: empty subset at node " + std::to_string(i));
      require(std::adjacent_find(t.subset.begin(), t.subset.end()) == t.subset.end(),
              "low-order model: repeated node in subset at node " + std::to_string(i));
      for (NodeId j : t.subset) {
        require(contains(nb, j), "low-order model: subset of node " + std::to_string(i) +
                                     " is not contained in its neighborhood (node " +
                                     std::to_string(j) + ")");
      }
      if (t.subset.size() >= 2) {
        node_l_[i] += std::pow(this->delta(), static_cast<double>(t.subset.size() - 2)) *
                      std::abs(t.coefficient);
      }
    }
  }
}

double LowOrderModel::evaluate(NodeId i, std::span<const Treatment> z) const {
  double f = c0_[i] + direct_[i] * z[i];
  const double d = delta();
  for (const auto& t : terms_[i]) {
    double prod = t.coefficient;
    for (NodeId j : t.subset) {
      if (!z[j]) {
        prod = 0.0;
        break;
      }
      prod *= d;
    }
    f += prod;
  }
  return f;
}

std::optional<double> LowOrderModel::node_smoothness_constant(NodeId i) const {
  return node_l_[i];
}

std::optional<double> LowOrderModel::smoothness_constant() const {
  return node_l_.empty() ? 0.0 : *std::max_element(node_l_.begin(), node_l_.end());
}

std::shared_ptr<LowOrderModel> random_low_order_model(GraphPtr graph, const LowOrderConfig& config,
                                                      std::uint64_t seed) {
  require(graph != nullptr, "random_low_order_model: null graph");
  require(config.max_order >= 1, "random_low_order_model: max_order must be >= 1");
  require(config.baseline_lo <= config.baseline_hi && config.direct_lo <= config.direct_hi,
          "random_low_order_model: empty range");
  auto engine = rng::make_engine(seed);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng::uniform01(engine); };

  const std::size_t n = graph->num_nodes();
  std::vector<double> c0(n), direct(n);
  std::vector<std::vector<LowOrderTerm>> terms(n);
  std::vector<NodeId> pool;
  for (NodeId i = 0; i < n; ++i) {
    c0[i] = uni(config.baseline_lo, config.baseline_hi);
    direct[i] = uni(config.direct_lo, config.direct_hi);
    const auto nb = graph->in_neighbors(i);
    if (nb.empty()) continue;
    const std::size_t top = std::min(config.max_order, nb.size());
    for (std::size_t t = 0; t < config.terms_per_node; ++t) {
      const std::size_t size = 1 + rng::bounded(engine, top);
      pool.assign(nb.begin(), nb.end());
      // Partial Fisher-Yates: the first `size` entries become a uniform subset.
      for (std::size_t k = 0; k < size; ++k) {
        const auto r = k + rng::bounded(engine, pool.size() - k);
        std::swap(pool[k], pool[r]);
      }
      LowOrderTerm term;
      term.subset.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(size));
      term.coefficient = uni(-config.coefficient_bound, config.coefficient_bound);
      terms[i].push_back(std::move(term));
    }
  }
  return std::make_shared<LowOrderModel>(std::move(graph), std::move(c0), std::move(direct),
                                         std::move(terms), config.delta, config.noise_std);
}

// --- Benchmark -------------------------------------------------------------------

BenchmarkModel::BenchmarkModel(GraphPtr graph, double c0, double c1, double c2, double noise_std)
    : OutcomeModel(std::move(graph), c2, noise_std), c0_(c0), c1_(c1), c2_(c2) {}

double BenchmarkModel::evaluate(NodeId i, std::span<const Treatment> z) const {
  const auto nb = graph().in_neighbors(i);
  std::size_t treated = 0;
  for (NodeId j : nb) treated += z[j];
  double first = 0.0;
  if (z[i]) {
    first = nb.empty() ? c0_
                       : c0_ * static_cast<double>(1 + treated) / static_cast<double>(nb.size());
  }
  const double prod = std::pow(1.0 + c2_, static_cast<double>(treated + z[i]));
  return first + c1_ * prod;
}

// Mixed partials of c1 prod (1 + x_l) over the closed neighborhood, x in
// [0, c2]^{N_i + i}, are bounded by |c1| (1 + c2)^{|N_i| - 1}.
std::optional<double> BenchmarkModel::node_smoothness_constant(NodeId i) const {
  const auto d = graph().degree(i);
  if (d < 2) return 0.0;
  return std::abs(c1_) * std::pow(1.0 + c2_, static_cast<double>(d - 1));
}

std::optional<double> BenchmarkModel::smoothness_constant() const {
  const auto d = graph().max_degree();
  if (d < 2) return 0.0;
  return std::abs(c1_) * std::pow(1.0 + c2_, static_cast<double>(d - 1));
}

// --- Markovian -------------------------------------------------------------------

void MarkovChainSpec::validate() const {
  constexpr double kTol = 1e-12;
  const std::size_t s = num_states;
  require(s >= 1, "markov chain: num_states must be >= 1");
  require(initial.size() == s, "markov chain: initial distribution has wrong length");
  require(transition.size() == s && perturbation.size() == s,
          "markov chain: transition/perturbation must be S x S");
  require(reward_control.size() == s && reward_treated.size() == s,
          "markov chain: reward vectors must have length S");
  require(std::isfinite(delta) && delta >= 0.0, "markov chain: delta must be >= 0");

  double mass = 0.0;
  for (double x : initial) {
    require(x >= 0.0, "markov chain: initial distribution has a negative entry");
    mass += x;
  }
  require(std::abs(mass - 1.0) <= kTol, "markov chain: initial distribution does not sum to 1");

  for (std::size_t a = 0; a < s; ++a) {
    const auto row = "row " + std::to_string(a);
    require(transition[a].size() == s && perturbation[a].size() == s,
            "markov chain: " + row + " has wrong length");
    double ps = 0.0, ds = 0.0, qs = 0.0;
    for (std::size_t b = 0; b < s; ++b) {
      const double p = transition[a][b];
      const double q = p + delta * perturbation[a][b];
      require(p >= 0.0, "markov chain: P has a negative entry in " + row);
      require(q >= -kTol, "markov chain: P + delta*D has a negative entry in " + row);
      ps += p;
      ds += perturbation[a][b];
      qs += q;
    }
    require(std::abs(ps - 1.0) <= kTol, "markov chain: P " + row + " does not sum to 1");
    require(std::abs(ds) <= kTol, "markov chain: D " + row + " does not sum to 0");
    require(std::abs(qs - 1.0) <= kTol,
            "markov chain: P + delta*D " + row + " does not sum to 1 (non-stochastic)");
  }
}

namespace {

GraphPtr markov_window_graph(std::size_t horizon, std::size_t truncation) {
  require(horizon >= 1, "markovian model: horizon must be >= 1");
  require(truncation <= horizon, "markovian model: truncation must be <= horizon");
  std::vector<Arc> arcs;
  for (std::size_t t = 1; t < horizon; ++t) {
    const std::size_t lo = t > truncation ? t - truncation : 0;
    for (std::size_t s = lo; s < t; ++s) {
      arcs.emplace_back(static_cast<NodeId>(s), static_cast<NodeId>(t));
    }
  }
  return std::make_shared<const InterferenceGraph>(
      InterferenceGraph::from_arcs(horizon, std::move(arcs), /*directed=*/true));
}

}  // namespace

MarkovianModel::MarkovianModel(MarkovChainSpec chain, std::size_t horizon,
                               std::size_t truncation, double noise_std)
    : OutcomeModel(markov_window_graph(horizon, truncation), chain.delta, noise_std),
      chain_(std::move(chain)),
      truncation_(truncation) {
  chain_.validate();
  const std::size_t s = chain_.num_states;
  control_.resize(s * s);
  treated_.resize(s * s);
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = 0; b < s; ++b) {
      control_[a * s + b] = chain_.transition[a][b];
      treated_[a * s + b] = chain_.transition[a][b] + chain_.delta * chain_.perturbation[a][b];
    }
  }
}

void MarkovianModel::step(std::vector<double>& row, Treatment z,
                          std::vector<double>& scratch) const {
  const std::size_t s = chain_.num_states;
  const auto& m = z ? treated_ : control_;
  scratch.assign(s, 0.0);
  for (std::size_t a = 0; a < s; ++a) {
    const double ra = row[a];
    if (ra == 0.0) continue;
    for (std::size_t b = 0; b < s; ++b) scratch[b] += ra * m[a * s + b];
  }
  row.swap(scratch);
}

double MarkovianModel::evaluate(NodeId i, std::span<const Treatment> z) const {
  std::vector<double> row = chain_.initial, scratch;
  for (NodeId s = 0; s < i; ++s) step(row, z[s], scratch);
  const auto& r = z[i] ? chain_.reward_treated : chain_.reward_control;
  return std::inner_product(row.begin(), row.end(), r.begin(), 0.0);
}

void MarkovianModel::evaluate_all(std::span<const Treatment> z, std::span<double> out) const {
  check_size(z);
  if (out.size() != num_nodes()) throw std::invalid_argument("output span has wrong length");
  std::vector<double> row = chain_.initial, scratch;
  for (NodeId t = 0; t < num_nodes(); ++t) {
    if (t > 0) step(row, z[t - 1], scratch);
    const auto& r = z[t] ? chain_.reward_treated : chain_.reward_control;
    out[t] = std::inner_product(row.begin(), row.end(), r.begin(), 0.0);
  }
}

// --- Factories and utilities ------------------------------------------------------

std::shared_ptr<LinearModel> linear_model(GraphPtr graph, std::vector<double> alpha, double beta,
                                          EdgeWeights weights, double delta, double noise_std) {
  return std::make_shared<LinearModel>(std::move(graph), std::move(alpha), beta,
                                       std::move(weights), delta, noise_std);
}

std::shared_ptr<MultiplicativeModel> multiplicative_model(GraphPtr graph, double c0,
                                                          EdgeWeights weights, double delta,
                                                          double noise_std) {
  return std::make_shared<MultiplicativeModel>(std::move(graph), c0, std::move(weights), delta,
                                               noise_std);
}

std::shared_ptr<BenchmarkModel> benchmark_model(GraphPtr graph, double c0, double c1, double c2,
                                                double noise_std) {
  return std::make_shared<BenchmarkModel>(std::move(graph), c0, c1, c2, noise_std);
}

std::shared_ptr<MarkovianModel> markovian_model(MarkovChainSpec chain, std::size_t horizon,
                                                std::size_t truncation, double noise_std) {
  return std::make_shared<MarkovianModel>(std::move(chain), horizon, truncation, noise_std);
}

double ground_truth_ate(const OutcomeModel& model) {
  const std::size_t n = model.num_nodes();
  if (n == 0) throw std::invalid_argument("ground_truth_ate: empty model");
  std::vector<Treatment> ones(n, 1), zeros(n, 0);
  std::vector<double> y1(n), y0(n);
  model.evaluate_all(ones, y1);
  model.evaluate_all(zeros, y0);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += y1[i] - y0[i];
  return s / static_cast<double>(n);
}

NeighborhoodAudit audit_neighborhood(const OutcomeModel& model, std::size_t samples,
                                     std::uint64_t seed) {
  NeighborhoodAudit audit;
  audit.approximate = !model.neighborhood_exact();
  const std::size_t n = model.num_nodes();
  if (n < 2) return audit;
  auto engine = rng::make_engine(seed);
  std::vector<Treatment> z(n);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto i = static_cast<NodeId>(rng::bounded(engine, n));
    // A handful of tries to find a coordinate the outcome must ignore; dense
    // neighborhoods may have none.
    NodeId j = 0;
    bool found = false;
    for (int attempt = 0; attempt < 64 && !found; ++attempt) {
      j = static_cast<NodeId>(rng::bounded(engine, n));
      found = !model.may_depend_on(i, j);
    }
    if (!found) continue;
    for (auto& b : z) b = static_cast<Treatment>(engine() >> 63);
    const double before = model.evaluate(i, z);
    z[j] ^= 1;
    const double after = model.evaluate(i, z);
    ++audit.checked;
    if (std::bit_cast<std::uint64_t>(before) != std::bit_cast<std::uint64_t>(after)) {
      ++audit.violations;
    }
  }
  return audit;
}

}  // namespace dnest
