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

#include "dnest/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "dnest/oracle.hpp"

namespace dnest {

namespace {

constexpr double kZ95 = 1.96;

double nan() { return std::numeric_limits<double>::quiet_NaN(); }

std::uint64_t replicate_seed(std::uint64_t master, std::size_t replicate) {
  return replicate == 0 ? master : derive_seed(master, "replicate", replicate);
}

EdgeWeights weights_for(const ModelSpec& spec, const InterferenceGraph& g, std::uint64_t seed) {
  if (spec.weight_lo == spec.weight_hi) return constant_edge_weights(g, spec.weight_lo);
  return uniform_edge_weights(g, spec.weight_lo, spec.weight_hi, seed);
}

// Shared core: errors e_k = est_k - ate_k.
TrialSummary summarize_errors(std::span<const double> est, std::span<const double> ates,
                              bool absolute) {
  TrialSummary s;
  s.absolute = absolute;
  const std::size_t k = est.size();
  s.trials = k;
  if (!absolute) {
    for (double a : ates) {
      if (a == 0.0) {
        throw std::invalid_argument(
            "relative error needs a non-zero ATE; use absolute mode when the ATE is 0");
      }
    }
  }
  if (k == 0) {
    s.mean_estimate = s.mean_rel_err = s.ci_lo = s.ci_hi = nan();
    s.rmse = s.bias = s.variance = nan();
    return s;
  }
  const double kd = static_cast<double>(k);
  double sum_est = 0.0, sum_e = 0.0, sum_e2 = 0.0, sum_r = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = est[i] - ates[i];
    sum_est += est[i];
    sum_e += e;
    sum_e2 += e * e;
    sum_r += absolute ? e : e / ates[i];
  }
  s.mean_estimate = sum_est / kd;
  s.bias = sum_e / kd;
  s.rmse = std::sqrt(sum_e2 / kd);
  s.mean_rel_err = sum_r / kd;
  double ss_e = 0.0, ss_r = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = est[i] - ates[i];
    const double r = absolute ? e : e / ates[i];
    ss_e += (e - s.bias) * (e - s.bias);
    ss_r += (r - s.mean_rel_err) * (r - s.mean_rel_err);
  }
  s.variance = k > 1 ? ss_e / (kd - 1.0) : 0.0;
  const double half = k > 1 ? kZ95 * std::sqrt(ss_r / (kd - 1.0)) / std::sqrt(kd) : 0.0;
  s.ci_lo = s.mean_rel_err - half;
  s.ci_hi = s.mean_rel_err + half;
  const double lhs = s.rmse * s.rmse;
  const double rhs = s.bias * s.bias + s.variance * (kd - 1.0) / kd;
  s.identity_residual = std::abs(lhs - rhs) / std::max({lhs, rhs, DBL_MIN});
  if (lhs == 0.0 && rhs == 0.0) s.identity_residual = 0.0;
  if (k == 1) s.ate = ates[0];
  return s;
}

struct Gathered {
  std::vector<double> est, ate;
  std::size_t dropped = 0, unexposed = 0;
};

void gather(const TrialRun& run, Estimator e, double ate, Gathered& g) {
  const auto it = std::find(run.estimators.begin(), run.estimators.end(), e);
  if (it == run.estimators.end()) {
    throw std::invalid_argument("run has no estimator " + std::string(estimator_name(e)));
  }
  const std::size_t col = static_cast<std::size_t>(it - run.estimators.begin());
  const std::size_t width = run.estimators.size();
  for (std::size_t t = 0; t < run.trials; ++t) {
    const auto& r = run.reports[t * width + col];
    if (r.flags & kFlagHtUnexposed) ++g.unexposed;
    if (!r.usable()) {
      ++g.dropped;
      continue;
    }
    g.est.push_back(r.estimate);
    g.ate.push_back(ate);
  }
}

}  // namespace

GraphPtr build_graph(const GraphSpec& spec, std::uint64_t master_seed,
                     std::vector<std::uint64_t>* original_ids) {
  const std::uint64_t seed = spec.seed.value_or(derive_seed(master_seed, "graph"));
  if (spec.type == "erdos_renyi") {
    return std::make_shared<const InterferenceGraph>(erdos_renyi(spec.n, spec.expected_degree, seed));
  }
  if (spec.type == "watts_strogatz") {
    return std::make_shared<const InterferenceGraph>(watts_strogatz(spec.n, spec.d, spec.q, seed));
  }
  if (spec.type == "ring") {
    return std::make_shared<const InterferenceGraph>(ring_lattice(spec.n, spec.d));
  }
  if (spec.type == "edge_list") {
    EdgeListOptions opt;
    opt.directed = spec.directed;
    auto loaded = load_edge_list(spec.path, opt);
    if (original_ids != nullptr) *original_ids = std::move(loaded.original_ids);
    return std::make_shared<const InterferenceGraph>(std::move(loaded.graph));
  }
  if (spec.type == "model") return nullptr;
  throw std::invalid_argument("unknown graph type '" + spec.type + "'");
}

ModelPtr build_model(const ModelSpec& spec, GraphPtr graph, std::uint64_t master_seed) {
  const std::uint64_t seed = spec.seed.value_or(derive_seed(master_seed, "model"));
  if (spec.type == "markovian") {
    return markovian_model(spec.chain, spec.horizon, spec.truncation, spec.noise_std);
  }
  if (!graph) throw std::invalid_argument("model '" + spec.type + "' needs a graph");
  if (spec.type == "benchmark") {
    return benchmark_model(graph, spec.c0, spec.c1, spec.c2, spec.noise_std);
  }
  if (spec.type == "linear") {
    return linear_model(graph, std::vector<double>(graph->num_nodes(), spec.alpha), spec.beta,
                        weights_for(spec, *graph, seed), spec.delta, spec.noise_std);
  }
  if (spec.type == "multiplicative") {
    return multiplicative_model(graph, spec.c0, weights_for(spec, *graph, seed), spec.delta,
                                spec.noise_std);
  }
  if (spec.type == "low_order") {
    LowOrderConfig cfg = spec.low_order;
    cfg.delta = spec.delta;
    cfg.noise_std = spec.noise_std;
    return random_low_order_model(graph, cfg, seed);
  }
  throw std::invalid_argument("unknown model type '" + spec.type + "'");
}

Partition build_partition(const PartitionSpec& spec, const InterferenceGraph& graph,
                          std::uint64_t master_seed, std::span<const std::uint64_t> original_ids) {
  const std::size_t n = graph.num_nodes();
  const std::uint64_t seed = spec.seed.value_or(derive_seed(master_seed, "partition"));
  if (spec.type == "singleton") return singleton(n);
  if (spec.type == "blocks") return contiguous_blocks(n, spec.m);
  if (spec.type == "random_balanced") return random_balanced(n, spec.clusters, seed);
  if (spec.type == "label_propagation") return label_propagation(graph, seed, spec.max_rounds);
  if (spec.type == "file") return load_partition(spec.path, n, original_ids);
  throw std::invalid_argument("unknown partition type '" + spec.type + "'");
}

Instance build_instance(const ExperimentConfig& config, std::size_t replicate) {
  Instance inst;
  inst.seed = replicate_seed(config.seed, replicate);
  inst.trial_seed = derive_seed(inst.seed, "trials");
  inst.graph = build_graph(config.graph, inst.seed, &inst.original_ids);
  inst.model = build_model(config.model, inst.graph, inst.seed);
  if (!inst.graph) inst.graph = inst.model->graph_ptr();
  if (config.design == DesignKind::kCluster) {
    inst.partition = build_partition(config.partition, *inst.graph, inst.seed, inst.original_ids);
  }
  inst.ate = config.ate ? *config.ate : ground_truth_ate(*inst.model);
  return inst;
}

std::vector<Estimator> resolve_estimators(std::span<const Estimator> requested, DesignKind design) {
  std::vector<Estimator> out;
  for (auto e : requested) {
    if (design == DesignKind::kCluster) {
      if (e == Estimator::kDN || e == Estimator::kDNCredit) e = Estimator::kDNCluster;
      if (e == Estimator::kHT) e = Estimator::kHTCluster;
    }
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  }
  return out;
}

TrialRun run_trials(const TrialPlan& plan, const OutcomeFn& outcomes) {
  if (plan.graph == nullptr) throw std::invalid_argument("trial plan needs a graph");
  if (!(plan.p > 0.0 && plan.p < 1.0)) {
    throw std::invalid_argument("treatment probability must be in (0, 1)");
  }
  if (plan.trials == 0) throw std::invalid_argument("at least one trial is required");
  if (plan.estimators.empty()) throw std::invalid_argument("no estimators requested");
  const std::size_t n = plan.graph->num_nodes();
  std::optional<ClusterNeighborhoods> hoods;
  if (plan.partition != nullptr) {
    if (plan.partition->num_nodes() != n) {
      throw std::invalid_argument("partition does not cover the graph");
    }
    hoods.emplace(*plan.graph, *plan.partition);
  }
  for (auto e : plan.estimators) {
    if (is_cluster_estimator(e) && plan.partition == nullptr) {
      throw std::invalid_argument(std::string(estimator_name(e)) + " needs a cluster design");
    }
  }

  TrialRun run;
  run.estimators = plan.estimators;
  run.trials = plan.trials;
  const std::size_t width = plan.estimators.size();
  run.reports.resize(plan.trials * width);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    std::vector<double> y(n);
    try {
      for (std::size_t t = next++; t < plan.trials; t = next++) {
        const TreatmentDraw draw =
            plan.partition ? draw_cluster_bernoulli(*plan.partition, plan.p, plan.seed, t)
                           : draw_unit_bernoulli(n, plan.p, plan.seed, t);
        outcomes(draw.z, t, y);
        TrialInputs in;
        in.graph = plan.graph;
        in.clusters = hoods ? &*hoods : nullptr;
        in.z = draw.z;
        in.cluster_z = draw.cluster_z;
        in.y = y;
        in.p = plan.p;
        for (std::size_t e = 0; e < width; ++e) {
          run.reports[t * width + e] = estimate(plan.estimators[e], in, t);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = plan.trials;
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(plan.parallel, plan.trials));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return run;
}

TrialRun run_trials(const Instance& instance, const ExperimentConfig& config,
                    const Partition* partition_override) {
  const Partition* part = partition_override;
  if (part == nullptr && config.design == DesignKind::kCluster) {
    if (!instance.partition) throw std::invalid_argument("cluster design without a partition");
    part = &*instance.partition;
  }
  TrialPlan plan;
  plan.graph = instance.graph.get();
  plan.partition = part;
  plan.estimators =
      resolve_estimators(config.estimators, part ? DesignKind::kCluster : DesignKind::kUnit);
  plan.p = config.p;
  plan.trials = config.trials;
  plan.seed = instance.trial_seed;
  plan.parallel = config.parallel;
  const OutcomeModel& model = *instance.model;
  const std::uint64_t noise_seed = instance.trial_seed;
  return run_trials(plan, [&model, noise_seed](std::span<const Treatment> z, std::uint64_t t,
                                               std::span<double> y) {
    model.observe(z, noise_seed, t, y);
  });
}

TrialSummary summarize(std::span<const double> estimates, double true_ate, bool absolute) {
  std::vector<double> ates(estimates.size(), true_ate);
  auto s = summarize_errors(estimates, ates, absolute);
  s.ate = true_ate;
  return s;
}

TrialSummary summarize(const TrialRun& run, Estimator estimator, double true_ate, bool absolute) {
  Gathered g;
  gather(run, estimator, true_ate, g);
  auto s = summarize_errors(g.est, g.ate, absolute);
  s.estimator = estimator;
  s.ate = true_ate;
  s.dropped = g.dropped;
  s.ht_unexposed = g.unexposed;
  return s;
}

std::vector<TrialSummary> summarize(const TrialRun& run, double true_ate, bool absolute) {
  std::vector<TrialSummary> out;
  for (auto e : run.estimators) out.push_back(summarize(run, e, true_ate, absolute));
  return out;
}

TrialSummary summarize_pooled(std::span<const RunWithTruth> runs, Estimator estimator,
                              bool absolute) {
  Gathered g;
  double ate_sum = 0.0;
  for (const auto& r : runs) {
    gather(*r.run, estimator, r.ate, g);
    ate_sum += r.ate;
  }
  auto s = summarize_errors(g.est, g.ate, absolute);
  s.estimator = estimator;
  s.ate = runs.empty() ? nan() : ate_sum / static_cast<double>(runs.size());
  s.dropped = g.dropped;
  s.ht_unexposed = g.unexposed;
  s.partition_id = "pooled";
  return s;
}

const SweepRow* SweepResult::best(Estimator e) const {
  for (const auto& [est, id] : argmin) {
    if (est != e) continue;
    for (const auto& row : rows) {
      if (row.summary.estimator == e && row.partition_id == id) return &row;
    }
  }
  return nullptr;
}

SweepResult sweep_clusters(const Instance& instance, const ExperimentConfig& config,
                           std::span<const PartitionSpec> partitions) {
  if (partitions.empty()) throw std::invalid_argument("sweep needs at least one partition");
  SweepResult result;
  for (const auto& spec : partitions) {
    const Partition part =
        build_partition(spec, *instance.graph, instance.seed, instance.original_ids);
    auto run = run_trials(instance, config, &part);
    for (auto e : run.estimators) {
      SweepRow row;
      row.partition_id = spec.label();
      row.num_clusters = part.num_clusters();
      row.summary = summarize(run, e, instance.ate, config.absolute);
      row.summary.partition_id = row.partition_id;
      result.rows.push_back(std::move(row));
    }
    result.runs.emplace_back(spec.label(), std::move(run));
  }
  for (auto e : result.runs.front().second.estimators) {
    const SweepRow* best = nullptr;
    for (const auto& row : result.rows) {
      if (row.summary.estimator != e || std::isnan(row.summary.rmse)) continue;
      if (best == nullptr || row.summary.rmse < best->summary.rmse) best = &row;
    }
    if (best != nullptr) result.argmin.emplace_back(e, best->partition_id);
  }
  return result;
}

std::vector<BoundRow> compare_bounds(const Instance& instance, double p) {
  const OutcomeModel& model = *instance.model;
  const auto& g = model.graph();
  const double n = static_cast<double>(g.num_nodes());
  const double ymax = max_abs_outcome(model);
  const double delta = model.delta();
  const double q = 1.0 / (p * (1.0 - p));
  std::vector<BoundRow> rows;

  if (!instance.partition) {
    const double d = static_cast<double>(g.max_degree());
    {
      const auto m = enumerate_moments(model, p, Estimator::kDM);
      BoundRow r;
      r.estimator = Estimator::kDM;
      r.exact_bias = m.bias;
      r.exact_variance = m.variance;
      r.bias_bound = d * delta;
      r.bias_form = "Theta(d*delta)";
      r.variance_bound = ymax * ymax / n;
      r.variance_form = "Theta(Y_max^2/N)";
      rows.push_back(r);
    }
    {
      const auto bias = certify_dn_bias(model, p);
      const auto var = certify_dn_variance(model, p, ymax);
      const auto m = enumerate_moments(model, p, Estimator::kDN);
      BoundRow r;
      r.estimator = Estimator::kDN;
      r.exact_bias = m.bias;
      r.exact_variance = m.variance;
      r.bias_bound = bias.bound;
      r.bias_form = "d^2*epsilon";
      r.variance_bound = var.bound;
      r.variance_form = "Y_max^2/N*(8d^4+qd^3+20d^3+7qd^2-20d^2+q^2d+16d+q)";
      r.bias_explicit = r.variance_explicit = true;
      r.holds = bias.pass && var.pass;
      rows.push_back(r);
    }
    {
      const auto m = enumerate_moments(model, p, Estimator::kHT);
      BoundRow r;
      r.estimator = Estimator::kHT;
      r.exact_bias = m.bias;
      r.exact_variance = m.variance;
      r.bias_bound = 0.0;
      r.bias_form = "0";
      r.bias_explicit = true;
      r.variance_bound = std::pow(2.0, d) * ymax * ymax / n;
      r.variance_form = "Theta(2^d*Y_max^2/N)";
      r.holds = std::abs(m.bias) <= kCertificateSlack;
      rows.push_back(r);
    }
    return rows;
  }

  const Partition& part = *instance.partition;
  const auto stats = cluster_degree_stats(g, part);
  const double c = static_cast<double>(part.num_clusters());
  const double dc = static_cast<double>(stats.max_cluster_neighbors);
  {
    const auto m = enumerate_moments(model, p, Estimator::kDM, &part);
    BoundRow r;
    r.estimator = Estimator::kDM;
    r.exact_bias = m.bias;
    r.exact_variance = m.variance;
    r.bias_bound = stats.sum_out_of_cluster / n * delta;
    r.bias_form = "Theta(sum_i(d_i-d_i^C)/N*delta)";
    r.variance_bound = ymax * ymax / c;
    r.variance_form = "Theta(Y_max^2/|C|)";
    rows.push_back(r);
  }
  {
    const auto bias = certify_dn_cluster_bias(model, part, p);
    const auto m = enumerate_moments(model, p, Estimator::kDNCluster, &part);
    BoundRow r;
    r.estimator = Estimator::kDNCluster;
    r.exact_bias = m.bias;
    r.exact_variance = m.variance;
    r.bias_bound = bias.bound;
    r.bias_form = "sum_i(d_i-d_i^C)^2/N*epsilon";
    r.bias_explicit = true;
    r.variance_bound = ymax * ymax / c * (std::pow(dc, 4) + q * std::pow(dc, 3));
    r.variance_form = "O(Y_max^2/|C|*(d_C^4+d_C^3/(p(1-p))))";
    r.holds = bias.pass;
    rows.push_back(r);
  }
  {
    const auto m = enumerate_moments(model, p, Estimator::kHTCluster, &part);
    BoundRow r;
    r.estimator = Estimator::kHTCluster;
    r.exact_bias = m.bias;
    r.exact_variance = m.variance;
    r.bias_bound = 0.0;
    r.bias_form = "0";
    r.bias_explicit = true;
    r.variance_bound = std::pow(2.0, dc) * ymax * ymax / c;
    r.variance_form = "Theta(2^d_C*Y_max^2/|C|)";
    r.holds = std::abs(m.bias) <= kCertificateSlack;
    rows.push_back(r);
  }
  return rows;
}

std::string format_g17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void put_extra_header(std::ostream& out, const CsvExtra& extra) {
  for (const auto& [name, value] : extra) out << ',' << name;
  out << '\n';
}

void put_extra(std::ostream& out, const CsvExtra& extra) {
  for (const auto& [name, value] : extra) out << ',' << value;
  out << '\n';
}

}  // namespace

void write_trials_header(std::ostream& out, const CsvExtra& extra) {
  out << "run_id,trial,estimator,estimate,flags";
  put_extra_header(out, extra);
}

void write_trials_csv(std::ostream& out, const std::string& run_id, const TrialRun& run,
                      const CsvExtra& extra) {
  for (const auto& r : run.reports) {
    out << run_id << ',' << r.trial << ',' << estimator_name(r.estimator) << ','
        << format_g17(r.estimate) << ',' << flags_to_string(r.flags);
    put_extra(out, extra);
  }
}

void write_summary_header(std::ostream& out, const CsvExtra& extra) {
  out << "run_id,estimator,partition_id,K,mean_rel_err,ci_lo,ci_hi,rmse,bias,variance,dropped,"
         "ate,ht_unexposed";
  put_extra_header(out, extra);
}

void write_summary_csv(std::ostream& out, const std::string& run_id,
                       std::span<const TrialSummary> rows, const CsvExtra& extra) {
  for (const auto& s : rows) {
    out << run_id << ',' << estimator_name(s.estimator) << ','
        << (s.partition_id.empty() ? "none" : s.partition_id) << ',' << s.trials << ','
        << format_g17(s.mean_rel_err) << ',' << format_g17(s.ci_lo) << ','
        << format_g17(s.ci_hi) << ',' << format_g17(s.rmse) << ',' << format_g17(s.bias) << ','
        << format_g17(s.variance) << ',' << s.dropped << ',' << format_g17(s.ate) << ','
        << s.ht_unexposed;
    put_extra(out, extra);
  }
}

void write_bounds_csv(std::ostream& out, const std::string& run_id,
                      std::span<const BoundRow> rows) {
  out << "run_id,estimator,exact_bias,exact_variance,bias_bound,bias_form,bias_explicit,"
         "variance_bound,variance_form,variance_explicit,holds\n";
  for (const auto& r : rows) {
    out << run_id << ',' << estimator_name(r.estimator) << ',' << format_g17(r.exact_bias) << ','
        << format_g17(r.exact_variance) << ',' << format_g17(r.bias_bound) << ",\""
        << r.bias_form << "\"," << (r.bias_explicit ? "true" : "false") << ','
        << format_g17(r.variance_bound) << ",\"" << r.variance_form << "\","
        << (r.variance_explicit ? "true" : "false") << ',' << (r.holds ? "true" : "false")
        << '\n';
  }
}

}  // namespace dnest
