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

#include "dnest/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dnest/rng.hpp"
#include "json.hpp"

namespace dnest {
namespace {

constexpr std::uint64_t kChunk = 1u << 12;

struct Accumulator {
  double w = 0.0, mean = 0.0, m2 = 0.0;

  void add(double weight, double x) {
    if (weight == 0.0) return;
    w += weight;
    const double delta = x - mean;
    mean += delta * weight / w;
    m2 += weight * delta * (x - mean);
  }

  void merge(const Accumulator& o) {
    if (o.w == 0.0) return;
    if (w == 0.0) {
      *this = o;
      return;
    }
    const double total = w + o.w;
    const double delta = o.mean - mean;
    mean += delta * o.w / total;
    m2 += o.m2 + delta * delta * w * o.w / total;
    w = total;
  }
};

// Probability of a bit pattern with k ones out of n.
std::vector<double> pattern_weights(std::size_t n, double p) {
  std::vector<double> w(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    w[k] = std::pow(p, static_cast<double>(k)) * std::pow(1.0 - p, static_cast<double>(n - k));
  }
  return w;
}

// Closed neighborhood as [N_i..., i].
std::vector<NodeId> closed_neighborhood(const OutcomeModel& model, NodeId i, std::size_t cap) {
  const auto nb = model.graph().in_neighbors(i);
  if (nb.size() > cap) {
    throw std::invalid_argument("node " + std::to_string(i) + " has " + std::to_string(nb.size()) +
                                " neighbors; exact scans allow at most " + std::to_string(cap));
  }
  std::vector<NodeId> c(nb.begin(), nb.end());
  c.push_back(i);
  return c;
}

void set_bits(std::vector<Treatment>& z, const std::vector<NodeId>& nodes, std::uint64_t mask) {
  for (std::size_t b = 0; b < nodes.size(); ++b) z[nodes[b]] = (mask >> b) & 1u;
}

std::string describe(const OutcomeModel& model, double p) {
  std::ostringstream os;
  os << "model=" << model.kind() << " N=" << model.num_nodes()
     << " edges=" << model.graph().num_edges() << " d=" << model.graph().max_degree()
     << " delta=" << model.delta() << " p=" << p;
  return os.str();
}

std::pair<double, std::string> certificate_epsilon(const OutcomeModel& model) {
  if (model.graph().max_degree() <= kMaxExactNeighborhood) {
    return {smoothness(model, SmoothnessMode::kExact).epsilon, "exact"};
  }
  if (auto l = model.smoothness_constant()) {
    return {*l * model.delta() * model.delta(), "analytic"};
  }
  throw std::invalid_argument(
      "neighborhoods too large for an exact smoothness scan and the model reports no L");
}

}  // namespace

Enumeration enumerate(std::size_t units, double p, const Statistic& statistic,
                      std::size_t threads) {
  if (units > kMaxEnumerationUnits) {
    throw std::invalid_argument("instance too large to enumerate: " + std::to_string(units) +
                                " randomized units (limit " +
                                std::to_string(kMaxEnumerationUnits) + ")");
  }
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p must be in [0, 1]");
  const std::uint64_t total = std::uint64_t{1} << units;
  const std::uint64_t chunks = (total + kChunk - 1) / kChunk;
  const auto weights = pattern_weights(units, p);
  std::vector<Accumulator> partial(chunks);
  std::vector<double> mass(chunks, 0.0);

  auto run_chunk = [&](std::uint64_t c) {
    std::vector<Treatment> bits(units);
    Accumulator acc;
    double m = 0.0;
    const std::uint64_t end = std::min(total, (c + 1) * kChunk);
    for (std::uint64_t mask = c * kChunk; mask < end; ++mask) {
      for (std::size_t b = 0; b < units; ++b) bits[b] = (mask >> b) & 1u;
      const double w = weights[static_cast<std::size_t>(std::popcount(mask))];
      m += w;
      if (w == 0.0) continue;
      acc.add(w, statistic(bits));
    }
    partial[c] = acc;
    mass[c] = m;
  };

  threads = std::max<std::size_t>(1, std::min<std::size_t>(threads, chunks));
  if (threads == 1) {
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        try {
          for (std::uint64_t c; (c = next.fetch_add(1)) < chunks;) run_chunk(c);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = chunks;
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  Accumulator acc;
  Enumeration out;
  for (std::uint64_t c = 0; c < chunks; ++c) {
    acc.merge(partial[c]);
    out.mass += mass[c];
  }
  out.mean = acc.mean;
  out.variance = acc.w > 0.0 ? acc.m2 / acc.w : 0.0;
  out.assignments = total;
  return out;
}

ExactMoments enumerate_moments(const OutcomeModel& model, double p, Estimator estimator,
                               const Partition* partition, std::size_t threads) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0, 1)");
  if (estimator == Estimator::kDMRatio) {
    throw std::invalid_argument(
        "dm_ratio has no exact expectation: an empty arm has positive probability");
  }
  if (is_cluster_estimator(estimator) && partition == nullptr) {
    throw std::invalid_argument("cluster estimators need a partition");
  }
  const std::size_t n = model.num_nodes();
  std::optional<ClusterNeighborhoods> hoods;
  if (partition != nullptr) {
    if (partition->num_nodes() != n) throw std::invalid_argument("partition does not cover the graph");
    hoods.emplace(model.graph(), *partition);
  }
  const std::size_t units = partition ? partition->num_clusters() : n;

  const Statistic stat = [&](std::span<const Treatment> bits) {
    thread_local std::vector<Treatment> z;
    thread_local std::vector<double> y;
    z.resize(n);
    y.resize(n);
    if (partition != nullptr) {
      for (NodeId i = 0; i < n; ++i) z[i] = bits[partition->cluster_of(i)];
    } else {
      std::copy(bits.begin(), bits.end(), z.begin());
    }
    model.evaluate_all(z, y);
    TrialInputs in;
    in.graph = &model.graph();
    in.clusters = hoods ? &*hoods : nullptr;
    in.z = z;
    in.cluster_z = partition ? bits : std::span<const Treatment>{};
    in.y = y;
    in.p = p;
    return estimate(estimator, in).estimate;
  };

  const auto e = enumerate(units, p, stat, threads);
  ExactMoments m;
  m.expectation = e.mean;
  m.variance = e.variance;
  m.mass = e.mass;
  m.assignments = e.assignments;
  m.ate = ground_truth_ate(model);
  m.bias = m.expectation - m.ate;
  return m;
}

double dm_expectation_local(const OutcomeModel& model, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0, 1)");
  const std::size_t n = model.num_nodes();
  std::vector<Treatment> z(n, 0);
  double total = 0.0;
  for (NodeId i = 0; i < n; ++i) {
    const auto nodes = closed_neighborhood(model, i, kMaxExactNeighborhood);
    const std::size_t own = nodes.size() - 1;
    double treated = 0.0, control = 0.0;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nodes.size()); ++mask) {
      set_bits(z, nodes, mask);
      // Weight of the neighbor bits only: conditioning on z_i.
      double w = 1.0;
      for (std::size_t b = 0; b < own; ++b) w *= (mask >> b) & 1u ? p : 1.0 - p;
      const double f = model.evaluate(i, z);
      if ((mask >> own) & 1u) {
        treated += w * f;
      } else {
        control += w * f;
      }
    }
    set_bits(z, nodes, 0);
    total += treated - control;
  }
  return total / static_cast<double>(n);
}

double finite_difference(const OutcomeModel& model, NodeId i, NodeId j, NodeId k,
                         std::span<const Treatment> z) {
  if (j == k) throw std::invalid_argument("finite_difference: j and k must differ");
  const auto nb = model.graph().in_neighbors(i);
  if (!std::binary_search(nb.begin(), nb.end(), j) || !std::binary_search(nb.begin(), nb.end(), k)) {
    throw std::invalid_argument("finite_difference: j and k must be neighbors of i");
  }
  if (z.size() != model.num_nodes()) throw std::invalid_argument("finite_difference: bad z length");
  std::vector<Treatment> w(z.begin(), z.end());
  auto at = [&](Treatment a, Treatment b) {
    w[j] = a;
    w[k] = b;
    return model.evaluate(i, w);
  };
  return at(1, 1) - at(0, 1) - at(1, 0) + at(0, 0);
}

Smoothness smoothness(const OutcomeModel& model, SmoothnessMode mode, std::size_t sample_budget,
                      std::uint64_t seed) {
  const std::size_t n = model.num_nodes();
  Smoothness s;
  s.mode = mode;
  s.per_node.assign(n, 0.0);
  std::vector<Treatment> z(n, 0);

  if (mode == SmoothnessMode::kExact) {
    std::vector<double> table;
    for (NodeId i = 0; i < n; ++i) {
      const auto nodes = closed_neighborhood(model, i, kMaxExactNeighborhood);
      const std::size_t d = nodes.size() - 1;
      if (d < 2) continue;
      const std::uint64_t size = std::uint64_t{1} << nodes.size();
      table.resize(size);
      for (std::uint64_t mask = 0; mask < size; ++mask) {
        set_bits(z, nodes, mask);
        table[mask] = model.evaluate(i, z);
      }
      set_bits(z, nodes, 0);
      double best = 0.0;
      for (std::uint64_t mask = 0; mask < size; ++mask) {
        for (std::size_t a = 0; a < d; ++a) {
          const std::uint64_t ba = std::uint64_t{1} << a;
          if (mask & ba) continue;
          for (std::size_t b = a + 1; b < d; ++b) {
            const std::uint64_t bb = std::uint64_t{1} << b;
            if (mask & bb) continue;
            const double delta =
                table[mask | ba | bb] - table[mask | ba] - table[mask | bb] + table[mask];
            best = std::max(best, std::abs(delta));
          }
        }
      }
      s.per_node[i] = best;
    }
  } else {
    s.lower_bound = true;
    std::vector<NodeId> eligible;
    for (NodeId i = 0; i < n; ++i) {
      if (model.graph().degree(i) >= 2) eligible.push_back(i);
    }
    if (!eligible.empty()) {
      auto engine = rng::make_engine(seed);
      for (std::size_t t = 0; t < sample_budget; ++t) {
        const NodeId i = eligible[rng::bounded(engine, eligible.size())];
        const auto nb = model.graph().in_neighbors(i);
        const auto a = rng::bounded(engine, nb.size());
        auto b = rng::bounded(engine, nb.size() - 1);
        if (b >= a) ++b;
        z[i] = static_cast<Treatment>(engine() >> 63);
        for (NodeId j : nb) z[j] = static_cast<Treatment>(engine() >> 63);
        const double delta = std::abs(finite_difference(model, i, nb[a], nb[b], z));
        s.per_node[i] = std::max(s.per_node[i], delta);
        z[i] = 0;
        for (NodeId j : nb) z[j] = 0;
      }
    }
  }
  for (double v : s.per_node) s.epsilon = std::max(s.epsilon, v);
  return s;
}

double max_abs_outcome(const OutcomeModel& model) {
  const std::size_t n = model.num_nodes();
  std::vector<Treatment> z(n, 0);
  double best = 0.0;
  for (NodeId i = 0; i < n; ++i) {
    const auto nodes = closed_neighborhood(model, i, kMaxExactNeighborhood);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nodes.size()); ++mask) {
      set_bits(z, nodes, mask);
      best = std::max(best, std::abs(model.evaluate(i, z)));
    }
    set_bits(z, nodes, 0);
  }
  return best;
}

std::string Certificate::to_json() const {
  nlohmann::ordered_json j;
  j["check"] = check;
  j["instance_descriptor"] = instance;
  j["lhs"] = lhs;
  j["bound"] = bound;
  j["pass"] = pass;
  if (!epsilon_source.empty()) j["epsilon_source"] = epsilon_source;
  auto details = nlohmann::ordered_json::object();
  for (const auto& [k, v] : extra) details[k] = v;
  j["details"] = details;
  return j.dump();
}

double dn_variance_bound(std::size_t n, std::size_t d, double p, double y_max) {
  const double q = 1.0 / (p * (1.0 - p));
  const double x = static_cast<double>(d);
  const double poly = 8 * x * x * x * x + q * x * x * x + 20 * x * x * x + 7 * q * x * x -
                      20 * x * x + q * q * x + 16 * x + q;
  return y_max * y_max / static_cast<double>(n) * poly;
}

Certificate certify_dn_bias(const OutcomeModel& model, double p) {
  const auto m = enumerate_moments(model, p, Estimator::kDN);
  const auto [eps, source] = certificate_epsilon(model);
  const auto& g = model.graph();
  const double d = static_cast<double>(g.max_degree());
  double sum_sq = 0.0;
  for (NodeId i = 0; i < g.num_nodes(); ++i) {
    sum_sq += static_cast<double>(g.degree(i)) * static_cast<double>(g.degree(i));
  }
  Certificate c;
  c.check = "dn_bias";
  c.instance = describe(model, p);
  c.lhs = std::abs(m.bias);
  c.bound = d * d * eps;
  c.pass = c.lhs <= c.bound + kCertificateSlack;
  c.epsilon_source = source;
  c.extra = {{"expectation", m.expectation},
             {"ate", m.ate},
             {"epsilon", eps},
             {"per_node_bound", sum_sq / static_cast<double>(g.num_nodes()) * eps},
             {"probability_mass", m.mass}};
  return c;
}

Certificate certify_dn_cluster_bias(const OutcomeModel& model, const Partition& partition,
                                    double p) {
  const auto m = enumerate_moments(model, p, Estimator::kDNCluster, &partition);
  const auto [eps, source] = certificate_epsilon(model);
  const auto stats = cluster_degree_stats(model.graph(), partition);
  Certificate c;
  c.check = "dn_cluster_bias";
  c.instance = describe(model, p) + " clusters=" + std::to_string(partition.num_clusters());
  c.lhs = std::abs(m.bias);
  c.bound = stats.sum_out_of_cluster_sq / static_cast<double>(model.num_nodes()) * eps;
  c.pass = c.lhs <= c.bound + kCertificateSlack;
  c.epsilon_source = source;
  c.extra = {{"expectation", m.expectation},
             {"ate", m.ate},
             {"epsilon", eps},
             {"sum_out_of_cluster_sq", stats.sum_out_of_cluster_sq},
             {"d_C", static_cast<double>(stats.max_cluster_neighbors)},
             {"probability_mass", m.mass}};
  return c;
}

Certificate certify_dn_variance(const OutcomeModel& model, double p, std::optional<double> y_max) {
  const auto m = enumerate_moments(model, p, Estimator::kDN);
  const double ym = y_max ? *y_max : max_abs_outcome(model);
  Certificate c;
  c.check = "dn_variance";
  c.instance = describe(model, p);
  c.lhs = m.variance;
  c.bound = dn_variance_bound(model.num_nodes(), model.graph().max_degree(), p, ym);
  c.pass = c.lhs <= c.bound + kCertificateSlack;
  c.extra = {{"y_max", ym}, {"expectation", m.expectation}, {"probability_mass", m.mass}};
  return c;
}

Certificate certify_ht_unbiased(const OutcomeModel& model, double p) {
  const auto m = enumerate_moments(model, p, Estimator::kHT);
  Certificate c;
  c.check = "ht_unbiased";
  c.instance = describe(model, p);
  c.lhs = std::abs(m.bias);
  c.bound = 0.0;
  c.pass = c.lhs <= kCertificateSlack;
  c.extra = {{"expectation", m.expectation}, {"ate", m.ate}, {"probability_mass", m.mass}};
  return c;
}

namespace {

struct NodeTables {
  std::size_t d = 0;
  std::vector<double> t[2];  // t[a][mask over neighbor bits], z_i = a
};

NodeTables node_tables(const OutcomeModel& model, NodeId i) {
  constexpr std::size_t kCap = 16;
  const auto nodes = closed_neighborhood(model, i, kCap);
  NodeTables nt;
  nt.d = nodes.size() - 1;
  const std::uint64_t size = std::uint64_t{1} << nt.d;
  std::vector<Treatment> z(model.num_nodes(), 0);
  for (Treatment a = 0; a < 2; ++a) {
    nt.t[a].resize(size);
    z[i] = a;
    for (std::uint64_t mask = 0; mask < size; ++mask) {
      set_bits(z, nodes, mask | (std::uint64_t{a} << nt.d));
      nt.t[a][mask] = model.evaluate(i, z);
    }
  }
  return nt;
}

// F^a(w) = sum_mask prod_j (w_j or 1-w_j) t[a][mask].
double big_f(const std::vector<double>& t, const std::vector<double>& w) {
  double s = 0.0;
  for (std::uint64_t mask = 0; mask < t.size(); ++mask) {
    double pr = 1.0;
    for (std::size_t b = 0; b < w.size(); ++b) pr *= (mask >> b) & 1u ? w[b] : 1.0 - w[b];
    s += pr * t[mask];
  }
  return s;
}

// Probability of the bits of `mask` outside `skip`, at w = p everywhere.
double others_weight(std::uint64_t mask, std::uint64_t skip, std::size_t d, double p) {
  double pr = 1.0;
  for (std::size_t b = 0; b < d; ++b) {
    if ((skip >> b) & 1u) continue;
    pr *= (mask >> b) & 1u ? p : 1.0 - p;
  }
  return pr;
}

}  // namespace

double taylor_gradient_check(const OutcomeModel& model, NodeId i, double p, double fd_step) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0, 1)");
  if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be positive");
  const auto nt = node_tables(model, i);
  double worst = 0.0;
  std::vector<double> w(nt.d, p);
  for (int a = 0; a < 2; ++a) {
    const auto& t = nt.t[a];
    for (std::size_t j = 0; j < nt.d; ++j) {
      const std::uint64_t bj = std::uint64_t{1} << j;
      w[j] = p + fd_step;
      const double up = big_f(t, w);
      w[j] = p - fd_step;
      const double down = big_f(t, w);
      w[j] = p;
      const double fd = (up - down) / (2 * fd_step);
      double exact = 0.0;
      for (std::uint64_t mask = 0; mask < t.size(); ++mask) {
        if (mask & bj) continue;
        exact += others_weight(mask, bj, nt.d, p) * (t[mask | bj] - t[mask]);
      }
      worst = std::max(worst, std::abs(fd - exact));
    }
  }
  return worst;
}

HessianCheck taylor_hessian_check(const OutcomeModel& model, NodeId i, double p, double fd_step) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0, 1)");
  if (!(fd_step > 0.0)) throw std::invalid_argument("fd_step must be positive");
  const auto nt = node_tables(model, i);
  HessianCheck h;
  std::vector<double> w(nt.d, p);
  // F is affine in each coordinate, so a second difference of any width is
  // exact; stay inside [0, 1].
  const double wide = std::min(p, 1.0 - p) / 2;
  for (int a = 0; a < 2; ++a) {
    const auto& t = nt.t[a];
    const double center = big_f(t, w);
    for (std::size_t j = 0; j < nt.d; ++j) {
      w[j] = p + wide;
      const double up = big_f(t, w);
      w[j] = p - wide;
      const double down = big_f(t, w);
      w[j] = p;
      h.max_diag = std::max(h.max_diag, std::abs((up - 2 * center + down) / (wide * wide)));

      for (std::size_t k = j + 1; k < nt.d; ++k) {
        const std::uint64_t bj = std::uint64_t{1} << j, bk = std::uint64_t{1} << k;
        double expected = 0.0;
        for (std::uint64_t mask = 0; mask < t.size(); ++mask) {
          if (mask & (bj | bk)) continue;
          expected += others_weight(mask, bj | bk, nt.d, p) *
                      (t[mask | bj | bk] - t[mask | bj] - t[mask | bk] + t[mask]);
        }
        auto f_at = [&](double wj, double wk) {
          w[j] = wj;
          w[k] = wk;
          const double v = big_f(t, w);
          w[j] = p;
          w[k] = p;
          return v;
        };
        const double poly = f_at(1, 1) - f_at(1, 0) - f_at(0, 1) + f_at(0, 0);
        const double s = fd_step;
        const double fd = (f_at(p + s, p + s) - f_at(p + s, p - s) - f_at(p - s, p + s) +
                           f_at(p - s, p - s)) /
                          (4 * s * s);
        h.offdiag_poly = std::max(h.offdiag_poly, std::abs(poly - expected));
        h.offdiag_fd = std::max(h.offdiag_fd, std::abs(fd - expected));
      }
    }
  }
  return h;
}

}  // namespace dnest
