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

#include "dnest/estimators.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace dnest {
namespace {

void check_inputs(std::span<const Treatment> z, std::span<const double> y, double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("estimators need a treatment probability p in (0, 1)");
  }
  if (z.size() != y.size()) throw std::invalid_argument("z and Y have different lengths");
  if (z.empty()) throw std::invalid_argument("estimators need at least one unit");
}

void check_graph(const InterferenceGraph& g, std::span<const Treatment> z) {
  if (g.num_nodes() != z.size()) throw std::invalid_argument("graph and z have different sizes");
}

// (1/p)^k and (1/(1-p))^k, computed the same way by ht and ht_cluster so that
// the singleton partition reproduces ht bit for bit.
double inverse_power(double q, std::size_t k) { return std::pow(1.0 / q, static_cast<double>(k)); }

}  // namespace

PropensityTerms PropensityTerms::from(std::span<const Treatment> z, double p) {
  PropensityTerms t;
  t.eta.resize(z.size());
  t.xi.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    t.eta[i] = dnest::eta(z[i], p);
    t.xi[i] = dnest::xi(z[i], p);
  }
  return t;
}

PropensityMoments two_point_moments(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0, 1)");
  PropensityMoments m;
  const std::array<std::pair<Treatment, double>, 2> support{{{1, p}, {0, 1.0 - p}}};
  for (auto [z, w] : support) {
    const double e = eta(z, p), x = xi(z, p);
    m.mean_eta += w * e;
    m.mean_abs_eta += w * std::abs(e);
    m.mean_xi += w * x;
    m.mean_eta_sq += w * e * e;
    m.mean_xi_sq += w * x * x;
  }
  return m;
}

double dm(std::span<const Treatment> z, std::span<const double> y, double p) {
  check_inputs(z, y, p);
  const double e1 = eta(1, p), e0 = eta(0, p);
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] ? e1 : e0) * y[i];
  return s / static_cast<double>(z.size());
}

std::optional<double> dm_ratio(std::span<const Treatment> z, std::span<const double> y) {
  if (z.size() != y.size()) throw std::invalid_argument("z and Y have different lengths");
  double s1 = 0.0, s0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z[i]) {
      s1 += y[i];
      ++n1;
    } else {
      s0 += y[i];
      ++n0;
    }
  }
  if (n1 == 0 || n0 == 0) return std::nullopt;
  return s1 / static_cast<double>(n1) - s0 / static_cast<double>(n0);
}

HtDetail ht_detail(const InterferenceGraph& g, std::span<const Treatment> z,
                   std::span<const double> y, double p) {
  check_inputs(z, y, p);
  check_graph(g, z);
  HtDetail out;
  double s = 0.0;
  for (NodeId i = 0; i < z.size(); ++i) {
    const auto nb = g.in_neighbors(i);
    std::size_t treated = z[i];
    for (NodeId j : nb) treated += z[j];
    const std::size_t k = nb.size() + 1;
    if (treated == k) {
      s += inverse_power(p, k) * y[i];
      ++out.exposed;
    } else if (treated == 0) {
      s -= inverse_power(1.0 - p, k) * y[i];
      ++out.exposed;
    }
  }
  out.estimate = s / static_cast<double>(z.size());
  return out;
}

double ht(const InterferenceGraph& g, std::span<const Treatment> z, std::span<const double> y,
          double p) {
  return ht_detail(g, z, y, p).estimate;
}

double dn(const InterferenceGraph& g, std::span<const Treatment> z, std::span<const double> y,
          double p) {
  check_inputs(z, y, p);
  check_graph(g, z);
  const double e1 = eta(1, p), e0 = eta(0, p), x1 = xi(1, p), x0 = xi(0, p);
  double s = 0.0;
  for (NodeId i = 0; i < z.size(); ++i) {
    double credit = y[i];
    for (NodeId j : g.neighbors(i)) credit += (z[j] ? x1 : x0) * y[j];
    s += (z[i] ? e1 : e0) * credit;
  }
  return s / static_cast<double>(z.size());
}

double dn_credit(const InterferenceGraph& g, std::span<const Treatment> z,
                 std::span<const double> y, double p) {
  check_inputs(z, y, p);
  check_graph(g, z);
  const double e1 = eta(1, p), e0 = eta(0, p), x1 = xi(1, p), x0 = xi(0, p);
  double s = 0.0;
  for (NodeId i = 0; i < z.size(); ++i) {
    double inner = 0.0;
    for (NodeId j : g.in_neighbors(i)) inner += z[j] ? e1 : e0;
    s += ((z[i] ? e1 : e0) + (z[i] ? x1 : x0) * inner) * y[i];
  }
  return s / static_cast<double>(z.size());
}

double dn_cluster(const ClusterNeighborhoods& hoods, std::span<const Treatment> cluster_z,
                  std::span<const double> y, double p) {
  if (cluster_z.size() != hoods.num_clusters()) {
    throw std::invalid_argument("need one treatment bit per cluster");
  }
  if (y.size() != hoods.num_nodes()) throw std::invalid_argument("Y has the wrong length");
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("estimators need a treatment probability p in (0, 1)");
  }
  if (y.empty()) throw std::invalid_argument("estimators need at least one unit");
  const double e1 = eta(1, p), e0 = eta(0, p), x1 = xi(1, p), x0 = xi(0, p);
  double s = 0.0;
  for (NodeId i = 0; i < y.size(); ++i) {
    const Treatment zi = cluster_z[hoods.own(i)];
    double inner = 0.0;
    for (ClusterId c : hoods.of(i)) inner += cluster_z[c] ? e1 : e0;
    s += ((zi ? e1 : e0) + (zi ? x1 : x0) * inner) * y[i];
  }
  return s / static_cast<double>(y.size());
}

double dn_cluster(const InterferenceGraph& g, const Partition& partition,
                  const TreatmentDraw& draw, std::span<const double> y, double p) {
  check_cluster_draw(draw, partition);
  check_inputs(draw.z, y, p);
  check_graph(g, draw.z);
  const ClusterNeighborhoods hoods(g, partition);
  return dn_cluster(hoods, draw.cluster_z, y, p);
}

HtDetail ht_cluster_detail(const ClusterNeighborhoods& hoods, std::span<const Treatment> cluster_z,
                           std::span<const double> y, double p) {
  if (cluster_z.size() != hoods.num_clusters()) {
    throw std::invalid_argument("need one treatment bit per cluster");
  }
  if (y.size() != hoods.num_nodes()) throw std::invalid_argument("Y has the wrong length");
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("estimators need a treatment probability p in (0, 1)");
  }
  if (y.empty()) throw std::invalid_argument("estimators need at least one unit");
  HtDetail out;
  double s = 0.0;
  for (NodeId i = 0; i < y.size(); ++i) {
    const auto nb = hoods.of(i);
    std::size_t treated = cluster_z[hoods.own(i)];
    for (ClusterId c : nb) treated += cluster_z[c];
    const std::size_t k = nb.size() + 1;
    if (treated == k) {
      s += inverse_power(p, k) * y[i];
      ++out.exposed;
    } else if (treated == 0) {
      s -= inverse_power(1.0 - p, k) * y[i];
      ++out.exposed;
    }
  }
  out.estimate = s / static_cast<double>(y.size());
  return out;
}

double ht_cluster(const InterferenceGraph& g, const Partition& partition,
                  const TreatmentDraw& draw, std::span<const double> y, double p) {
  check_cluster_draw(draw, partition);
  check_inputs(draw.z, y, p);
  check_graph(g, draw.z);
  const ClusterNeighborhoods hoods(g, partition);
  return ht_cluster_detail(hoods, draw.cluster_z, y, p).estimate;
}

namespace {
constexpr std::array<std::pair<Estimator, std::string_view>, 7> kNames{{
    {Estimator::kDM, "dm"},
    {Estimator::kDMRatio, "dm_ratio"},
    {Estimator::kHT, "ht"},
    {Estimator::kDN, "dn"},
    {Estimator::kDNCredit, "dn_credit"},
    {Estimator::kDNCluster, "dn_cluster"},
    {Estimator::kHTCluster, "ht_cluster"},
}};
}  // namespace

std::string_view estimator_name(Estimator e) {
  for (auto [k, n] : kNames) {
    if (k == e) return n;
  }
  return "?";
}

std::optional<Estimator> parse_estimator(std::string_view name) {
  for (auto [k, n] : kNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

bool is_cluster_estimator(Estimator e) {
  return e == Estimator::kDNCluster || e == Estimator::kHTCluster;
}

std::string flags_to_string(std::uint32_t flags) {
  std::string s;
  auto add = [&](std::uint32_t bit, const char* name) {
    if (!(flags & bit)) return;
    if (!s.empty()) s += '|';
    s += name;
  };
  add(kFlagUndefined, "undefined");
  add(kFlagNonFinite, "nonfinite");
  add(kFlagHtUnexposed, "ht_unexposed");
  return s;
}

EstimateReport estimate(Estimator e, const TrialInputs& in, std::uint64_t trial) {
  EstimateReport r;
  r.estimator = e;
  r.trial = trial;
  auto need_graph = [&] {
    if (in.graph == nullptr) throw std::invalid_argument("estimator needs the interference graph");
  };
  auto need_clusters = [&] {
    if (in.clusters == nullptr) throw std::invalid_argument("cluster estimator needs a partition");
  };
  switch (e) {
    case Estimator::kDM:
      r.estimate = dm(in.z, in.y, in.p);
      break;
    case Estimator::kDMRatio: {
      const auto v = dm_ratio(in.z, in.y);
      if (v) {
        r.estimate = *v;
      } else {
        r.estimate = 0.0;
        r.flags |= kFlagUndefined;
      }
      break;
    }
    case Estimator::kHT: {
      need_graph();
      const auto d = ht_detail(*in.graph, in.z, in.y, in.p);
      r.estimate = d.estimate;
      if (d.exposed == 0) r.flags |= kFlagHtUnexposed;
      break;
    }
    case Estimator::kDN:
      need_graph();
      r.estimate = dn(*in.graph, in.z, in.y, in.p);
      break;
    case Estimator::kDNCredit:
      need_graph();
      r.estimate = dn_credit(*in.graph, in.z, in.y, in.p);
      break;
    case Estimator::kDNCluster:
      need_clusters();
      r.estimate = dn_cluster(*in.clusters, in.cluster_z, in.y, in.p);
      break;
    case Estimator::kHTCluster: {
      need_clusters();
      const auto d = ht_cluster_detail(*in.clusters, in.cluster_z, in.y, in.p);
      r.estimate = d.estimate;
      if (d.exposed == 0) r.flags |= kFlagHtUnexposed;
      break;
    }
  }
  if (!std::isfinite(r.estimate)) r.flags |= kFlagNonFinite;
  return r;
}

}  // namespace dnest
