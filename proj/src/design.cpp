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

#include "dnest/design.hpp"

#include <stdexcept>
#include <string>

#include "dnest/rng.hpp"

namespace dnest {
namespace {

void check_p(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("treatment probability must be in [0, 1]");
}

void fill_bernoulli(std::vector<Treatment>& bits, double p, std::uint64_t seed,
                    std::uint64_t trial) {
  const rng::CounterStream stream(seed, rng::Stream::kTreatment, trial);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = stream.bernoulli(i, p) ? 1 : 0;
}

}  // namespace

std::string_view design_name(DesignKind kind) {
  return kind == DesignKind::kUnit ? "unit" : "cluster";
}

TreatmentDraw draw_unit_bernoulli(std::size_t n, double p, std::uint64_t seed,
                                  std::uint64_t trial) {
  check_p(p);
  TreatmentDraw d;
  d.p = p;
  d.kind = DesignKind::kUnit;
  d.z.resize(n);
  fill_bernoulli(d.z, p, seed, trial);
  return d;
}

TreatmentDraw draw_cluster_bernoulli(const Partition& partition, double p, std::uint64_t seed,
                                     std::uint64_t trial) {
  check_p(p);
  std::vector<Treatment> bits(partition.num_clusters());
  fill_bernoulli(bits, p, seed, trial);
  return broadcast_clusters(partition, std::move(bits), p);
}

TreatmentDraw broadcast_clusters(const Partition& partition, std::vector<Treatment> cluster_z,
                                 double p) {
  check_p(p);
  if (cluster_z.size() != partition.num_clusters()) {
    throw std::invalid_argument("need one treatment bit per cluster");
  }
  TreatmentDraw d;
  d.p = p;
  d.kind = DesignKind::kCluster;
  d.z.resize(partition.num_nodes());
  for (NodeId i = 0; i < d.z.size(); ++i) {
    const auto b = cluster_z[partition.cluster_of(i)];
    if (b > 1) throw std::invalid_argument("treatment bits must be 0 or 1");
    d.z[i] = b;
  }
  d.cluster_z = std::move(cluster_z);
  return d;
}

void check_cluster_draw(const TreatmentDraw& draw, const Partition& partition) {
  if (draw.kind != DesignKind::kCluster) {
    throw std::invalid_argument("cluster estimator needs a cluster-level draw");
  }
  if (draw.cluster_z.size() != partition.num_clusters() || draw.z.size() != partition.num_nodes()) {
    throw std::invalid_argument("treatment draw does not match the partition");
  }
  for (NodeId i = 0; i < draw.z.size(); ++i) {
    if (draw.z[i] != draw.cluster_z[partition.cluster_of(i)]) {
      throw std::invalid_argument("node " + std::to_string(i) +
                                  " does not share its cluster's treatment");
    }
  }
}

}  // namespace dnest
