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

// Bernoulli treatment designs. Trial t's draw is a pure function of
// (seed, t), so trials can be generated in any order or in parallel.

#ifndef DNEST_DESIGN_HPP_
#define DNEST_DESIGN_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

#include "dnest/outcomes.hpp"
#include "dnest/partition.hpp"

namespace dnest {

enum class DesignKind { kUnit, kCluster };

std::string_view design_name(DesignKind kind);

struct TreatmentDraw {
  std::vector<Treatment> z;          // per node
  std::vector<Treatment> cluster_z;  // per cluster; empty for unit draws
  double p = 0.5;
  DesignKind kind = DesignKind::kUnit;
};

// p in [0, 1]; the estimators themselves insist on (0, 1).
TreatmentDraw draw_unit_bernoulli(std::size_t n, double p, std::uint64_t seed,
                                  std::uint64_t trial = 0);
TreatmentDraw draw_cluster_bernoulli(const Partition& partition, double p, std::uint64_t seed,
                                     std::uint64_t trial = 0);

// Cluster draw from explicit cluster bits.
TreatmentDraw broadcast_clusters(const Partition& partition, std::vector<Treatment> cluster_z,
                                 double p);

// Throws std::invalid_argument unless `draw` is a consistent cluster draw over
// `partition` (sizes match, members share their cluster's bit).
void check_cluster_draw(const TreatmentDraw& draw, const Partition& partition);

}  // namespace dnest

#endif  // DNEST_DESIGN_HPP_
