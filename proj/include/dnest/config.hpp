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

// Experiment configuration: typed specs mirroring the JSON documents read by
// the CLI, with validation that reports every problem at once, each tagged by
// a JSON pointer into the source document.

#ifndef DNEST_CONFIG_HPP_
#define DNEST_CONFIG_HPP_

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dnest/design.hpp"
#include "dnest/estimators.hpp"
#include "dnest/outcomes.hpp"
#include "json.hpp"

namespace dnest {

using Json = nlohmann::ordered_json;

struct ConfigIssue {
  std::string pointer;  // e.g. "/model/c2"
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

// Collects issues while walking a JSON document. Unknown keys are reported so
// that typos do not silently fall back to defaults.
class ConfigReader {
 public:
  ConfigReader(const Json& node, std::string pointer, std::vector<ConfigIssue>& issues);

  bool has(std::string_view key) const;
  ConfigReader child(std::string_view key) const;  // missing key -> empty object
  // Marks a key as consumed when the caller parses it by hand.
  void touch(std::string_view key) const { seen_.emplace_back(key); }
  const Json& node() const { return node_; }
  const std::string& pointer() const { return pointer_; }

  double number(std::string_view key, double fallback);
  std::uint64_t integer(std::string_view key, std::uint64_t fallback);
  std::optional<std::uint64_t> optional_integer(std::string_view key);
  std::optional<double> optional_number(std::string_view key);
  bool boolean(std::string_view key, bool fallback);
  std::string string(std::string_view key, std::string fallback);
  std::vector<double> numbers(std::string_view key);
  std::vector<std::vector<double>> matrix(std::string_view key);

  void fail(std::string_view key, std::string message) const;
  // Reports keys that were never read. Call once every field is consumed.
  void finish() const;

 private:
  const Json* lookup(std::string_view key);

  const Json& node_;
  std::string pointer_;
  std::vector<ConfigIssue>& issues_;
  mutable std::vector<std::string> seen_;
};

struct GraphSpec {
  // erdos_renyi | watts_strogatz | ring | edge_list | model (markovian window graph)
  std::string type = "watts_strogatz";
  std::size_t n = 1000;
  double expected_degree = 10.0;  // erdos_renyi
  std::size_t d = 10;             // watts_strogatz / ring
  double q = 0.1;                 // watts_strogatz
  std::optional<std::uint64_t> seed;  // derived from the master seed when absent
  std::string path;                   // edge_list
  bool directed = false;              // edge_list
};

struct PartitionSpec {
  // singleton | blocks | random_balanced | label_propagation | file
  std::string type = "singleton";
  std::size_t m = 1;          // blocks: nodes per block
  std::size_t clusters = 1;   // random_balanced
  std::size_t max_rounds = 100;  // label_propagation
  std::optional<std::uint64_t> seed;
  std::string path;  // file
  std::string id;    // label used in outputs; generated when empty

  std::string label() const;
};

struct ModelSpec {
  // linear | multiplicative | low_order | benchmark | markovian
  std::string type = "benchmark";
  double noise_std = 0.0;
  double delta = 0.5;  // linear / multiplicative / low_order
  // benchmark; c0 is also the multiplicative scale
  double c0 = 1.0, c1 = 0.1, c2 = 0.05;
  // linear: alpha_i = alpha, f_i = alpha + beta z_i + delta sum_j c_ij z_j
  double alpha = 0.0, beta = 1.0;
  // linear / multiplicative: c_ij ~ U[weight_lo, weight_hi]
  double weight_lo = 1.0, weight_hi = 1.0;
  // low_order
  LowOrderConfig low_order;
  std::optional<std::uint64_t> seed;  // weights / random coefficients
  // markovian
  MarkovChainSpec chain;
  std::size_t horizon = 0;
  std::size_t truncation = 0;
};

struct ExperimentConfig {
  std::string run_id = "run";
  GraphSpec graph;
  ModelSpec model;
  DesignKind design = DesignKind::kUnit;
  PartitionSpec partition;  // cluster design only
  std::vector<Estimator> estimators{Estimator::kDMRatio, Estimator::kDN};
  double p = 0.5;
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
  // Independent graph/model draws; each gets its own derived seeds and the
  // harness reports per-replicate and pooled summaries.
  std::size_t replicates = 1;
  std::optional<double> ate;  // overrides the computed ground truth
  bool absolute = false;      // absolute-error summaries (needed when ATE = 0)
  std::vector<PartitionSpec> sweep;
};

// Fresh, independent seed for a named component of an experiment.
std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index = 0);

GraphSpec parse_graph_spec(ConfigReader r);
PartitionSpec parse_partition_spec(ConfigReader r);
ModelSpec parse_model_spec(ConfigReader r);

// Throws ConfigError listing every issue found.
ExperimentConfig parse_experiment(const Json& doc);
ExperimentConfig parse_experiment_text(std::string_view text);

Json to_json(const GraphSpec& spec);
Json to_json(const PartitionSpec& spec);
Json to_json(const ModelSpec& spec);
// Fully resolved: every default is written out, so the document re-parses to
// an identical config.
Json to_json(const ExperimentConfig& config);

// Reads a file or throws std::runtime_error naming it.
std::string read_text_file(const std::string& path);

}  // namespace dnest

#endif  // DNEST_CONFIG_HPP_
