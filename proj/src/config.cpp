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

#include "dnest/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dnest/rng.hpp"

namespace dnest {

namespace {

const Json& empty_object() {
  static const Json kEmpty = Json::object();
  return kEmpty;
}

std::string escape_pointer_token(std::string_view key) {
  std::string out;
  for (char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::string s = "invalid configuration:";
  for (const auto& i : issues) s += "\n  " + (i.pointer.empty() ? "/" : i.pointer) + ": " + i.message;
  return s;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

ConfigReader::ConfigReader(const Json& node, std::string pointer, std::vector<ConfigIssue>& issues)
    : node_(node), pointer_(std::move(pointer)), issues_(issues) {
  if (!node_.is_object()) issues_.push_back({pointer_, "expected an object"});
}

bool ConfigReader::has(std::string_view key) const {
  return node_.is_object() && node_.contains(key);
}

const Json* ConfigReader::lookup(std::string_view key) {
  seen_.emplace_back(key);
  if (!node_.is_object()) return nullptr;
  const auto it = node_.find(key);
  if (it == node_.end() || it->is_null()) return nullptr;
  return &*it;
}

ConfigReader ConfigReader::child(std::string_view key) const {
  seen_.emplace_back(key);
  const std::string ptr = pointer_ + "/" + escape_pointer_token(key);
  if (has(key) && !node_.at(key).is_null()) return ConfigReader(node_.at(key), ptr, issues_);
  return ConfigReader(empty_object(), ptr, issues_);
}

void ConfigReader::fail(std::string_view key, std::string message) const {
  issues_.push_back({key.empty() ? pointer_ : pointer_ + "/" + escape_pointer_token(key),
                     std::move(message)});
}

double ConfigReader::number(std::string_view key, double fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) {
    fail(key, "expected a number");
    return fallback;
  }
  return v->get<double>();
}

std::optional<double> ConfigReader::optional_number(std::string_view key) {
  const Json* v = lookup(key);
  if (v == nullptr) return std::nullopt;
  if (!v->is_number()) {
    fail(key, "expected a number");
    return std::nullopt;
  }
  return v->get<double>();
}

std::uint64_t ConfigReader::integer(std::string_view key, std::uint64_t fallback) {
  return optional_integer(key).value_or(fallback);
}

std::optional<std::uint64_t> ConfigReader::optional_integer(std::string_view key) {
  const Json* v = lookup(key);
  if (v == nullptr) return std::nullopt;
  if (v->is_number_unsigned()) return v->get<std::uint64_t>();
  if (v->is_number_integer()) {
    fail(key, "expected a non-negative integer");
    return std::nullopt;
  }
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (d >= 0 && d == std::floor(d) && d < 0x1p63) return static_cast<std::uint64_t>(d);
  }
  fail(key, "expected a non-negative integer");
  return std::nullopt;
}

bool ConfigReader::boolean(std::string_view key, bool fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_boolean()) {
    fail(key, "expected true or false");
    return fallback;
  }
  return v->get<bool>();
}

std::string ConfigReader::string(std::string_view key, std::string fallback) {
  const Json* v = lookup(key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) {
    fail(key, "expected a string");
    return fallback;
  }
  return v->get<std::string>();
}

std::vector<double> ConfigReader::numbers(std::string_view key) {
  const Json* v = lookup(key);
  std::vector<double> out;
  if (v == nullptr) return out;
  if (!v->is_array()) {
    fail(key, "expected an array of numbers");
    return out;
  }
  for (std::size_t i = 0; i < v->size(); ++i) {
    if (!(*v)[i].is_number()) {
      issues_.push_back({pointer_ + "/" + escape_pointer_token(key) + "/" + std::to_string(i),
                         "expected a number"});
      continue;
    }
    out.push_back((*v)[i].get<double>());
  }
  return out;
}

std::vector<std::vector<double>> ConfigReader::matrix(std::string_view key) {
  const Json* v = lookup(key);
  std::vector<std::vector<double>> out;
  if (v == nullptr) return out;
  if (!v->is_array()) {
    fail(key, "expected an array of rows");
    return out;
  }
  for (std::size_t i = 0; i < v->size(); ++i) {
    const auto& row = (*v)[i];
    const std::string rp = pointer_ + "/" + escape_pointer_token(key) + "/" + std::to_string(i);
    if (!row.is_array()) {
      issues_.push_back({rp, "expected an array of numbers"});
      continue;
    }
    std::vector<double> r;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (!row[j].is_number()) {
        issues_.push_back({rp + "/" + std::to_string(j), "expected a number"});
        continue;
      }
      r.push_back(row[j].get<double>());
    }
    out.push_back(std::move(r));
  }
  return out;
}

void ConfigReader::finish() const {
  if (!node_.is_object()) return;
  for (auto it = node_.begin(); it != node_.end(); ++it) {
    if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
      fail(it.key(), "unknown key");
    }
  }
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view component, std::uint64_t index) {
  // FNV-1a over the component name, then mixed with the master seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : component) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return rng::mix(rng::mix(master, h), index);
}

std::string PartitionSpec::label() const {
  if (!id.empty()) return id;
  if (type == "blocks") return "blocks_m" + std::to_string(m);
  if (type == "random_balanced") return "random_c" + std::to_string(clusters);
  return type;
}

GraphSpec parse_graph_spec(ConfigReader r) {
  GraphSpec g;
  g.type = r.string("type", g.type);
  if (g.type == "erdos_renyi") {
    g.n = r.integer("n", g.n);
    g.expected_degree = r.number("expected_degree", g.expected_degree);
    if (g.n == 0) r.fail("n", "must be at least 1");
    if (g.expected_degree < 0 || (g.n > 1 && g.expected_degree > static_cast<double>(g.n - 1))) {
      r.fail("expected_degree", "must be in [0, n - 1]");
    }
  } else if (g.type == "watts_strogatz" || g.type == "ring") {
    g.n = r.integer("n", g.n);
    g.d = r.integer("d", g.d);
    if (g.type == "watts_strogatz") g.q = r.number("q", g.q);
    else g.q = 0.0;
    if (g.n == 0) r.fail("n", "must be at least 1");
    if (g.d % 2 != 0) r.fail("d", "must be even");
    if (g.d >= g.n && g.n > 0) r.fail("d", "must be below n");
    if (!(g.q >= 0.0 && g.q <= 1.0)) r.fail("q", "must be in [0, 1]");
  } else if (g.type == "edge_list") {
    g.path = r.string("path", "");
    g.directed = r.boolean("directed", false);
    if (g.path.empty()) r.fail("path", "required for an edge_list graph");
  } else if (g.type == "model") {
    // Graph is implied by the outcome model (markovian window graph).
  } else {
    r.fail("type", "unknown graph type '" + g.type +
                       "' (expected erdos_renyi, watts_strogatz, ring, edge_list or model)");
  }
  g.seed = r.optional_integer("seed");
  r.finish();
  return g;
}

PartitionSpec parse_partition_spec(ConfigReader r) {
  PartitionSpec s;
  s.type = r.string("type", s.type);
  s.id = r.string("id", "");
  if (s.type == "blocks") {
    s.m = r.integer("m", s.m);
    if (s.m == 0) r.fail("m", "must be at least 1");
  } else if (s.type == "random_balanced") {
    s.clusters = r.integer("clusters", s.clusters);
    s.seed = r.optional_integer("seed");
    if (s.clusters == 0) r.fail("clusters", "must be at least 1");
  } else if (s.type == "label_propagation") {
    s.max_rounds = r.integer("max_rounds", s.max_rounds);
    s.seed = r.optional_integer("seed");
  } else if (s.type == "file") {
    s.path = r.string("path", "");
    if (s.path.empty()) r.fail("path", "required for a file partition");
  } else if (s.type != "singleton") {
    r.fail("type", "unknown partition type '" + s.type +
                       "' (expected singleton, blocks, random_balanced, label_propagation or file)");
  }
  r.finish();
  return s;
}

ModelSpec parse_model_spec(ConfigReader r) {
  ModelSpec m;
  m.type = r.string("type", m.type);
  m.noise_std = r.number("noise_std", m.noise_std);
  if (!(m.noise_std >= 0.0)) r.fail("noise_std", "must be non-negative");
  auto check_finite = [&](std::string_view key, double v) {
    if (!std::isfinite(v)) r.fail(key, "must be finite");
  };
  if (m.type == "benchmark") {
    m.c0 = r.number("c0", m.c0);
    m.c1 = r.number("c1", m.c1);
    m.c2 = r.number("c2", m.c2);
    check_finite("c0", m.c0);
    check_finite("c1", m.c1);
    if (!(m.c2 > -1.0) || !std::isfinite(m.c2)) r.fail("c2", "must be finite and above -1");
  } else if (m.type == "linear") {
    m.alpha = r.number("alpha", m.alpha);
    m.beta = r.number("beta", m.beta);
    m.delta = r.number("delta", m.delta);
    m.weight_lo = r.number("weight_lo", m.weight_lo);
    m.weight_hi = r.number("weight_hi", m.weight_hi);
    m.seed = r.optional_integer("seed");
  } else if (m.type == "multiplicative") {
    m.c0 = r.number("c0", m.c0);
    m.delta = r.number("delta", m.delta);
    m.weight_lo = r.number("weight_lo", m.weight_lo);
    m.weight_hi = r.number("weight_hi", m.weight_hi);
    m.seed = r.optional_integer("seed");
  } else if (m.type == "low_order") {
    auto& lo = m.low_order;
    lo.max_order = r.integer("max_order", lo.max_order);
    lo.terms_per_node = r.integer("terms_per_node", lo.terms_per_node);
    lo.coefficient_bound = r.number("coefficient_bound", lo.coefficient_bound);
    lo.baseline_lo = r.number("baseline_lo", lo.baseline_lo);
    lo.baseline_hi = r.number("baseline_hi", lo.baseline_hi);
    lo.direct_lo = r.number("direct_lo", lo.direct_lo);
    lo.direct_hi = r.number("direct_hi", lo.direct_hi);
    m.delta = r.number("delta", lo.delta);
    lo.delta = m.delta;
    lo.noise_std = m.noise_std;
    m.seed = r.optional_integer("seed");
    if (lo.max_order < 2) r.fail("max_order", "must be at least 2");
    if (lo.coefficient_bound < 0) r.fail("coefficient_bound", "must be non-negative");
    if (lo.baseline_lo > lo.baseline_hi) r.fail("baseline_lo", "must not exceed baseline_hi");
    if (lo.direct_lo > lo.direct_hi) r.fail("direct_lo", "must not exceed direct_hi");
  } else if (m.type == "markovian") {
    auto c = r.child("chain");
    m.chain.initial = c.numbers("initial");
    m.chain.num_states = c.integer("num_states", m.chain.initial.size());
    m.chain.transition = c.matrix("transition");
    m.chain.perturbation = c.matrix("perturbation");
    m.chain.reward_control = c.numbers("reward_control");
    m.chain.reward_treated = c.numbers("reward_treated");
    m.chain.delta = c.number("delta", m.chain.delta);
    c.finish();
    m.horizon = r.integer("horizon", 0);
    m.truncation = r.integer("truncation", 0);
    if (m.horizon == 0) r.fail("horizon", "must be at least 1");
    try {
      m.chain.validate();
    } catch (const std::exception& e) {
      r.fail("chain", e.what());
    }
  } else {
    r.fail("type", "unknown model type '" + m.type +
                       "' (expected linear, multiplicative, low_order, benchmark or markovian)");
  }
  if ((m.type == "linear" || m.type == "multiplicative") && m.weight_lo > m.weight_hi) {
    r.fail("weight_lo", "must not exceed weight_hi");
  }
  r.finish();
  return m;
}

ExperimentConfig parse_experiment(const Json& doc) {
  std::vector<ConfigIssue> issues;
  ConfigReader r(doc, "", issues);
  ExperimentConfig c;
  c.run_id = r.string("run_id", c.run_id);
  if (c.run_id.empty() || c.run_id.find_first_of(",\n\"") != std::string::npos) {
    r.fail("run_id", "must be non-empty without commas, quotes or newlines");
  }
  c.model = parse_model_spec(r.child("model"));
  if (r.has("graph")) {
    c.graph = parse_graph_spec(r.child("graph"));
  } else {
    r.touch("graph");
    if (c.model.type == "markovian") c.graph.type = "model";
  }
  if (c.model.type == "markovian" && c.graph.type != "model") {
    r.fail("graph", "a markovian model defines its own graph; use {\"type\": \"model\"}");
  }
  if (c.model.type != "markovian" && c.graph.type == "model") {
    r.fail("graph", "graph type 'model' requires a markovian model");
  }

  const std::string design = r.string("design", "unit");
  if (design == "unit") c.design = DesignKind::kUnit;
  else if (design == "cluster") c.design = DesignKind::kCluster;
  else r.fail("design", "expected 'unit' or 'cluster'");
  if (r.has("partition")) {
    c.partition = parse_partition_spec(r.child("partition"));
    if (c.design == DesignKind::kUnit) {
      r.fail("partition", "only meaningful with \"design\": \"cluster\"");
    }
  } else {
    r.touch("partition");
  }

  if (r.has("estimators")) {
    r.touch("estimators");
    const auto& list = doc.at("estimators");
    if (!list.is_array() || list.empty()) {
      r.fail("estimators", "expected a non-empty array of estimator names");
    } else {
      c.estimators.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string ptr = "/estimators/" + std::to_string(i);
        if (!list[i].is_string()) {
          issues.push_back({ptr, "expected an estimator name"});
          continue;
        }
        const auto e = parse_estimator(list[i].get<std::string>());
        if (!e) {
          issues.push_back({ptr, "unknown estimator '" + list[i].get<std::string>() +
                                     "' (expected dm, dm_ratio, ht, dn, dn_credit, dn_cluster "
                                     "or ht_cluster)"});
          continue;
        }
        if (std::find(c.estimators.begin(), c.estimators.end(), *e) != c.estimators.end()) {
          issues.push_back({ptr, "duplicate estimator"});
          continue;
        }
        if (is_cluster_estimator(*e) && c.design == DesignKind::kUnit && doc.value("sweep", Json()).is_null()) {
          issues.push_back({ptr, "cluster estimator requires \"design\": \"cluster\""});
          continue;
        }
        c.estimators.push_back(*e);
      }
    }
  }

  c.p = r.number("p", c.p);
  if (!(c.p > 0.0 && c.p < 1.0)) {
    r.fail("p", "treatment probability must be in (0, 1), got " + format_double(c.p));
  }
  c.trials = r.integer("trials", c.trials);
  if (c.trials == 0) r.fail("trials", "must be at least 1");
  c.seed = r.integer("seed", c.seed);
  c.parallel = r.integer("parallel", c.parallel);
  if (c.parallel == 0) r.fail("parallel", "must be at least 1");
  c.replicates = r.integer("replicates", c.replicates);
  if (c.replicates == 0) r.fail("replicates", "must be at least 1");
  c.ate = r.optional_number("ate");
  c.absolute = r.boolean("absolute", c.absolute);
  if (c.ate && !std::isfinite(*c.ate)) r.fail("ate", "must be finite");
  if (c.ate && *c.ate == 0.0 && !c.absolute) {
    r.fail("ate", "relative error is undefined for ATE = 0; set \"absolute\": true");
  }

  if (r.has("sweep")) {
    r.touch("sweep");
    const auto& list = doc.at("sweep");
    if (!list.is_array() || list.empty()) {
      r.fail("sweep", "expected a non-empty array of partition specs");
    } else {
      for (std::size_t i = 0; i < list.size(); ++i) {
        c.sweep.push_back(
            parse_partition_spec(ConfigReader(list[i], "/sweep/" + std::to_string(i), issues)));
      }
      std::vector<std::string> labels;
      for (std::size_t i = 0; i < c.sweep.size(); ++i) {
        const auto l = c.sweep[i].label();
        if (std::find(labels.begin(), labels.end(), l) != labels.end()) {
          issues.push_back({"/sweep/" + std::to_string(i), "duplicate partition id '" + l + "'"});
        }
        labels.push_back(l);
      }
    }
  }
  r.finish();
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return c;
}

ExperimentConfig parse_experiment_text(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ConfigError({{"", std::string("malformed JSON: ") + e.what()}});
  }
  return parse_experiment(doc);
}

Json to_json(const GraphSpec& g) {
  Json j;
  j["type"] = g.type;
  if (g.type == "erdos_renyi") {
    j["n"] = g.n;
    j["expected_degree"] = g.expected_degree;
  } else if (g.type == "watts_strogatz" || g.type == "ring") {
    j["n"] = g.n;
    j["d"] = g.d;
    if (g.type == "watts_strogatz") j["q"] = g.q;
  } else if (g.type == "edge_list") {
    j["path"] = g.path;
    j["directed"] = g.directed;
  }
  if (g.seed) j["seed"] = *g.seed;
  return j;
}

Json to_json(const PartitionSpec& s) {
  Json j;
  j["type"] = s.type;
  if (!s.id.empty()) j["id"] = s.id;
  if (s.type == "blocks") j["m"] = s.m;
  if (s.type == "random_balanced") j["clusters"] = s.clusters;
  if (s.type == "label_propagation") j["max_rounds"] = s.max_rounds;
  if (s.type == "file") j["path"] = s.path;
  if (s.seed) j["seed"] = *s.seed;
  return j;
}

Json to_json(const ModelSpec& m) {
  Json j;
  j["type"] = m.type;
  j["noise_std"] = m.noise_std;
  if (m.type == "benchmark") {
    j["c0"] = m.c0;
    j["c1"] = m.c1;
    j["c2"] = m.c2;
  } else if (m.type == "linear") {
    j["alpha"] = m.alpha;
    j["beta"] = m.beta;
    j["delta"] = m.delta;
    j["weight_lo"] = m.weight_lo;
    j["weight_hi"] = m.weight_hi;
  } else if (m.type == "multiplicative") {
    j["c0"] = m.c0;
    j["delta"] = m.delta;
    j["weight_lo"] = m.weight_lo;
    j["weight_hi"] = m.weight_hi;
  } else if (m.type == "low_order") {
    const auto& lo = m.low_order;
    j["max_order"] = lo.max_order;
    j["terms_per_node"] = lo.terms_per_node;
    j["coefficient_bound"] = lo.coefficient_bound;
    j["baseline_lo"] = lo.baseline_lo;
    j["baseline_hi"] = lo.baseline_hi;
    j["direct_lo"] = lo.direct_lo;
    j["direct_hi"] = lo.direct_hi;
    j["delta"] = m.delta;
  } else if (m.type == "markovian") {
    Json c;
    c["num_states"] = m.chain.num_states;
    c["initial"] = m.chain.initial;
    c["transition"] = m.chain.transition;
    c["perturbation"] = m.chain.perturbation;
    c["reward_control"] = m.chain.reward_control;
    c["reward_treated"] = m.chain.reward_treated;
    c["delta"] = m.chain.delta;
    j["chain"] = c;
    j["horizon"] = m.horizon;
    j["truncation"] = m.truncation;
  }
  if (m.seed) j["seed"] = *m.seed;
  return j;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["run_id"] = c.run_id;
  j["graph"] = to_json(c.graph);
  j["model"] = to_json(c.model);
  j["design"] = std::string(design_name(c.design));
  if (c.design == DesignKind::kCluster) j["partition"] = to_json(c.partition);
  Json est = Json::array();
  for (auto e : c.estimators) est.push_back(std::string(estimator_name(e)));
  j["estimators"] = est;
  j["p"] = c.p;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["parallel"] = c.parallel;
  j["replicates"] = c.replicates;
  if (c.ate) j["ate"] = *c.ate;
  j["absolute"] = c.absolute;
  if (!c.sweep.empty()) {
    Json s = Json::array();
    for (const auto& p : c.sweep) s.push_back(to_json(p));
    j["sweep"] = s;
  }
  return j;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dnest
