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

// Python bindings. Configs cross the boundary as JSON text; the package's
// __init__ serializes dicts before calling in.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "dnest/config.hpp"
#include "dnest/estimators.hpp"
#include "dnest/graph.hpp"
#include "dnest/harness.hpp"
#include "dnest/oracle.hpp"
#include "dnest/partition.hpp"
#include "dnest/rideshare.hpp"
#include "dnest/version.hpp"

namespace py = pybind11;
using namespace dnest;

namespace {

Estimator estimator_from(const std::string& name) {
  const auto e = parse_estimator(name);
  if (!e) throw py::value_error("unknown estimator '" + name + "'");
  return *e;
}

ExperimentConfig config_from(const std::string& json) {
  try {
    return parse_experiment_text(json);
  } catch (const ConfigError& e) {
    throw py::value_error(e.what());
  }
}

py::dict summary_dict(const TrialSummary& s) {
  py::dict d;
  d["estimator"] = std::string(estimator_name(s.estimator));
  d["partition_id"] = s.partition_id;
  d["trials"] = s.trials;
  d["dropped"] = s.dropped;
  d["ate"] = s.ate;
  d["absolute"] = s.absolute;
  d["mean_estimate"] = s.mean_estimate;
  d["mean_rel_err"] = s.mean_rel_err;
  d["ci"] = py::make_tuple(s.ci_lo, s.ci_hi);
  d["rmse"] = s.rmse;
  d["bias"] = s.bias;
  d["variance"] = s.variance;
  d["ht_unexposed"] = s.ht_unexposed;
  return d;
}

double estimate_py(const std::string& name, const InterferenceGraph& g,
                   const std::vector<Treatment>& z, const std::vector<double>& y, double p,
                   const Partition* partition) {
  const Estimator e = estimator_from(name);
  if (y.size() != g.num_nodes()) throw py::value_error("y needs one entry per node");
  TrialInputs in;
  in.graph = &g;
  in.y = y;
  in.p = p;
  std::optional<ClusterNeighborhoods> hoods;
  std::vector<Treatment> unit_z;
  if (is_cluster_estimator(e)) {
    if (partition == nullptr) throw py::value_error("cluster estimators need a partition");
    if (z.size() != partition->num_clusters()) {
      throw py::value_error("cluster estimators take one treatment per cluster");
    }
    hoods.emplace(g, *partition);
    unit_z.resize(g.num_nodes());
    for (NodeId i = 0; i < g.num_nodes(); ++i) unit_z[i] = z[partition->cluster_of(i)];
    in.clusters = &*hoods;
    in.cluster_z = z;
    in.z = unit_z;
  } else {
    if (z.size() != g.num_nodes()) throw py::value_error("z needs one entry per node");
    in.z = z;
  }
  const auto r = estimate(e, in);
  if (!r.usable()) return std::numeric_limits<double>::quiet_NaN();
  return r.estimate;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Network-interference ATE estimators, designs and experiment harness";
  m.attr("__version__") = kVersion;

  py::class_<InterferenceGraph>(m, "Graph")
      .def_static(
          "from_arcs",
          [](std::size_t n, std::vector<std::pair<NodeId, NodeId>> arcs, bool directed) {
            return InterferenceGraph::from_arcs(n, std::move(arcs), directed);
          },
          py::arg("n"), py::arg("arcs"), py::arg("directed") = false)
      .def_static("erdos_renyi", &erdos_renyi, py::arg("n"), py::arg("expected_degree"),
                  py::arg("seed") = 0)
      .def_static("watts_strogatz", &watts_strogatz, py::arg("n"), py::arg("d"), py::arg("q"),
                  py::arg("seed") = 0)
      .def_static("ring", &ring_lattice, py::arg("n"), py::arg("d"))
      .def_static(
          "from_edge_list",
          [](const std::string& text, bool directed) {
            EdgeListOptions o;
            o.directed = directed;
            return from_edge_list(text, o).graph;
          },
          py::arg("text"), py::arg("directed") = false)
      .def_property_readonly("num_nodes", &InterferenceGraph::num_nodes)
      .def_property_readonly("num_edges", &InterferenceGraph::num_edges)
      .def_property_readonly("max_degree", &InterferenceGraph::max_degree)
      .def_property_readonly("directed", &InterferenceGraph::directed)
      .def("neighbors",
           [](const InterferenceGraph& g, NodeId i) {
             const auto s = g.neighbors(i);
             return std::vector<NodeId>(s.begin(), s.end());
           })
      .def("in_neighbors",
           [](const InterferenceGraph& g, NodeId i) {
             const auto s = g.in_neighbors(i);
             return std::vector<NodeId>(s.begin(), s.end());
           })
      .def("to_edge_list", &to_edge_list);

  py::class_<Partition>(m, "Partition")
      .def_static("blocks", &contiguous_blocks, py::arg("n"), py::arg("m"))
      .def_static("singleton", &singleton, py::arg("n"))
      .def_static("random_balanced", &random_balanced, py::arg("n"), py::arg("clusters"),
                  py::arg("seed") = 0)
      .def_static(
          "from_labels",
          [](const std::vector<std::uint64_t>& labels) { return Partition::from_labels(labels); })
      .def_property_readonly("num_clusters", &Partition::num_clusters)
      .def("cluster_of", &Partition::cluster_of);

  m.def("estimate", &estimate_py, py::arg("estimator"), py::arg("graph"), py::arg("z"),
        py::arg("y"), py::arg("p"), py::arg("partition") = nullptr,
        "Point estimate from one assignment. Cluster estimators take one treatment per cluster.");

  m.def("two_point_moments", [](double p) {
    const auto mo = two_point_moments(p);
    py::dict d;
    d["mean_eta"] = mo.mean_eta;
    d["mean_abs_eta"] = mo.mean_abs_eta;
    d["mean_xi"] = mo.mean_xi;
    d["mean_eta_sq"] = mo.mean_eta_sq;
    d["mean_xi_sq"] = mo.mean_xi_sq;
    return d;
  });

  m.def("_run_experiment", [](const std::string& json) {
    const auto config = config_from(json);
    py::list out;
    for (std::size_t r = 0; r < config.replicates; ++r) {
      Instance inst;
      TrialRun run;
      {
        py::gil_scoped_release release;
        inst = build_instance(config, r);
        run = run_trials(inst, config);
      }
      for (const auto& s : summarize(run, inst.ate, config.absolute)) {
        auto d = summary_dict(s);
        d["replicate"] = r;
        out.append(d);
      }
    }
    return out;
  });

  m.def("_exact_moments", [](const std::string& json, const std::string& estimator) {
    const auto config = config_from(json);
    const Instance inst = build_instance(config);
    const auto mo = enumerate_moments(*inst.model, config.p, estimator_from(estimator),
                                      inst.partition ? &*inst.partition : nullptr);
    py::dict d;
    d["expectation"] = mo.expectation;
    d["variance"] = mo.variance;
    d["ate"] = mo.ate;
    d["bias"] = mo.bias;
    return d;
  });

  m.def("_certify", [](const std::string& json) {
    const auto config = config_from(json);
    const Instance inst = build_instance(config);
    std::vector<Certificate> certs{certify_dn_bias(*inst.model, config.p),
                                   certify_dn_variance(*inst.model, config.p),
                                   certify_ht_unbiased(*inst.model, config.p)};
    if (inst.partition) {
      certs.push_back(certify_dn_cluster_bias(*inst.model, *inst.partition, config.p));
    }
    std::vector<std::string> out;
    for (const auto& c : certs) out.push_back(c.to_json());
    return out;
  });

  m.def("_rideshare", [](const std::string& json) {
    rideshare::RideshareConfig config;
    try {
      config = rideshare::parse_rideshare_config(Json::parse(json));
    } catch (const ConfigError& e) {
      throw py::value_error(e.what());
    }
    rideshare::PricingExperiment result;
    {
      py::gil_scoped_release release;
      result = rideshare::run_pricing_experiment(config.city, config.policy, config.durations,
                                                 config.p, config.trials, config.seed,
                                                 config.options);
    }
    py::dict d;
    d["ate"] = result.ate;
    d["eyeballs"] = result.num_eyeballs;
    d["graph_edges"] = result.graph_edges;
    py::list rows;
    for (const auto& dur : result.durations) {
      for (const auto& s : dur.summaries) {
        auto row = summary_dict(s);
        row["duration_min"] = dur.duration_min;
        row["num_clusters"] = dur.num_clusters;
        rows.append(row);
      }
    }
    d["summaries"] = rows;
    return d;
  });
}
