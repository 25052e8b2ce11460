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

#include "dnest/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "dnest/harness.hpp"
#include "dnest/oracle.hpp"
#include "dnest/rideshare.hpp"
#include "dnest/version.hpp"

namespace dnest::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kInvalid = 2;

Json load_document(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::vector<ConfigIssue>{{"", std::string("not valid JSON: ") + e.what()}});
  }
}

// Collects output files and writes the manifest last.
class Outputs {
 public:
  Outputs(const std::string& dir, std::string command)
      : dir_(dir), command_(std::move(command)), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(dir_);
  }

  std::ofstream open(const std::string& name) {
    std::ofstream f(dir_ / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir_ / name).string());
    files_.push_back(name);
    return f;
  }

  void write_json(const std::string& name, const Json& j) { open(name) << j.dump(2) << '\n'; }

  void finish(const std::string& run_id, const Json& resolved, const Json& overrides) {
    write_json("config.resolved.json", resolved);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    Json m;
    m["run_id"] = run_id;
    m["command"] = command_;
    m["version"] = kVersion;
    m["config"] = resolved;
    m["overrides"] = overrides;
    m["duration_seconds"] = seconds;
    m["outputs"] = files_;
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    f << m.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write manifest");
  }

 private:
  fs::path dir_;
  std::string command_;
  std::chrono::steady_clock::time_point start_;
  std::vector<std::string> files_;
};

ExperimentConfig load_experiment(const CommandArgs& args, Json& applied) {
  Json doc = load_document(args.config_path);
  applied = args.overrides.apply(doc);
  return parse_experiment(doc);
}

Json instance_json(const Instance& inst, std::size_t replicate) {
  Json j;
  j["replicate"] = replicate;
  j["seed"] = inst.seed;
  j["nodes"] = inst.graph->num_nodes();
  j["edges"] = inst.graph->num_edges();
  j["max_degree"] = inst.graph->max_degree();
  j["ate"] = inst.ate;
  if (inst.partition) j["clusters"] = inst.partition->num_clusters();
  return j;
}

void print_summaries(std::ostream& out, std::span<const TrialSummary> rows) {
  for (const auto& s : rows) {
    out << "  " << estimator_name(s.estimator) << " [" << s.partition_id << "]: "
        << (s.absolute ? "mean_abs_err=" : "mean_rel_err=") << format_g17(s.mean_rel_err)
        << " rmse=" << format_g17(s.rmse) << " bias=" << format_g17(s.bias) << '\n';
  }
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "invalid config:\n";
    for (const auto& i : e.issues()) {
      err << "  " << (i.pointer.empty() ? "/" : i.pointer) << ": " << i.message << '\n';
    }
    return kInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

// Parses a certify suite: {"run_id", "seed", "cases": [experiment + "checks"]}.
struct CertifyCase {
  ExperimentConfig config;
  std::vector<std::string> checks;
};

struct CertifySuite {
  std::string run_id = "certify";
  std::uint64_t seed = 0;
  std::vector<CertifyCase> cases;
};

const char* const kChecks[] = {"dn_bias", "dn_cluster_bias", "dn_variance", "ht_unbiased"};

CertifySuite parse_suite(const Json& doc) {
  std::vector<ConfigIssue> issues;
  ConfigReader r(doc, "", issues);
  CertifySuite s;
  s.run_id = r.string("run_id", s.run_id);
  s.seed = r.integer("seed", s.seed);
  r.touch("cases");
  if (!doc.contains("cases") || !doc["cases"].is_array() || doc["cases"].empty()) {
    r.fail("cases", "expected a non-empty array of instances");
  } else {
    const auto& cases = doc["cases"];
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const std::string ptr = "/cases/" + std::to_string(i);
      if (!cases[i].is_object()) {
        issues.push_back({ptr, "expected an object"});
        continue;
      }
      Json body = cases[i];
      CertifyCase c;
      if (body.contains("checks")) {
        const auto& list = body["checks"];
        if (!list.is_array() || list.empty()) {
          issues.push_back({ptr + "/checks", "expected a non-empty array of check names"});
        } else {
          for (std::size_t k = 0; k < list.size(); ++k) {
            const std::string name = list[k].is_string() ? list[k].get<std::string>() : "";
            if (std::find(std::begin(kChecks), std::end(kChecks), name) == std::end(kChecks)) {
              issues.push_back({ptr + "/checks/" + std::to_string(k),
                                "unknown check; expected dn_bias, dn_cluster_bias, dn_variance "
                                "or ht_unbiased"});
            } else {
              c.checks.push_back(name);
            }
          }
        }
        body.erase("checks");
      } else {
        c.checks = {"dn_bias", "dn_variance", "ht_unbiased"};
      }
      if (!body.contains("seed")) body["seed"] = derive_seed(s.seed, "case", i);
      if (!body.contains("run_id")) body["run_id"] = s.run_id + "_case" + std::to_string(i);
      try {
        c.config = parse_experiment(body);
      } catch (const ConfigError& e) {
        for (const auto& issue : e.issues()) issues.push_back({ptr + issue.pointer, issue.message});
        continue;
      }
      const bool cluster_check =
          std::find(c.checks.begin(), c.checks.end(), "dn_cluster_bias") != c.checks.end();
      if (cluster_check && c.config.design != DesignKind::kCluster) {
        issues.push_back({ptr + "/checks", "dn_cluster_bias needs a cluster design"});
      }
      s.cases.push_back(std::move(c));
    }
  }
  r.finish();
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return s;
}

Json to_json(const CertifySuite& s) {
  Json j;
  j["run_id"] = s.run_id;
  j["seed"] = s.seed;
  Json cases = Json::array();
  for (const auto& c : s.cases) {
    Json cj = dnest::to_json(c.config);
    cj["checks"] = c.checks;
    cases.push_back(std::move(cj));
  }
  j["cases"] = std::move(cases);
  return j;
}

}  // namespace

Json Overrides::apply(Json& doc) const {
  Json applied = Json::object();
  if (!doc.is_object()) return applied;
  if (seed) applied["seed"] = doc["seed"] = *seed;
  if (trials) applied["trials"] = doc["trials"] = *trials;
  if (parallel) applied["parallel"] = doc["parallel"] = *parallel;
  return applied;
}

int cmd_gen_graph(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        Json applied;
        const auto config = load_experiment(args, applied);
        Outputs files(args.out_dir, "gen-graph");
        const Instance inst = build_instance(config);
        files.open("graph.edges") << to_edge_list(*inst.graph);
        files.write_json("graph.json", instance_json(inst, 0));
        files.finish(config.run_id, to_json(config), applied);
        out << "graph: " << inst.graph->num_nodes() << " nodes, " << inst.graph->num_edges()
            << " edges -> " << args.out_dir << '\n';
        return kOk;
      },
      err);
}

int cmd_gen_partition(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        Json applied;
        const auto config = load_experiment(args, applied);
        if (config.design != DesignKind::kCluster && config.sweep.empty()) {
          throw ConfigError(std::vector<ConfigIssue>{{"/design", "gen-partition needs a cluster design or a sweep"}});
        }
        Outputs files(args.out_dir, "gen-partition");
        const Instance inst = build_instance(config);
        Json stats = Json::array();
        auto emit = [&](const PartitionSpec& spec, const Partition& part) {
          const std::string name = "partition_" + spec.label() + ".txt";
          files.open(name) << to_partition_text(part);
          const auto cs = cluster_degree_stats(*inst.graph, part);
          Json j;
          j["id"] = spec.label();
          j["file"] = name;
          j["clusters"] = part.num_clusters();
          j["sum_out_of_cluster_sq"] = cs.sum_out_of_cluster_sq;
          j["max_cluster_neighbors"] = cs.max_cluster_neighbors;
          stats.push_back(j);
          out << "partition " << spec.label() << ": " << part.num_clusters() << " clusters\n";
        };
        if (config.design == DesignKind::kCluster) emit(config.partition, *inst.partition);
        for (const auto& spec : config.sweep) {
          emit(spec, build_partition(spec, *inst.graph, inst.seed, inst.original_ids));
        }
        files.write_json("partitions.json", stats);
        files.finish(config.run_id, to_json(config), applied);
        return kOk;
      },
      err);
}

int cmd_run(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        Json applied;
        const auto config = load_experiment(args, applied);
        Outputs files(args.out_dir, "run");
        auto trials = files.open("trials.csv");
        auto summary = files.open("summary.csv");
        const bool multi = config.replicates > 1;
        const CsvExtra replicate_col = multi ? CsvExtra{{"replicate", ""}} : CsvExtra{};
        write_trials_header(trials, replicate_col);
        write_summary_header(summary, replicate_col);
        const std::string partition_id =
            config.design == DesignKind::kCluster ? config.partition.label() : "none";
        std::vector<TrialRun> runs;
        std::vector<double> ates;
        Json instances = Json::array();
        for (std::size_t r = 0; r < config.replicates; ++r) {
          const Instance inst = build_instance(config, r);
          runs.push_back(run_trials(inst, config));
          ates.push_back(inst.ate);
          auto rows = summarize(runs.back(), inst.ate, config.absolute);
          for (auto& s : rows) s.partition_id = partition_id;
          const CsvExtra extra = multi ? CsvExtra{{"replicate", std::to_string(r)}} : CsvExtra{};
          write_trials_csv(trials, config.run_id, runs.back(), extra);
          write_summary_csv(summary, config.run_id, rows, extra);
          instances.push_back(instance_json(inst, r));
          out << "replicate " << r << ": ATE=" << format_g17(inst.ate) << '\n';
          print_summaries(out, rows);
        }
        if (multi) {
          std::vector<RunWithTruth> pooled;
          for (std::size_t r = 0; r < runs.size(); ++r) pooled.push_back({&runs[r], ates[r]});
          std::vector<TrialSummary> rows;
          for (auto e : runs.front().estimators) {
            rows.push_back(summarize_pooled(pooled, e, config.absolute));
          }
          write_summary_csv(summary, config.run_id, rows, {{"replicate", "pooled"}});
          out << "pooled:\n";
          print_summaries(out, rows);
        }
        files.write_json("instances.json", instances);
        trials.close();
        summary.close();
        files.finish(config.run_id, to_json(config), applied);
        return kOk;
      },
      err);
}

int cmd_sweep(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        Json applied;
        const auto config = load_experiment(args, applied);
        if (config.sweep.empty()) {
          throw ConfigError(std::vector<ConfigIssue>{{"/sweep", "sweep needs a non-empty list of partitions"}});
        }
        Outputs files(args.out_dir, "sweep");
        auto trials = files.open("sweep_trials.csv");
        auto summary = files.open("sweep_summary.csv");
        const bool multi = config.replicates > 1;
        CsvExtra trial_cols{{"partition_id", ""}};
        CsvExtra summary_cols{{"num_clusters", ""}};
        if (multi) {
          trial_cols.emplace_back("replicate", "");
          summary_cols.emplace_back("replicate", "");
        }
        write_trials_header(trials, trial_cols);
        write_summary_header(summary, summary_cols);
        Json argmin = Json::array();
        for (std::size_t r = 0; r < config.replicates; ++r) {
          const Instance inst = build_instance(config, r);
          const SweepResult result = sweep_clusters(inst, config, config.sweep);
          for (const auto& row : result.rows) {
            CsvExtra extra{{"num_clusters", std::to_string(row.num_clusters)}};
            if (multi) extra.emplace_back("replicate", std::to_string(r));
            write_summary_csv(summary, config.run_id, std::span(&row.summary, 1), extra);
          }
          for (const auto& [id, run] : result.runs) {
            CsvExtra extra{{"partition_id", id}};
            if (multi) extra.emplace_back("replicate", std::to_string(r));
            write_trials_csv(trials, config.run_id, run, extra);
          }
          Json best;
          best["replicate"] = r;
          best["ate"] = inst.ate;
          for (const auto& [e, id] : result.argmin) {
            best["argmin"][std::string(estimator_name(e))] = id;
            out << "replicate " << r << ": argmin RMSE " << estimator_name(e) << " -> " << id
                << " (" << format_g17(result.best(e)->summary.rmse) << ")\n";
          }
          argmin.push_back(best);
        }
        files.write_json("argmin.json", argmin);
        trials.close();
        summary.close();
        files.finish(config.run_id, to_json(config), applied);
        return kOk;
      },
      err);
}

int cmd_certify(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        Json doc = load_document(args.config_path);
        Json applied = Json::object();
        if (doc.is_object()) {
          // Exact checks have no trials and run single-threaded; only the seed applies.
          if (args.overrides.seed) applied["seed"] = doc["seed"] = *args.overrides.seed;
        }
        const CertifySuite suite = parse_suite(doc);
        Outputs files(args.out_dir, "certify");
        auto bounds = files.open("bounds.csv");
        Json certs = Json::array();
        std::size_t failed = 0, total = 0;
        for (std::size_t i = 0; i < suite.cases.size(); ++i) {
          const auto& c = suite.cases[i];
          const Instance inst = build_instance(c.config);
          const OutcomeModel& model = *inst.model;
          const double p = c.config.p;
          for (const auto& check : c.checks) {
            Certificate cert;
            if (check == "dn_bias") {
              cert = certify_dn_bias(model, p);
            } else if (check == "dn_cluster_bias") {
              cert = certify_dn_cluster_bias(model, *inst.partition, p);
            } else if (check == "dn_variance") {
              cert = certify_dn_variance(model, p);
            } else {
              cert = certify_ht_unbiased(model, p);
            }
            Json j = Json::parse(cert.to_json());
            j["case"] = i;
            j["run_id"] = c.config.run_id;
            certs.push_back(j);
            ++total;
            if (!cert.pass) {
              ++failed;
              out << "FAIL case " << i << ' ' << check << ": " << format_g17(cert.lhs) << " > "
                  << format_g17(cert.bound) << '\n';
            }
          }
          // One table per case; only the first keeps its header line.
          std::ostringstream rows;
          write_bounds_csv(rows, c.config.run_id, compare_bounds(inst, p));
          const std::string text = rows.str();
          bounds << (i == 0 ? text : text.substr(text.find('\n') + 1));
        }
        Json report;
        report["run_id"] = suite.run_id;
        report["total"] = total;
        report["failed"] = failed;
        report["all_pass"] = failed == 0;
        report["certificates"] = certs;
        files.write_json("certificates.json", report);
        bounds.close();
        files.finish(suite.run_id, to_json(suite), applied);
        out << (total - failed) << '/' << total << " certificates pass\n";
        return failed == 0 ? kOk : kFailure;
      },
      err);
}

int cmd_rideshare(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        Json doc = load_document(args.config_path);
        const Json applied = args.overrides.apply(doc);
        const auto config = rideshare::parse_rideshare_config(doc);
        Outputs files(args.out_dir, "rideshare");
        const auto result = rideshare::run_pricing_experiment(
            config.city, config.policy, config.durations, config.p, config.trials, config.seed,
            config.options);
        auto trials = files.open("trials.csv");
        auto summary = files.open("summary.csv");
        write_trials_header(trials, {{"duration_min", ""}});
        write_summary_header(summary, {{"duration_min", ""}, {"num_clusters", ""}});
        for (const auto& d : result.durations) {
          const std::string dur = format_g17(d.duration_min);
          write_trials_csv(trials, config.run_id, d.run, {{"duration_min", dur}});
          write_summary_csv(summary, config.run_id, d.summaries,
                            {{"duration_min", dur}, {"num_clusters", std::to_string(d.num_clusters)}});
          out << "duration " << dur << " min, " << d.num_clusters << " clusters:\n";
          print_summaries(out, d.summaries);
        }
        Json info;
        info["ate"] = result.ate;
        info["absolute"] = result.absolute;
        info["eyeballs"] = result.num_eyeballs;
        info["graph_edges"] = result.graph_edges;
        files.write_json("rideshare.json", info);
        trials.close();
        summary.close();
        files.finish(config.run_id, rideshare::to_json(config), applied);
        out << "paired ATE " << format_g17(result.ate) << " over " << result.num_eyeballs
            << " eyeballs\n";
        return kOk;
      },
      err);
}

int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Network-interference ATE estimation experiments", "dnest"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommandArgs args;
  std::uint64_t seed = 0;
  std::size_t trials = 0, parallel = 0;
  using Cmd = int (*)(const CommandArgs&, std::ostream&, std::ostream&);
  const std::pair<const char*, std::pair<const char*, Cmd>> commands[] = {
      {"gen-graph", {"Generate or load a graph and write it as an edge list", cmd_gen_graph}},
      {"gen-partition", {"Build the configured partitions and write them", cmd_gen_partition}},
      {"run", {"Run Monte Carlo trials and summarize", cmd_run}},
      {"sweep", {"Compare estimators across a list of partitions", cmd_sweep}},
      {"certify", {"Check bias and variance bounds exactly on small instances", cmd_certify}},
      {"rideshare", {"Switchback pricing experiment in the grid-city simulator", cmd_rideshare}},
  };
  std::vector<std::pair<CLI::App*, Cmd>> subs;
  std::vector<std::tuple<CLI::Option*, CLI::Option*, CLI::Option*>> opts;
  for (const auto& [name, info] : commands) {
    auto* sub = app.add_subcommand(name, info.first);
    sub->add_option("--config", args.config_path, "JSON config file")->required();
    sub->add_option("--out", args.out_dir, "Output directory")->capture_default_str();
    auto* s = sub->add_option("--seed", seed, "Master seed (overrides config)");
    auto* t = sub->add_option("--trials", trials, "Trial count K (overrides config)");
    auto* w = sub->add_option("--parallel", parallel, "Worker threads (overrides config)");
    subs.emplace_back(sub, info.second);
    opts.emplace_back(s, t, w);
  }

  std::vector<std::string> rest(argv.size() > 1 ? argv.begin() + 1 : argv.end(), argv.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kInvalid;
  }
  for (std::size_t k = 0; k < subs.size(); ++k) {
    if (!subs[k].first->parsed()) continue;
    const auto [s, t, w] = opts[k];
    if (s->count()) args.overrides.seed = seed;
    if (t->count()) args.overrides.trials = trials;
    if (w->count()) args.overrides.parallel = parallel;
    return subs[k].second(args, out, err);
  }
  return kInvalid;
}

}  // namespace dnest::cli
