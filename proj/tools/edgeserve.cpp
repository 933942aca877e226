// Copyright 2026 The edgeserve Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// edgeserve: command-line front end for the simulator.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "edgeserve/bound.hpp"
#include "edgeserve/engine.hpp"
#include "edgeserve/report.hpp"
#include "edgeserve/scenario.hpp"
#include "edgeserve/workload.hpp"

namespace {

using namespace edgeserve;

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kIo = 2,
  kInvalid = 3,
  kBoundViolated = 4,
};

struct Common {
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out;
};

std::string default_out() {
  const char* env = std::getenv("EDGESERVE_OUT");
  return env && *env ? env : "out";
}

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
  cmd->add_option("--seed", c.seed, "Seed for the workload generator and handler streams");
  cmd->add_option("--set", c.overrides, "Override a [control] key, e.g. --set sync_interval_ms=300 (repeatable)");
  if (with_out) cmd->add_option("--out", c.out, "Output directory (default: $EDGESERVE_OUT or ./out)");
}

std::vector<std::string> overrides_of(const Common& c) {
  auto out = c.overrides;
  if (c.seed) out.push_back("seed=" + std::to_string(*c.seed));
  return out;
}

ScenarioModel load(const std::string& path, const std::vector<std::string>& overrides) {
  if (!std::filesystem::is_regular_file(path)) throw OutputError(path, "no such scenario file");
  return load_scenario_file(path, overrides);
}

std::vector<ServerIdx> live_servers(const ScenarioModel& model) {
  std::vector<ServerIdx> out;
  for (ServerIdx s = 0; s < model.server_count(); ++s) {
    if (model.servers()[s].initially_live) out.push_back(s);
  }
  return out;
}

int cmd_run(const std::string& path, const Common& c, std::optional<int> max_offload, bool eval_expected,
            const std::string& strategy_name) {
  auto overrides = overrides_of(c);
  if (max_offload) overrides.push_back("max_offload=" + std::to_string(*max_offload));
  if (eval_expected) overrides.push_back("eval_mode=expected");
  const auto model = load(path, overrides);
  const auto strategy = parse_strategy(strategy_name);
  if (!strategy) throw ValidationError("strategy", "unknown strategy '" + strategy_name + "'");
  RunOptions opts;
  opts.strategy = *strategy;
  const auto result = simulate(model, opts);
  emit_metrics(model, result, c.out);
  std::cout << summary_line(result) << '\n';
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& v : result.invariant_violations) std::cerr << "invariant violated: " << v << '\n';
  return result.invariant_violations.empty() ? kOk : kFailure;
}

int cmd_place(const std::string& path, const Common& c) {
  const auto model = load(path, overrides_of(c));
  const auto servers = live_servers(model);
  std::vector<Request> window;
  for (const auto& r : model.requests()) {
    if (r.arrival_ms >= model.control().placement_interval_ms) break;
    if (static_cast<int>(window.size()) >= model.control().eval_max_requests) break;
    window.push_back(r);
  }
  std::vector<GreedyStep> steps;
  auto theta = plan_placement(model, servers, window, {}, &steps);
  theta.epoch = 1;
  const auto report = placement_report(model, theta);
  write_text((std::filesystem::path(c.out) / "placement_report.txt").string(), report);
  std::cout << report;
  const auto p = approximation_P(model.services());
  std::cout << "phi=" << (steps.empty() ? 0 : steps.back().phi) << " P=" << p.P << " bound=" << format_double(p.bound())
            << '\n';
  return kOk;
}

int cmd_verify_bound(const std::string& path, const Common& c, std::size_t instances, std::uint64_t first_seed,
                     BoundParams params, unsigned threads) {
  if (!path.empty()) {
    const auto model = load(path, overrides_of(c));
    const auto p = approximation_P(model.services());
    std::cout << "P=" << p.P << " bound=" << format_double(p.bound()) << '\n';
    return kOk;
  }
  const auto report = verify_bound(instances, first_seed, params, threads);
  write_text((std::filesystem::path(c.out) / "bound.csv").string(), bound_csv(report));
  std::cout << "instances=" << report.checked << " skipped=" << report.skipped << " violations=" << report.violations
            << " min_ratio=" << format_double(report.min_ratio) << '\n';
  for (const auto& o : report.outcomes) {
    if (o.skipped) std::cout << "note: seed " << o.seed << " skipped: " << o.note << '\n';
  }
  return report.violations == 0 ? kOk : kBoundViolated;
}

int cmd_compare(const std::vector<std::string>& paths, const Common& c, const std::vector<std::uint64_t>& seeds) {
  std::ostringstream detail;
  detail << "scenario,seed,strategy,submitted,satisfied,satisfaction_rate,goodput_per_s,mean_offload_count\n";
  // Rows are strategies, columns are workloads (scenario, or scenario:seed).
  std::vector<std::string> columns;
  std::vector<std::vector<double>> table(std::size(kAllStrategies));
  for (const auto& path : paths) {
    const auto name = std::filesystem::path(path).stem().string();
    const std::vector<std::optional<std::uint64_t>> runs =
        seeds.empty() ? std::vector<std::optional<std::uint64_t>>{c.seed}
                      : std::vector<std::optional<std::uint64_t>>(seeds.begin(), seeds.end());
    for (const auto& seed : runs) {
      auto overrides = c.overrides;
      if (seed) overrides.push_back("seed=" + std::to_string(*seed));
      const auto model = load(path, overrides);
      columns.push_back(seeds.empty() ? name : name + ":" + std::to_string(*seed));
      for (std::size_t k = 0; k < std::size(kAllStrategies); ++k) {
        const auto strategy = kAllStrategies[k];
        RunOptions opts;
        opts.strategy = strategy;
        const auto& m = simulate(model, opts).metrics;
        table[k].push_back(m.goodput_per_s());
        detail << name << ',' << model.control().seed << ',' << to_string(strategy) << ',' << m.submitted << ','
               << m.satisfied << ',' << format_double(m.satisfaction_rate()) << ',' << format_double(m.goodput_per_s())
               << ',' << format_double(m.mean_offload_count) << '\n';
      }
    }
  }
  std::ostringstream wide;
  wide << "strategy";
  for (const auto& col : columns) wide << ',' << col;
  wide << '\n';
  for (std::size_t k = 0; k < std::size(kAllStrategies); ++k) {
    wide << to_string(kAllStrategies[k]);
    for (double v : table[k]) wide << ',' << format_double(v);
    wide << '\n';
  }
  write_text((std::filesystem::path(c.out) / "compare.csv").string(), wide.str());
  write_text((std::filesystem::path(c.out) / "compare_detail.csv").string(), detail.str());
  std::cout << wide.str();
  return kOk;
}

int cmd_gen_trace(const std::string& path, const Common& c, const std::string& out_file) {
  const auto model = load(path, overrides_of(c));
  const auto rows = generate_workload(model.spec().workload, model.control().seed);
  const auto text = format_trace_csv(rows);
  if (out_file.empty()) {
    std::cout << text;
  } else {
    write_text(out_file, text);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edgeserve: event-driven simulator for edge-cloud AI inference serving"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "edgeserve 0.1.0");

  Common common;
  common.out = default_out();
  std::string scenario;

  auto* run = app.add_subcommand("run", "Simulate a scenario and write metrics CSVs");
  run->add_option("scenario", scenario, "Scenario file")->required();
  add_common(run, common);
  std::optional<int> max_offload;
  bool eval_expected = false;
  std::string strategy = "full";
  run->add_option("--max-offload", max_offload, "Maximum offloads per request; 0 disables offloading");
  run->add_flag("--eval-expected", eval_expected, "Evaluate placements with deterministic expected-value offloading");
  run->add_option("--strategy", strategy, "full | round_robin | no_offload | centralized_group");

  auto* place = app.add_subcommand("place", "Solve one placement epoch and print the report");
  place->add_option("scenario", scenario, "Scenario file")->required();
  add_common(place, common);

  auto* verify = app.add_subcommand("verify-bound", "Compare greedy placement with the exhaustive optimum");
  verify->add_option("scenario", scenario, "Only print P and the bound for this scenario");
  add_common(verify, common);
  std::size_t instances = 100;
  std::uint64_t first_seed = 1;
  unsigned threads = 0;
  BoundParams params;
  verify->add_option("--instances", instances, "Number of solvable random instances")->capture_default_str();
  verify->add_option("--first-seed", first_seed, "Seed of the first instance")->capture_default_str();
  verify->add_option("--max-servers", params.max_servers, "Servers per instance, at most")->capture_default_str();
  verify->add_option("--max-services", params.max_services, "Services per instance, at most")->capture_default_str();
  verify->add_option("--max-requests", params.max_requests, "Requests per instance, at most")->capture_default_str();
  verify->add_option("--max-configs", params.max_configs, "Enumeration guard per instance")->capture_default_str();
  verify->add_option("--threads", threads, "Worker threads (0: one per core)");

  auto* compare = app.add_subcommand("compare", "Run every strategy on one or more scenarios");
  std::vector<std::string> scenarios;
  std::vector<std::uint64_t> seeds;
  compare->add_option("scenarios", scenarios, "Scenario files")->required();
  add_common(compare, common);
  compare->add_option("--seeds", seeds, "Seed matrix; one column per scenario and seed")->delimiter(',');

  auto* gen = app.add_subcommand("gen-trace", "Print the trace generated from a scenario's [workload]");
  gen->add_option("scenario", scenario, "Scenario file")->required();
  add_common(gen, common, false);
  std::string trace_out;
  gen->add_option("--out", trace_out, "Write the trace to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return cmd_run(scenario, common, max_offload, eval_expected, strategy);
    if (*place) return cmd_place(scenario, common);
    if (*verify) {
      if (params.max_servers < params.min_servers) params.min_servers = params.max_servers;
      return cmd_verify_bound(scenario, common, instances, first_seed, params, threads);
    }
    if (*compare) return cmd_compare(scenarios, common, seeds);
    if (*gen) return cmd_gen_trace(scenario, common, trace_out);
  } catch (const OutputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
