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

#include "edgeserve/bound.hpp"

#include <algorithm>
#include <future>
#include <sstream>
#include <thread>

#include "edgeserve/engine.hpp"
#include "edgeserve/report.hpp"
#include "edgeserve/rng.hpp"

namespace edgeserve {

Scenario make_bound_instance(std::uint64_t seed, const BoundParams& params) {
  Rng rng(seed);
  Scenario sc;
  const auto span = static_cast<std::uint64_t>(std::max(0, params.max_servers - params.min_servers) + 1);
  const int servers = params.min_servers + static_cast<int>(rng.below(span));
  const int services = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, params.max_services))));
  for (int i = 0; i < servers; ++i) sc.servers.push_back({"s" + std::to_string(i), {"G"}, true});

  constexpr double kComputeMs[] = {10.0, 20.0, 40.0};
  constexpr TimeMs kSlo[] = {100, 200};
  for (int l = 0; l < services; ++l) {
    ServiceSpec s;
    s.id = "svc" + std::to_string(l);
    s.compute_demand = params.compute_demands[rng.below(params.compute_demands.size())];
    s.vram_demand = params.vram_demands[rng.below(params.vram_demands.size())];
    s.compute_time_ms["G"] = kComputeMs[rng.below(3)];
    s.latency_slo_ms = kSlo[rng.below(2)];
    s.payload_bytes = 10'000;
    s.plan.bs = 1;
    s.plan.mt = 1;
    sc.services.push_back(std::move(s));
  }
  const int requests = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, params.max_requests))));
  for (int k = 0; k < requests; ++k) {
    TraceRow row;
    row.arrival_ms = static_cast<TimeMs>(rng.below(1000));
    row.service = sc.services[rng.below(sc.services.size())].id;
    row.origin = sc.servers[rng.below(sc.servers.size())].id;
    sc.trace.push_back(std::move(row));
  }
  std::stable_sort(sc.trace.begin(), sc.trace.end(),
                   [](const TraceRow& a, const TraceRow& b) { return a.arrival_ms < b.arrival_ms; });
  return sc;
}

BoundOutcome verify_instance(const ScenarioModel& model, std::size_t max_configs) {
  BoundOutcome out;
  out.servers = model.server_count();
  out.services = model.service_count();
  out.requests = model.requests().size();
  const auto param = approximation_P(model.services());
  out.P = param.P;
  out.bound = param.bound();

  std::vector<ServerIdx> servers;
  for (ServerIdx s = 0; s < model.server_count(); ++s) {
    if (model.servers()[s].initially_live) servers.push_back(s);
  }
  const auto plans = build_plans(model, ProfileTable::from_scenario(model.spec()));
  PlacementContext ctx{&model, &plans, servers, make_objective(model, model.requests(), servers)};
  const auto candidates = build_candidates(ctx);
  const auto greedy = sssp(ctx, candidates);
  out.phi_greedy = ctx.objective(greedy);

  // Hypothetical-server placements of single-GPU plans coincide with ordinary
  // ones, so the exhaustive search covers both sets.
  auto pool = candidates.all;
  for (const auto& c : candidates.hypothetical) {
    if (plans[c.service].total_gpus() > 1) pool.push_back(c);
  }
  try {
    const auto opt = brute_force_optimal(ctx, pool, {max_configs});
    out.phi_opt = opt.phi;
    out.configs = opt.configs;
  } catch (const TooLarge& e) {
    out.skipped = true;
    out.note = e.what();
    return out;
  }
  out.ratio = out.phi_opt == 0 ? 1.0 : static_cast<double>(out.phi_greedy) / static_cast<double>(out.phi_opt);
  return out;
}

BoundReport verify_bound(std::size_t count, std::uint64_t first_seed, const BoundParams& params, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  BoundReport report;
  std::uint64_t next = first_seed;
  auto one = [&params](std::uint64_t seed) {
    const ScenarioModel model(make_bound_instance(seed, params));
    auto o = verify_instance(model, params.max_configs);
    o.seed = seed;
    return o;
  };
  while (report.checked < count) {
    const auto want = count - report.checked;
    std::vector<std::future<BoundOutcome>> batch;
    for (std::size_t i = 0; i < std::min<std::size_t>(want, threads); ++i) batch.push_back(std::async(std::launch::async, one, next++));
    for (auto& f : batch) {
      auto o = f.get();
      if (o.skipped) {
        ++report.skipped;
      } else {
        ++report.checked;
        report.min_ratio = std::min(report.min_ratio, o.ratio);
        if (o.violated()) ++report.violations;
      }
      report.outcomes.push_back(std::move(o));
    }
  }
  return report;
}

std::string bound_csv(const BoundReport& report) {
  std::ostringstream out;
  out << "seed,servers,services,requests,P,bound,phi_greedy,phi_opt,ratio,configs,status\n";
  for (const auto& o : report.outcomes) {
    out << o.seed << ',' << o.servers << ',' << o.services << ',' << o.requests << ',' << o.P << ','
        << format_double(o.bound) << ',' << o.phi_greedy << ',' << o.phi_opt << ',' << format_double(o.ratio) << ','
        << o.configs << ',' << (o.skipped ? "skipped" : o.violated() ? "violated" : "ok") << '\n';
  }
  return out.str();
}

}  // namespace edgeserve
