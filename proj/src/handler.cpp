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

#include "edgeserve/handler.hpp"

#include <algorithm>

namespace edgeserve {

std::string to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::Timeout: return "timeout";
    case DecisionKind::SolveLocal: return "solve_local";
    case DecisionKind::SolveCrossServerParallel: return "solve_cross_server";
    case DecisionKind::SolveOnDevice: return "solve_on_device";
    case DecisionKind::Offload: return "offload";
    case DecisionKind::OffloadExceeded: return "offload_exceeded";
    case DecisionKind::ResourceInsufficient: return "resource_insufficient";
  }
  return "unknown";
}

double idle_goodput(const ClusterView& view, ServerIdx server, ServiceIdx service) {
  if (server >= view.per_server.size()) return 0.0;
  const auto& entry = view.per_server[server];
  if (!entry.known || entry.unavailable || service >= entry.services.size()) return 0.0;
  const auto& stat = entry.services[service];
  if (!stat.hosted) return 0.0;
  return std::max(0.0, stat.theoretical - stat.processed);
}

std::vector<OffloadCandidate> offload_candidates(const Request& request, const ClusterView& view, TimeMs slo_ms,
                                                 TimeMs now) {
  std::vector<OffloadCandidate> out;
  for (ServerIdx m = 0; m < view.per_server.size(); ++m) {
    if (m == view.owner || request.visited(m)) continue;
    const double idle = idle_goodput(view, m, request.service);
    if (idle <= 0.0) continue;
    const double limit = static_cast<double>(view.staleness(m, now) + slo_ms);
    if (view.per_server[m].services[request.service].backlog_ms > limit) continue;
    out.push_back({m, idle});
  }
  return out;
}

namespace {

std::optional<ServerIdx> sample(const std::vector<OffloadCandidate>& candidates, Rng& rng) {
  if (candidates.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& c : candidates) total += c.weight;
  double u = rng.uniform() * total;
  for (const auto& c : candidates) {
    if (u < c.weight) return c.server;
    u -= c.weight;
  }
  return candidates.back().server;
}

// Smooth weighted round-robin: deterministic, and the long-run share of each
// candidate equals its weight over the total.
std::optional<ServerIdx> smooth_wrr(const std::vector<OffloadCandidate>& candidates, ServiceIdx service,
                                    OffloadState& state) {
  if (candidates.empty()) return std::nullopt;
  double total = 0.0;
  const OffloadCandidate* best = nullptr;
  double best_current = 0.0;
  for (const auto& c : candidates) {
    total += c.weight;
    double& cur = state.wrr_current[{service, c.server}];
    cur += c.weight;
    if (!best || cur > best_current) {
      best = &c;
      best_current = cur;
    }
  }
  state.wrr_current[{service, best->server}] -= total;
  return best->server;
}

std::optional<ServerIdx> round_robin(const Request& request, const ClusterView& view, OffloadState& state) {
  std::vector<ServerIdx> hosts;
  for (ServerIdx m = 0; m < view.per_server.size(); ++m) {
    const auto& e = view.per_server[m];
    if (m == view.owner || request.visited(m) || !e.known || e.unavailable) continue;
    if (e.services[request.service].hosted) hosts.push_back(m);
  }
  if (hosts.empty()) return std::nullopt;
  return hosts[state.rr_next++ % hosts.size()];
}

}  // namespace

std::optional<ServerIdx> offload_target(const Request& request, const ClusterView& view, TimeMs slo_ms, TimeMs now,
                                        Rng& rng) {
  return sample(offload_candidates(request, view, slo_ms, now), rng);
}

HandlingDecision handle(const Request& request, const LocalOptions& local, const ClusterView& view,
                        const HandlerConfig& config, TimeMs slo_ms, TimeMs now, Rng& rng, OffloadState& state) {
  if (now > request.deadline_ms) return {DecisionKind::Timeout, 0};
  if (local.local) return {DecisionKind::SolveLocal, *local.local};
  if (config.cross_server && local.cross) return {DecisionKind::SolveCrossServerParallel, *local.cross};
  if (config.devices && local.device) return {DecisionKind::SolveOnDevice, *local.device};

  // max_offload == 0 disables offloading outright rather than reporting every
  // remote-needing request as exceeded.
  if (!config.offload || config.max_offload == 0) return {DecisionKind::ResourceInsufficient, 0};
  if (request.offload_count >= config.max_offload) return {DecisionKind::OffloadExceeded, 0};

  std::optional<ServerIdx> target;
  switch (config.policy) {
    case OffloadPolicy::Proportional:
      target = sample(offload_candidates(request, view, slo_ms, now), rng);
      break;
    case OffloadPolicy::Expected:
      target = smooth_wrr(offload_candidates(request, view, slo_ms, now), request.service, state);
      break;
    case OffloadPolicy::RoundRobin:
      target = round_robin(request, view, state);
      break;
  }
  if (target) return {DecisionKind::Offload, *target};
  return {DecisionKind::ResourceInsufficient, 0};
}

Request record_hop(Request request, ServerIdx server) {
  if (request.visited(server)) {
    throw LoopViolation("request " + std::to_string(request.id) + " would revisit server " + std::to_string(server));
  }
  request.hop_path.push_back(server);
  request.offload_count += 1;
  return request;
}

}  // namespace edgeserve
