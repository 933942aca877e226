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

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "edgeserve/model.hpp"
#include "edgeserve/rng.hpp"
#include "edgeserve/sync.hpp"

namespace edgeserve {

enum class DecisionKind {
  Timeout,
  SolveLocal,
  SolveCrossServerParallel,
  SolveOnDevice,
  Offload,
  OffloadExceeded,
  ResourceInsufficient,
};

std::string to_string(DecisionKind kind);

/// Exactly one outcome of the handling ladder. `target` is the instance for the
/// three solve variants and the destination server for Offload.
struct HandlingDecision {
  DecisionKind kind = DecisionKind::ResourceInsufficient;
  std::size_t target = 0;

  bool operator==(const HandlingDecision&) const = default;
};

/// Which of the local rungs have spare capacity right now. Filled in by the
/// engine from the server's own (fresh) state.
struct LocalOptions {
  std::optional<std::size_t> local;   // resident instance on this server
  std::optional<std::size_t> cross;   // cross-server group this server takes part in
  std::optional<std::size_t> device;  // registered device hosting the service
};

enum class OffloadPolicy {
  Proportional,  // sample with probability proportional to idle goodput
  Expected,      // smooth weighted round-robin over the same weights
  RoundRobin,    // cycle over hosting servers, no load information
};

struct HandlerConfig {
  int max_offload = 5;
  bool cross_server = true;
  bool devices = true;
  bool offload = true;
  OffloadPolicy policy = OffloadPolicy::Proportional;
};

/// Mutable per-server state of the deterministic offload policies.
struct OffloadState {
  std::map<std::pair<ServiceIdx, ServerIdx>, double> wrr_current;
  std::size_t rr_next = 0;
};

struct OffloadCandidate {
  ServerIdx server = 0;
  double weight = 0.0;  // idle goodput

  bool operator==(const OffloadCandidate&) const = default;
};

/// p-hat minus p for `service` on `server`, floored at zero; zero when unknown.
double idle_goodput(const ClusterView& view, ServerIdx server, ServiceIdx service);

/// Servers eligible to receive `request`: hosting the service, available, off the
/// hop path, with queued work no longer than staleness + SLO, and idle goodput > 0.
std::vector<OffloadCandidate> offload_candidates(const Request& request, const ClusterView& view, TimeMs slo_ms,
                                                 TimeMs now);

/// Samples a candidate with probability proportional to its idle goodput.
std::optional<ServerIdx> offload_target(const Request& request, const ClusterView& view, TimeMs slo_ms, TimeMs now,
                                        Rng& rng);

/// The decision ladder for one request at the server owning `view`.
HandlingDecision handle(const Request& request, const LocalOptions& local, const ClusterView& view,
                        const HandlerConfig& config, TimeMs slo_ms, TimeMs now, Rng& rng, OffloadState& state);

/// Appends `server` to the hop path. Throws LoopViolation on a revisit.
Request record_hop(Request request, ServerIdx server);

}  // namespace edgeserve
