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

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeserve/allocator.hpp"
#include "edgeserve/model.hpp"
#include "edgeserve/placement.hpp"
#include "edgeserve/scenario.hpp"
#include "edgeserve/sync.hpp"

namespace edgeserve {

class ZeroBandwidth : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// ceil(bytes * 8 / (mbps * 1000)) milliseconds plus a fixed per-hop overhead.
TimeMs transmit_latency(std::int64_t bytes, double bandwidth_mbps, TimeMs overhead_ms = 1);

/// Integer batch times looked up from the profile table.
class LatencyTable {
 public:
  LatencyTable() = default;
  LatencyTable(const ScenarioModel& model, ProfileTable profiles);

  /// Milliseconds for a batch of `count` items, charged at the next power of two.
  TimeMs batch_ms(ServiceIdx service, const std::string& gpu_model, int count, int mt) const;
  TimeMs load_ms(ServiceIdx service) const;
  const ProfileTable& profiles() const { return profiles_; }

 private:
  const ScenarioModel* model_ = nullptr;
  ProfileTable profiles_;
};

enum class Strategy { Full, RoundRobin, NoOffload, CentralizedGroup };

std::string to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(const std::string& name);
inline constexpr Strategy kAllStrategies[] = {Strategy::Full, Strategy::RoundRobin, Strategy::NoOffload,
                                              Strategy::CentralizedGroup};

struct RunOptions {
  Strategy strategy = Strategy::Full;
  /// Seed of the handler streams; defaults to the scenario's control seed.
  std::optional<std::uint64_t> seed;
  /// Skip placement epochs and serve with this list from t=0.
  std::optional<PlacementList> fixed_placement;
  /// Replaces the scenario's requests.
  std::optional<std::vector<Request>> requests;
  /// Servers taking part; defaults to the initially live ones.
  std::optional<std::vector<ServerIdx>> servers;
  /// Placement evaluation replay: no faults, corruption, membership or devices.
  bool evaluation = false;
  /// Deterministic offloading with the same long-run shares as sampling.
  bool expected_offload = false;
};

struct RequestRecord {
  std::size_t id = 0;
  ServiceIdx service = 0;
  ServerIdx origin = 0;
  std::optional<ServerIdx> served_by;
  TimeMs arrival_ms = 0;
  TimeMs deadline_ms = 0;
  std::optional<TimeMs> completion_ms;
  Outcome outcome = Outcome::Pending;
  std::vector<ServerIdx> hop_path;
  int offload_count = 0;
  std::int64_t submitted = 0;
  std::int64_t satisfied = 0;
  double achieved_fps = 0.0;  // streams only
  bool redirected = false;    // origin had failed; re-homed on arrival
};

struct OffloadRecord {
  TimeMs at_ms = 0;
  ServerIdx from = 0;
  ServerIdx to = 0;
  std::size_t request = 0;
};

struct TimeseriesRow {
  TimeMs t_ms = 0;
  std::int64_t arrivals = 0;
  std::int64_t completed = 0;
  std::int64_t satisfied = 0;
  std::int64_t offloads = 0;
};

struct RunResult {
  Metrics metrics;
  std::vector<RequestRecord> records;
  std::vector<OffloadRecord> offloads;
  std::vector<PlacementList> placements;  // one per epoch
  std::vector<TimeseriesRow> timeseries;
  std::map<ServerIdx, TimeMs> bypassed_at;
  std::vector<DeviceAssignment> device_assignments;
  std::uint64_t event_hash = 0;
  std::size_t events = 0;
  std::vector<std::string> invariant_violations;
  std::vector<std::string> warnings;
};

/// Satisfied units of `requests` served with the fixed placement `theta`.
std::int64_t evaluate_goodput(const ScenarioModel& model, const PlacementList& theta, const std::vector<Request>& requests,
                              Strategy strategy = Strategy::Full);

/// One placement solve over `servers` with the objective replaying `requests`.
PlacementList plan_placement(const ScenarioModel& model, const std::vector<ServerIdx>& servers,
                             const std::vector<Request>& requests, const PlacementList& theta0 = {},
                             std::vector<GreedyStep>* steps = nullptr);

/// Placement objective: satisfied units of `requests` under a candidate list.
Objective make_objective(const ScenarioModel& model, const std::vector<Request>& requests, const std::vector<ServerIdx>& servers);

RunResult simulate(const ScenarioModel& model, const RunOptions& options = {});
RunResult run(const ScenarioModel& model, std::optional<std::uint64_t> seed = std::nullopt);
RunResult run_baseline(const ScenarioModel& model, Strategy baseline, std::optional<std::uint64_t> seed = std::nullopt);

}  // namespace edgeserve
