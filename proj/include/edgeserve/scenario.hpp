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
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "edgeserve/model.hpp"

namespace edgeserve {

struct ServerSpec {
  std::string id;
  std::vector<std::string> gpu_models;
  bool initially_live = true;

  bool operator==(const ServerSpec&) const = default;
};

struct DeviceSpec {
  std::string id;
  std::string server;
  std::string gpu_model;
  TimeMs register_at_ms = 0;

  bool operator==(const DeviceSpec&) const = default;
};

struct ProfileRow {
  std::string service;
  std::string gpu_model;
  int bs = 1;
  int mt = 1;
  double goodput = 0.0;     // units per second per GPU
  double latency_ms = 0.0;  // per batch

  bool operator==(const ProfileRow&) const = default;
};

/// Analytic profile used where no measured row exists:
/// latency(bs, mt) = c * (1 + bs_slope * (bs - 1)) * (1 + mt_slope * (mt - 1)).
struct ProfileSynth {
  double bs_slope = 0.25;
  double mt_slope = 0.6;

  bool operator==(const ProfileSynth&) const = default;
};

enum class ArrivalPattern { Poisson, OnOff };

/// One request stream for the workload generator.
struct StreamSpec {
  std::string service;
  std::string origin;
  double rate_per_s = 0.0;
  ArrivalPattern pattern = ArrivalPattern::Poisson;
  TimeMs start_ms = 0;
  TimeMs duration_ms = 0;
  int frames = 1;
  TimeMs on_ms = 0;
  TimeMs off_ms = 0;

  bool operator==(const StreamSpec&) const = default;
};

struct TraceRow {
  TimeMs arrival_ms = 0;
  std::string service;
  std::string origin;
  int frame_count = 1;

  bool operator==(const TraceRow&) const = default;
};

struct PriorityEntry {
  std::string service;
  std::string server;

  bool operator==(const PriorityEntry&) const = default;
};

/// A timed server event from the control section, written `server@ms`.
struct ServerAt {
  std::string server;
  TimeMs at_ms = 0;

  bool operator==(const ServerAt&) const = default;
};

enum class PlacementMode { Offline, Online };
enum class EvalMode { Sampled, Expected };
enum class PlacementTrace { Lookahead, History };

struct Control {
  std::uint64_t seed = 1;
  std::uint64_t eval_seed = 0x5eed;
  int max_offload = 5;
  TimeMs sync_interval_ms = 100;
  TimeMs placement_interval_ms = 600000;
  PlacementMode placement_mode = PlacementMode::Offline;
  EvalMode eval_mode = EvalMode::Sampled;
  PlacementTrace placement_trace = PlacementTrace::Lookahead;
  int eval_max_requests = 2000;
  bool device_policy = true;
  bool preload_initial = true;
  std::int64_t bytes_per_server = 256;
  int group_size = 0;  // 0: one ring holding every server
  TimeMs hop_overhead_ms = 1;
  double default_bandwidth_mbps = 1000.0;
  int batch_timeout_divisor = 4;
  double bs_slo_fraction = 0.5;
  TimeMs decision_cost_ms = 0;
  int central_group_size = 10;
  TimeMs central_delay_per_server_ms = 10;
  double device_load_bandwidth_mbps = 100.0;
  TimeMs duration_ms = 0;  // 0: run until the trace drains
  TimeMs timeseries_bucket_ms = 1000;
  std::vector<ServerAt> fail;
  std::vector<ServerAt> corrupt;
  std::vector<ServerAt> join;
  std::vector<ServerAt> exit;

  bool operator==(const Control&) const = default;
};

/// The scenario exactly as written in the file. Serializable and comparable.
struct Scenario {
  std::vector<ServerSpec> servers;
  std::vector<ServiceSpec> services;
  std::map<std::pair<std::string, std::string>, double> bandwidth_mbps;
  std::vector<DeviceSpec> devices;
  std::vector<ProfileRow> profiles;
  ProfileSynth profile_synth;
  std::vector<StreamSpec> workload;
  std::vector<TraceRow> trace;
  std::vector<PriorityEntry> priority;
  Control control;

  bool operator==(const Scenario&) const = default;
};

/// A validated scenario with ids resolved to indices. Immutable once built.
class ScenarioModel {
 public:
  explicit ScenarioModel(Scenario spec);

  const Scenario& spec() const { return spec_; }
  const Control& control() const { return spec_.control; }
  const std::vector<ServerSpec>& servers() const { return spec_.servers; }
  const std::vector<ServiceSpec>& services() const { return spec_.services; }
  const ServiceSpec& service(ServiceIdx idx) const { return spec_.services.at(idx); }

  std::size_t server_count() const { return spec_.servers.size(); }
  std::size_t service_count() const { return spec_.services.size(); }

  std::optional<ServerIdx> find_server(std::string_view id) const;
  std::optional<ServiceIdx> find_service(std::string_view id) const;
  ServerIdx server_index(std::string_view id) const;
  ServiceIdx service_index(std::string_view id) const;

  double bandwidth_mbps(ServerIdx from, ServerIdx to) const;
  /// GPU models present anywhere in the scenario, including devices.
  std::vector<std::string> gpu_models() const;
  /// Most common server GPU model, ties broken by name. Plans are built for it.
  const std::string& reference_gpu_model() const { return reference_gpu_; }

  /// Requests from the [trace] rows and the generated [workload], sorted by arrival.
  const std::vector<Request>& requests() const { return requests_; }

 private:
  Scenario spec_;
  std::map<std::string, ServerIdx, std::less<>> server_by_id_;
  std::map<std::string, ServiceIdx, std::less<>> service_by_id_;
  std::string reference_gpu_;
  std::vector<Request> requests_;
};

/// Parses scenario text without validating cross references.
Scenario parse_scenario(std::string_view text);

/// Applies `key=value` overrides to the control section.
void apply_overrides(Scenario& scenario, const std::vector<std::string>& overrides);

/// Throws ValidationError naming the offending field.
void validate_scenario(const Scenario& scenario);

/// parse + overrides + validate.
ScenarioModel load_scenario(std::string_view text, const std::vector<std::string>& overrides = {});
ScenarioModel load_scenario_file(const std::string& path, const std::vector<std::string>& overrides = {});

std::string serialize_scenario(const Scenario& scenario);

/// Requests for the given trace rows, resolved against `model`.
std::vector<Request> resolve_trace(const ScenarioModel& model, const std::vector<TraceRow>& rows);

}  // namespace edgeserve
