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
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgeserve {

/// Virtual clock unit. Every time in the simulator is an integer millisecond.
using TimeMs = std::int64_t;

using ServiceIdx = std::size_t;
using ServerIdx = std::size_t;

/// Marks the hypothetical server that aggregates every GPU of a group.
inline constexpr ServerIdx kHypotheticalServer = std::numeric_limits<ServerIdx>::max();

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed scenario text. Carries the 1-based line number.
class ParseError : public ScenarioError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ScenarioError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed text that violates a model invariant. `field()` names the culprit.
class ValidationError : public ScenarioError {
 public:
  ValidationError(std::string field, const std::string& what)
      : ScenarioError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// ---------------------------------------------------------------------------
// Services and categories
// ---------------------------------------------------------------------------

enum class Sensitivity { Latency, Frequency };
enum class GpuClass { SingleGpu, MultiGpu };

struct TaskCategory {
  Sensitivity sensitivity = Sensitivity::Latency;
  GpuClass gpu_class = GpuClass::SingleGpu;

  bool operator==(const TaskCategory&) const = default;
  auto operator<=>(const TaskCategory&) const = default;
};

std::string to_string(const TaskCategory& category);

/// Operator settings a scenario may pin instead of letting the allocator choose.
struct PlanOverrides {
  std::optional<int> bs;
  std::optional<int> mt;
  std::optional<int> mf;
  std::optional<int> dp;
  int tp = 1;
  int pp = 1;

  bool operator==(const PlanOverrides&) const = default;
};

struct ServiceSpec {
  std::string id;
  double compute_demand = 0.0;  // a_l, fraction of one GPU per slice
  double vram_demand = 0.0;     // b_l, fraction of one GPU per slice
  /// Milliseconds per batch at bs=1, mt=1 for the sliced model, keyed by GPU model.
  std::map<std::string, double> compute_time_ms;
  TimeMs latency_slo_ms = 0;
  std::optional<double> frequency_slo;  // frames per second
  bool needs_multi_gpu = false;
  TimeMs model_load_ms = 0;
  std::int64_t payload_bytes = 0;  // per request, per frame for streams
  std::optional<TimeMs> frame_budget_ms;
  double model_mb = 0.0;
  PlanOverrides plan;

  bool frequency_sensitive() const { return frequency_slo.has_value(); }
  TimeMs inter_frame_budget_ms() const { return frame_budget_ms.value_or(latency_slo_ms); }

  bool operator==(const ServiceSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Requests
// ---------------------------------------------------------------------------

struct Request {
  std::size_t id = 0;
  ServiceIdx service = 0;
  ServerIdx origin = 0;
  TimeMs arrival_ms = 0;
  TimeMs deadline_ms = 0;
  int frame_count = 1;
  std::vector<ServerIdx> hop_path;
  int offload_count = 0;

  bool visited(ServerIdx server) const;
  bool operator==(const Request&) const = default;
};

/// Raised when a hop would revisit a server. A programming error, never a runtime path.
class LoopViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Satisfied units for a stream of `frame_count` frames that reached `achieved_fps`
/// against `frequency_slo`. Credit is proportional and capped at the frame count.
std::int64_t satisfied_frames(int frame_count, double frequency_slo, double achieved_fps);

/// 1 when a latency request completed by its deadline, else 0.
std::int64_t satisfied_latency(TimeMs deadline_ms, std::optional<TimeMs> completion_ms);

/// Units offered by a request: its frame count for streams, 1 otherwise.
std::int64_t submitted_units(const Request& request, const ServiceSpec& service);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

enum class Outcome {
  Pending,
  Completed,
  Timeout,
  OffloadExceeded,
  ResourceInsufficient,
  Lost,  // hosting server failed underneath the request
};

std::string to_string(Outcome outcome);

struct CategoryStats {
  std::int64_t submitted = 0;
  std::int64_t satisfied = 0;
  double goodput_per_s = 0.0;
};

struct GpuUtilization {
  std::string server;
  std::size_t gpu = 0;
  std::string model;
  TimeMs busy_ms = 0;
  double utilization = 0.0;
};

struct Metrics {
  std::int64_t requests = 0;
  std::int64_t submitted = 0;
  std::int64_t satisfied = 0;
  TimeMs duration_ms = 0;
  std::map<TaskCategory, CategoryStats> per_category;
  std::map<Outcome, std::int64_t> outcomes;
  /// Completion latency of latency-sensitive requests, 10 ms buckets.
  std::map<TimeMs, std::int64_t> latency_histogram;
  /// Terminal offload count per request.
  std::map<int, std::int64_t> offload_histogram;
  std::vector<GpuUtilization> gpu_utilization;
  std::int64_t offloads = 0;
  double mean_offload_count = 0.0;

  double satisfaction_rate() const {
    return submitted == 0 ? 1.0 : static_cast<double>(satisfied) / static_cast<double>(submitted);
  }
  double goodput_per_s() const {
    return duration_ms <= 0 ? 0.0 : static_cast<double>(satisfied) * 1000.0 / static_cast<double>(duration_ms);
  }
};

}  // namespace edgeserve
