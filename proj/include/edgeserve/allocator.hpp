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

#include <array>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "edgeserve/model.hpp"
#include "edgeserve/scenario.hpp"

namespace edgeserve {

inline constexpr std::array<int, 10> kBatchSizes = {1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
inline constexpr std::array<int, 5> kMultitaskDegrees = {1, 2, 4, 8, 16};

class NoFeasibleBatchSize : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroGroupRate : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ProfileEntry {
  double goodput = 0.0;     // units per second on one GPU (group)
  double latency_ms = 0.0;  // per batch

  bool operator==(const ProfileEntry&) const = default;
};

/// Offline profile per (service, GPU model, batch size, multitask degree).
class ProfileTable {
 public:
  void set(const std::string& service, const std::string& gpu_model, int bs, int mt, ProfileEntry entry);
  std::optional<ProfileEntry> find(const std::string& service, const std::string& gpu_model, int bs, int mt) const;
  const ProfileEntry& at(const std::string& service, const std::string& gpu_model, int bs, int mt) const;

  /// Measured rows from the scenario; every missing cell synthesized from the
  /// service's base compute time with the analytic profile.
  static ProfileTable from_scenario(const Scenario& scenario);
  static ProfileEntry synthesize(double base_ms, int bs, int mt, const ProfileSynth& synth);

 private:
  std::map<std::tuple<std::string, std::string, int, int>, ProfileEntry> entries_;
};

struct ModelParallelism {
  int tp = 1;
  int pp = 1;

  int gpus() const { return tp * pp; }
  bool operator==(const ModelParallelism&) const = default;
};

struct AllocationPlan {
  int bs = 1;
  int mt = 1;
  ModelParallelism mp;
  int mf = 1;
  int dp_groups = 1;
  int inter_request_count = 1;

  int gpus_per_group() const { return mp.gpus(); }
  int total_gpus() const { return mp.gpus() * dp_groups; }
  bool operator==(const AllocationPlan&) const = default;
};

std::string to_string(const AllocationPlan& plan);

TaskCategory categorize(const ServiceSpec& service);

/// Batch size with the highest goodput whose batch latency stays within
/// `latency_budget_ms`; ties go to the smaller batch.
int select_batch_size(const ServiceSpec& service, const std::string& gpu_model, const ProfileTable& profiles,
                      double latency_budget_ms);
int select_batch_size(const ServiceSpec& service, const std::string& gpu_model, const ProfileTable& profiles);

/// Replication degree with the highest per-GPU goodput at batch size `bs`,
/// subject to slice feasibility and the latency budget; ties go to the smaller degree.
int select_multitask_degree(const ServiceSpec& service, const std::string& gpu_model, const ProfileTable& profiles, int bs,
                            double latency_budget_ms);
int select_multitask_degree(const ServiceSpec& service, const std::string& gpu_model, const ProfileTable& profiles, int bs);

int dp_group_count(double frame_rate_requirement, double rate_of_one_group);
int max_inter_frame_count(double inter_frame_budget_ms, double fps);
int inter_request_count(int bs, int mf_max);

/// Full operator plan for one service. `slo_fraction` scales the latency SLO used
/// as the batch latency budget.
AllocationPlan build_allocation_plan(const ServiceSpec& service, const TaskCategory& category, const ProfileTable& profiles,
                                     const std::string& gpu_model, double slo_fraction = 1.0);

/// Plans for every service of a scenario, built for its reference GPU model.
std::vector<AllocationPlan> build_plans(const ScenarioModel& model, const ProfileTable& profiles);

}  // namespace edgeserve
