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

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgeserve/allocator.hpp"
#include "edgeserve/model.hpp"
#include "edgeserve/scenario.hpp"

namespace edgeserve {

struct GpuRef {
  ServerIdx server = 0;
  std::size_t gpu = 0;

  auto operator<=>(const GpuRef&) const = default;
};

/// One placement x_ln: a service on a server (or on the hypothetical server),
/// with the GPUs of each DP group.
struct Placement {
  ServiceIdx service = 0;
  ServerIdx server = 0;  // kHypotheticalServer for cross-server placements
  std::vector<std::vector<GpuRef>> groups;
  AllocationPlan plan;
  bool cross_server = false;

  /// Servers owning at least one of the placement's GPUs, ascending.
  std::vector<ServerIdx> servers() const;
  bool operator==(const Placement&) const = default;
};

struct PlacementList {
  std::vector<Placement> entries;
  std::uint64_t epoch = 0;

  bool operator==(const PlacementList&) const = default;
};

/// A (service, server) pair considered by the greedy. Ordered by service, then
/// server, with the hypothetical server last.
struct Candidate {
  ServiceIdx service = 0;
  ServerIdx server = 0;

  auto operator<=>(const Candidate&) const = default;
};

struct CandidateSet {
  std::vector<Candidate> all;           // X
  std::vector<Candidate> priority;      // the S1 list, in file order
  std::vector<Candidate> hypothetical;  // dotX, every entry on kHypotheticalServer
};

class InfeasiblePlacement : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyServices : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Free compute and VRAM fraction of every GPU on the servers in scope.
class GpuLedger {
 public:
  GpuLedger(const ScenarioModel& model, const std::vector<ServerIdx>& servers);

  const std::vector<ServerIdx>& servers() const { return servers_; }
  std::vector<GpuRef> gpus(ServerIdx server) const;
  std::vector<GpuRef> all_gpus() const;
  double compute_free(GpuRef gpu) const;
  double vram_free(GpuRef gpu) const;
  bool fits(GpuRef gpu, double compute, double vram) const;
  void take(GpuRef gpu, double compute, double vram);
  void take(const Placement& placement, const ServiceSpec& service);

 private:
  struct Free {
    double compute = 1.0;
    double vram = 1.0;
  };
  std::vector<ServerIdx> servers_;
  std::vector<std::vector<Free>> free_;  // indexed by server
};

/// Greedy GPU choice for one placement: every slice goes to the fitting GPU with
/// the most free VRAM (then most free compute, then lowest index); all slices of
/// a placement land on distinct GPUs. Commits to `ledger` on success.
std::optional<Placement> try_assign_gpus(GpuLedger& ledger, const ServiceSpec& spec, ServiceIdx service,
                                         const AllocationPlan& plan, ServerIdx server);
Placement online_assign_gpus(GpuLedger& ledger, const ServiceSpec& spec, ServiceIdx service, const AllocationPlan& plan,
                             ServerIdx server);

struct ApproximationParam {
  int P = 0;
  double bound() const { return 1.0 / (1.0 + P); }
};

ApproximationParam approximation_P(const std::vector<ServiceSpec>& services);

/// phi: satisfied units of the evaluation trace under a placement list.
using Objective = std::function<std::int64_t(const PlacementList&)>;

enum class StageMode { S1, S2S3 };
enum class CandidateKind { Set, List };

/// Everything the greedy needs besides the candidates.
struct PlacementContext {
  const ScenarioModel* model = nullptr;
  const std::vector<AllocationPlan>* plans = nullptr;
  std::vector<ServerIdx> servers;  // live servers in scope
  Objective objective;
};

CandidateSet build_candidates(const PlacementContext& ctx);

/// Per-iteration record of the greedy, for inspection.
struct GreedyStep {
  Candidate chosen;
  std::int64_t phi = 0;
};

/// Submodular greedy over `candidates` starting from `theta0`.
PlacementList spf(const PlacementContext& ctx, const std::vector<Candidate>& candidates, CandidateKind kind,
                  const PlacementList& theta0, StageMode mode, std::vector<GreedyStep>* steps = nullptr);

/// Three stages: priority list, all server placements, then the hypothetical server.
PlacementList sssp(const PlacementContext& ctx, const CandidateSet& candidates, const PlacementList& theta0 = {},
                   std::vector<GreedyStep>* steps = nullptr);

struct BruteForceLimits {
  std::size_t max_configs = 1'000'000;
};

struct BruteForceResult {
  PlacementList theta;
  std::int64_t phi = 0;
  std::size_t configs = 0;
};

/// Exhaustive search over multisets of `candidates` that fit the GPUs.
BruteForceResult brute_force_optimal(const PlacementContext& ctx, const std::vector<Candidate>& candidates,
                                     const BruteForceLimits& limits = {});

/// Human-readable report: one line per placement.
std::string placement_report(const ScenarioModel& model, const PlacementList& theta);

}  // namespace edgeserve
