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
#include <string>
#include <vector>

#include "edgeserve/placement.hpp"
#include "edgeserve/scenario.hpp"

namespace edgeserve {

/// Shape of the random instances. Every server carries exactly one GPU.
struct BoundParams {
  int min_servers = 2;
  int max_servers = 4;
  int max_services = 4;
  int max_requests = 30;
  std::vector<double> compute_demands = {0.5, 1.0};
  std::vector<double> vram_demands = {0.5, 1.0};
  std::size_t max_configs = 200'000;
};

/// A small random scenario for exhaustive comparison.
Scenario make_bound_instance(std::uint64_t seed, const BoundParams& params = {});

struct BoundOutcome {
  std::uint64_t seed = 0;
  std::size_t servers = 0;
  std::size_t services = 0;
  std::size_t requests = 0;
  int P = 0;
  double bound = 0.0;
  std::int64_t phi_greedy = 0;
  std::int64_t phi_opt = 0;
  double ratio = 1.0;  // 1 when the optimum is zero
  std::size_t configs = 0;
  bool skipped = false;
  std::string note;

  bool violated() const { return !skipped && ratio + 1e-12 < bound; }
};

/// Greedy placement against the exhaustive optimum on one scenario.
BoundOutcome verify_instance(const ScenarioModel& model, std::size_t max_configs);

struct BoundReport {
  std::vector<BoundOutcome> outcomes;
  double min_ratio = 1.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  std::size_t violations = 0;
};

/// Checks `count` solvable instances starting at `first_seed`; instances that
/// exceed the enumeration guard are skipped and replaced by the next seed.
BoundReport verify_bound(std::size_t count, std::uint64_t first_seed, const BoundParams& params = {}, unsigned threads = 0);

std::string bound_csv(const BoundReport& report);

}  // namespace edgeserve
