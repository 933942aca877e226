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

#include "edgeserve/scenario.hpp"

namespace edgeserve {

/// Arrival rows for every stream, sorted by arrival time (stable by stream order).
/// Each stream draws from its own seeded generator, so adding a stream does not
/// perturb the arrivals of the others.
std::vector<TraceRow> generate_workload(const std::vector<StreamSpec>& streams, std::uint64_t seed);

/// `count` streams sharing `total_rate_per_s`, with services and origins assigned
/// round-robin across the given lists.
std::vector<StreamSpec> round_robin_streams(std::size_t count, double total_rate_per_s,
                                            const std::vector<std::string>& services,
                                            const std::vector<std::string>& origins,
                                            ArrivalPattern pattern, TimeMs duration_ms,
                                            TimeMs on_ms = 0, TimeMs off_ms = 0);

std::string format_trace_csv(const std::vector<TraceRow>& rows);

}  // namespace edgeserve
