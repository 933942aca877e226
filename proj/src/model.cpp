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

#include "edgeserve/model.hpp"

#include <algorithm>
#include <cmath>

namespace edgeserve {

std::string to_string(const TaskCategory& category) {
  std::string out = category.sensitivity == Sensitivity::Latency ? "latency" : "frequency";
  out += category.gpu_class == GpuClass::SingleGpu ? "/single" : "/multi";
  return out;
}

std::string to_string(Outcome outcome) {
  switch (outcome) {
    case Outcome::Pending: return "pending";
    case Outcome::Completed: return "completed";
    case Outcome::Timeout: return "timeout";
    case Outcome::OffloadExceeded: return "offload_exceeded";
    case Outcome::ResourceInsufficient: return "resource_insufficient";
    case Outcome::Lost: return "lost";
  }
  return "unknown";
}

bool Request::visited(ServerIdx server) const {
  return std::find(hop_path.begin(), hop_path.end(), server) != hop_path.end();
}

std::int64_t satisfied_frames(int frame_count, double frequency_slo, double achieved_fps) {
  if (frame_count <= 0 || frequency_slo <= 0.0) return 0;
  const double ratio = std::clamp(achieved_fps / frequency_slo, 0.0, 1.0);
  // Small epsilon so that e.g. 120 * 0.5 lands on 60 rather than 59.
  return static_cast<std::int64_t>(std::floor(static_cast<double>(frame_count) * ratio + 1e-9));
}

std::int64_t satisfied_latency(TimeMs deadline_ms, std::optional<TimeMs> completion_ms) {
  return completion_ms && *completion_ms <= deadline_ms ? 1 : 0;
}

std::int64_t submitted_units(const Request& request, const ServiceSpec& service) {
  return service.frequency_sensitive() ? request.frame_count : 1;
}

}  // namespace edgeserve
