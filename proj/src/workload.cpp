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

#include "edgeserve/workload.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "edgeserve/rng.hpp"

namespace edgeserve {
namespace {

double exponential_ms(Rng& rng, double rate_per_ms) {
  return -std::log(1.0 - rng.uniform()) / rate_per_ms;
}

void emit_stream(const StreamSpec& stream, Rng& rng, std::vector<TraceRow>& out) {
  if (stream.rate_per_s <= 0.0 || stream.duration_ms <= 0) return;
  const double end = static_cast<double>(stream.start_ms + stream.duration_ms);

  if (stream.pattern == ArrivalPattern::Poisson) {
    const double rate = stream.rate_per_s / 1000.0;
    for (double t = stream.start_ms + exponential_ms(rng, rate); t < end; t += exponential_ms(rng, rate)) {
      out.push_back({static_cast<TimeMs>(t), stream.service, stream.origin, stream.frames});
    }
    return;
  }

  // On-off: a Poisson process in "on time" at the boosted rate, mapped onto the
  // wall clock by inserting an off period after every on period. The mean rate
  // over a full cycle equals rate_per_s.
  const double on = static_cast<double>(stream.on_ms);
  const double cycle = on + static_cast<double>(stream.off_ms);
  const double rate = stream.rate_per_s / 1000.0 * cycle / on;
  for (double tau = exponential_ms(rng, rate);; tau += exponential_ms(rng, rate)) {
    const double wall = stream.start_ms + std::floor(tau / on) * cycle + std::fmod(tau, on);
    if (wall >= end) break;
    out.push_back({static_cast<TimeMs>(wall), stream.service, stream.origin, stream.frames});
  }
}

}  // namespace

std::vector<TraceRow> generate_workload(const std::vector<StreamSpec>& streams, std::uint64_t seed) {
  std::vector<TraceRow> rows;
  for (std::size_t i = 0; i < streams.size(); ++i) {
    Rng rng = Rng::derive(seed, 0x7ace0000ULL + i);
    emit_stream(streams[i], rng, rows);
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const TraceRow& a, const TraceRow& b) { return a.arrival_ms < b.arrival_ms; });
  return rows;
}

std::vector<StreamSpec> round_robin_streams(std::size_t count, double total_rate_per_s,
                                            const std::vector<std::string>& services,
                                            const std::vector<std::string>& origins,
                                            ArrivalPattern pattern, TimeMs duration_ms, TimeMs on_ms,
                                            TimeMs off_ms) {
  std::vector<StreamSpec> streams;
  if (count == 0 || services.empty() || origins.empty()) return streams;
  for (std::size_t i = 0; i < count; ++i) {
    StreamSpec s;
    s.service = services[i % services.size()];
    s.origin = origins[(i / services.size()) % origins.size()];
    s.rate_per_s = total_rate_per_s / static_cast<double>(count);
    s.pattern = pattern;
    s.duration_ms = duration_ms;
    s.on_ms = on_ms;
    s.off_ms = off_ms;
    streams.push_back(s);
  }
  return streams;
}

std::string format_trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream out;
  out << "arrival_ms,service_id,origin_server,frame_count\n";
  for (const auto& r : rows) {
    out << r.arrival_ms << ',' << r.service << ',' << r.origin << ',' << r.frame_count << '\n';
  }
  return out.str();
}

}  // namespace edgeserve
