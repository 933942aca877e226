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


#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "edgeserve/engine.hpp"
#include "edgeserve/report.hpp"
#include "edgeserve/workload.hpp"

using namespace edgeserve;

namespace {

ScenarioModel load(const std::string& name, const std::vector<std::string>& overrides = {}) {
  return load_scenario_file(std::string(EDGESERVE_SCENARIO_DIR) + "/" + name + ".scn", overrides);
}

const std::vector<std::string> kSuite = {"minimal",  "case_study_llm", "dp_video", "hotspot", "symmetric",
                                         "bursty",   "fault8",         "undercap", "devices", "membership"};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace

TEST_CASE("transmit latency") {
  CHECK(transmit_latency(0, 100) == 1);
  CHECK(transmit_latency(125'000, 100) == 11);
  CHECK(transmit_latency(50'000, 100) == 5);
  CHECK(transmit_latency(1'000'000, 100) < 100);
  CHECK_THROWS_AS(transmit_latency(10, 0), ZeroBandwidth);
}

TEST_CASE("partial batches are charged at the next power of two") {
  const auto m = load("minimal");
  const LatencyTable t(m, ProfileTable::from_scenario(m.spec()));
  CHECK(t.batch_ms(0, "P100", 3, 1) == t.batch_ms(0, "P100", 4, 1));
  CHECK(t.batch_ms(0, "P100", 1, 1) == 10);
  CHECK(t.batch_ms(0, "P100", 5, 1) > t.batch_ms(0, "P100", 4, 1));
}

TEST_CASE("zero rate generates nothing") {
  StreamSpec s{"img", "s0", 0.0, ArrivalPattern::Poisson, 0, 10'000};
  CHECK(generate_workload({s}, 1).empty());
}

TEST_CASE("poisson arrival count concentrates") {
  StreamSpec s{"img", "s0", 10.0, ArrivalPattern::Poisson, 0, 100'000};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto n = static_cast<double>(generate_workload({s}, seed).size());
    CHECK(std::abs(n - 1000.0) <= 3.0 * std::sqrt(1000.0));
  }
}

TEST_CASE("on-off arrivals are burstier than poisson") {
  StreamSpec s{"img", "s0", 50.0, ArrivalPattern::OnOff, 0, 200'000, 1, 500, 1500};
  const auto rows = generate_workload({s}, 7);
  REQUIRE(rows.size() > 100);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < rows.size(); ++i) gaps.push_back(static_cast<double>(rows[i].arrival_ms - rows[i - 1].arrival_ms));
  const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
  double var = 0.0;
  for (double g : gaps) var += (g - mean) * (g - mean);
  var /= static_cast<double>(gaps.size() - 1);
  CHECK(std::sqrt(var) / mean > 1.0);
}

TEST_CASE("generated trace is sorted and reproducible") {
  const auto m = load("bursty");
  const auto a = generate_workload(m.spec().workload, 5);
  CHECK(a == generate_workload(m.spec().workload, 5));
  CHECK(a != generate_workload(m.spec().workload, 6));
  CHECK(std::is_sorted(a.begin(), a.end(), [](const auto& x, const auto& y) { return x.arrival_ms < y.arrival_ms; }));
  CHECK(format_trace_csv(a).rfind("arrival_ms,service_id,origin_server,frame_count\n", 0) == 0);
}

TEST_CASE("empty trace runs to empty metrics") {
  auto spec = load("minimal").spec();
  spec.workload.clear();
  const ScenarioModel m(std::move(spec));
  const auto r = run(m);
  CHECK(r.metrics.submitted == 0);
  CHECK(r.metrics.satisfied == 0);
  CHECK(timeseries_csv(r) == "t_ms,arrivals,completed,satisfied,offloads\n");
  CHECK(requests_csv(m, r) ==
        "id,service,origin,served_by,arrival_ms,completion_ms,outcome,offload_count,hop_path,submitted,satisfied\n");
}

TEST_CASE("under capacity nearly everything is satisfied") {
  const auto r = run(load("minimal"));
  CHECK(r.metrics.submitted > 150);
  CHECK(r.metrics.satisfaction_rate() > 0.99);
}

TEST_CASE("two data-parallel groups double the frame rate") {
  const auto r = run(load("dp_video"));
  REQUIRE(r.records.size() == 1);
  CHECK(std::abs(r.records[0].achieved_fps - 97.0) <= 9.7);
  REQUIRE_FALSE(r.placements.empty());
  CHECK(r.placements.front().entries.front().plan.dp_groups == 2);
}

TEST_CASE("satisfied totals re-derive from the per-request records") {
  for (const auto& name : kSuite) {
    CAPTURE(name);
    const auto m = load(name);
    const auto r = run(m);
    std::int64_t satisfied = 0, submitted = 0;
    for (const auto& rec : r.records) {
      const auto& svc = m.service(rec.service);
      std::int64_t s = 0;
      if (svc.frequency_sensitive()) {
        const auto frames = static_cast<int>(rec.submitted);
        s = rec.outcome == Outcome::Completed ? satisfied_frames(frames, *svc.frequency_slo, rec.achieved_fps) : 0;
      } else {
        s = satisfied_latency(rec.deadline_ms, rec.completion_ms);
      }
      CHECK(s == rec.satisfied);
      satisfied += s;
      submitted += rec.submitted;
    }
    CHECK(satisfied == r.metrics.satisfied);
    CHECK(submitted == r.metrics.submitted);
    std::int64_t arrivals = 0;
    for (const auto& row : r.timeseries) arrivals += row.arrivals;
    CHECK(arrivals == r.metrics.requests);
  }
}

TEST_CASE("paths never loop and offload counts stay bounded") {
  for (const auto& name : kSuite) {
    CAPTURE(name);
    const auto m = load(name);
    for (Strategy s : kAllStrategies) {
      const auto r = run_baseline(m, s);
      CHECK(r.invariant_violations.empty());
      for (const auto& rec : r.records) {
        auto path = rec.hop_path;
        std::sort(path.begin(), path.end());
        CHECK(std::adjacent_find(path.begin(), path.end()) == path.end());
        CHECK(rec.offload_count <= m.control().max_offload);
      }
    }
  }
}

TEST_CASE("disabling offloads turns remote work into resource shortage") {
  const auto m = load("hotspot", {"max_offload=0"});
  auto r = run(m);
  CHECK(r.metrics.offloads == 0);
  CHECK(r.metrics.outcomes[Outcome::OffloadExceeded] == 0);
  CHECK(r.metrics.outcomes[Outcome::ResourceInsufficient] > 0);
}

TEST_CASE("without offloading the hotspot loses goodput") {
  const auto m = load("hotspot");
  const auto full = run(m).metrics.satisfied;
  const auto none = run_baseline(m, Strategy::NoOffload).metrics.satisfied;
  CHECK(none < full);
}

TEST_CASE("round-robin matches under symmetric load") {
  const auto m = load("symmetric");
  const auto full = static_cast<double>(run(m).metrics.satisfied);
  const auto rr = static_cast<double>(run_baseline(m, Strategy::RoundRobin).metrics.satisfied);
  CHECK(std::abs(rr - full) / full <= 0.05);
}

TEST_CASE("central scheduling delay costs goodput on bursts") {
  const auto m = load("bursty");
  CHECK(run_baseline(m, Strategy::CentralizedGroup).metrics.satisfied <= run(m).metrics.satisfied);
}

TEST_CASE("a failed server is bypassed and never offloaded to again") {
  const auto m = load("fault8");
  const auto r = run(m);
  const auto s3 = m.server_index("s3");
  REQUIRE(r.bypassed_at.count(s3) == 1);
  CHECK(r.bypassed_at.at(s3) >= 15000);
  for (const auto& o : r.offloads) {
    if (o.at_ms >= r.bypassed_at.at(s3)) CHECK(o.to != s3);
  }
  CHECK(r.metrics.satisfied > 0);
}

TEST_CASE("membership changes take effect") {
  const auto m = load("membership");
  const auto r = run(m);
  const auto s1 = m.server_index("s1");
  const auto s2 = m.server_index("s2");
  bool s2_served = false, s1_late = false;
  for (const auto& rec : r.records) {
    if (rec.served_by == s2) s2_served = true;
    if (rec.served_by == s1 && rec.arrival_ms >= 20000) s1_late = true;
  }
  CHECK(s2_served);
  CHECK_FALSE(s1_late);
}

TEST_CASE("devices join after their model loads") {
  const auto m = load("devices");
  const auto r = run(m);
  REQUIRE(r.device_assignments.size() == 1);
  const auto& a = r.device_assignments.front();
  CHECK(a.registered_ms == 2000);
  CHECK(a.ready_ms > a.registered_ms);
  auto spec = m.spec();
  spec.devices.clear();
  CHECK(run(ScenarioModel(std::move(spec))).metrics.satisfied < r.metrics.satisfied);
}

TEST_CASE("seeds change handler draws but not the file inputs") {
  const auto m = load("bursty");
  const auto a = run(m, 11);
  const auto b = run(m, 11);
  CHECK(a.event_hash == b.event_hash);
  CHECK(run(m, 12).event_hash != a.event_hash);
}

TEST_CASE("emitted files are byte-identical across runs") {
  const auto m = load("fault8");
  const auto root = std::filesystem::temp_directory_path() / "edgeserve_unit";
  const auto a = emit_metrics(m, run(m), (root / "a").string());
  const auto b = emit_metrics(m, run(m), (root / "b").string());
  REQUIRE(a.size() == 5);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(slurp(a[i]) == slurp(b[i]));
  CHECK(slurp(a[0]).rfind("key,value\nrequests,", 0) == 0);
}

TEST_CASE("unwritable output directory raises an output error") {
  const auto m = load("minimal");
  CHECK_THROWS_AS(emit_metrics(m, RunResult{}, "/proc/edgeserve/cannot"), OutputError);
}
