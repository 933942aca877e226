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


#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "edgeserve/bound.hpp"
#include "edgeserve/engine.hpp"
#include "edgeserve/placement.hpp"
#include "edgeserve/rng.hpp"

using namespace edgeserve;

namespace {

ServiceSpec demand(double a, double b) {
  ServiceSpec s;
  s.compute_demand = a;
  s.vram_demand = b;
  return s;
}

// Builds a context whose objective replays the scenario's own trace.
struct Fixture {
  ScenarioModel model;
  std::vector<AllocationPlan> plans;
  PlacementContext ctx;

  explicit Fixture(const std::string& text) : model(load_scenario(text)) {
    plans = build_plans(model, ProfileTable::from_scenario(model.spec()));
    ctx.model = &model;
    ctx.plans = &plans;
    for (ServerIdx s = 0; s < model.server_count(); ++s) ctx.servers.push_back(s);
    ctx.objective = make_objective(model, model.requests(), ctx.servers);
  }
};

std::string trace_rows(const std::vector<std::tuple<TimeMs, std::string, std::string>>& rows) {
  std::ostringstream out;
  out << "[trace]\narrival_ms,service_id,origin_server,frame_count\n";
  for (const auto& [t, svc, origin] : rows) out << t << ',' << svc << ',' << origin << ",1\n";
  return out.str();
}

const char* kTwoByTwo = R"(
[servers]
id
s0
s1

[gpus]
server,model,count
s0,P100,1
s1,P100,1

[services]
id,compute,vram,slo_ms,payload_bytes,bs,mt,compute_ms@P100
A,1.0,1.0,100,0,1,1,30
B,1.0,1.0,120,0,1,1,50
)";

Placement single(ServiceIdx service, ServerIdx server, const AllocationPlan& plan) {
  Placement p;
  p.service = service;
  p.server = server;
  p.groups = {{GpuRef{server, 0}}};
  p.plan = plan;
  return p;
}

}  // namespace

TEST_CASE("approximation parameter") {
  CHECK(approximation_P({demand(0.5, 0.5), demand(0.5, 0.5)}).P == 2);
  CHECK(approximation_P({demand(0.5, 0.5)}).bound() == doctest::Approx(1.0 / 3.0));
  const auto p = approximation_P({demand(0.1, 0.2), demand(0.5, 0.2)});
  CHECK(p.P == 6);
  CHECK(p.bound() == doctest::Approx(1.0 / 7.0));
  CHECK_THROWS_AS(approximation_P({}), EmptyServices);
}

TEST_CASE("approximation parameter of the chat mix by hand") {
  const auto m = load_scenario_file(std::string(EDGESERVE_SCENARIO_DIR) + "/case_study_llm.scn");
  // compute 0.4..1.0 -> ceil(2.5) = 3; vram 0.3..0.95 -> ceil(3.17) = 4.
  CHECK(approximation_P(m.services()).P == 7);
}

TEST_CASE("gpu assignment on one empty GPU") {
  Fixture f{std::string(kTwoByTwo)};
  GpuLedger ledger(f.model, {0});
  const auto svc = demand(0.3, 0.4);
  online_assign_gpus(ledger, svc, 0, AllocationPlan{}, 0);
  CHECK(ledger.compute_free({0, 0}) == doctest::Approx(0.7));
  CHECK(ledger.vram_free({0, 0}) == doctest::Approx(0.6));
}

TEST_CASE("gpu assignment prefers the most free VRAM") {
  Fixture f(R"(
[servers]
id
s0

[gpus]
server,model,count
s0,P100,2

[services]
id,compute,vram,slo_ms,compute_ms@P100
A,0.3,0.6,100,10
)");
  GpuLedger ledger(f.model, {0});
  ledger.take({0, 0}, 0.1, 0.5);
  ledger.take({0, 1}, 0.1, 0.1);
  const auto p = online_assign_gpus(ledger, f.model.service(0), 0, AllocationPlan{}, 0);
  CHECK(p.groups.front().front() == GpuRef{0, 1});
}

TEST_CASE("tensor parallel group needs distinct GPUs") {
  Fixture f{std::string(kTwoByTwo)};
  GpuLedger ledger(f.model, {0});
  AllocationPlan tp2;
  tp2.mp = {2, 1};
  CHECK_THROWS_AS(online_assign_gpus(ledger, demand(0.5, 0.5), 0, tp2, 0), InfeasiblePlacement);
  GpuLedger both(f.model, {0, 1});
  const auto p = online_assign_gpus(both, demand(0.5, 0.5), 0, tp2, kHypotheticalServer);
  CHECK(p.cross_server);
  CHECK(p.servers() == std::vector<ServerIdx>{0, 1});
}

TEST_CASE("empty placement serves nothing") {
  Fixture f(std::string(kTwoByTwo) + trace_rows({{0, "A", "s0"}, {10, "B", "s1"}}));
  CHECK(evaluate_goodput(f.model, {}, f.model.requests()) == 0);
}

TEST_CASE("one covering placement serves its whole trace") {
  std::vector<std::tuple<TimeMs, std::string, std::string>> rows;
  for (int k = 0; k < 10; ++k) rows.emplace_back(k * 100, "A", "s0");
  Fixture f(std::string(kTwoByTwo) + trace_rows(rows));
  PlacementList theta;
  theta.entries = {single(0, 0, f.plans[0])};
  CHECK(evaluate_goodput(f.model, theta, f.model.requests()) == 10);
}

TEST_CASE("goodput matches an independent step-by-step replay") {
  // Each service lives on one server and requests start at their host, so
  // every server is a single FIFO executor that admits a request only when it
  // can finish by the deadline.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    std::vector<std::tuple<TimeMs, std::string, std::string>> rows;
    for (int k = 0; k < 20; ++k) {
      const bool a = rng.below(2) == 0;
      rows.emplace_back(static_cast<TimeMs>(rng.below(400)), a ? "A" : "B", a ? "s0" : "s1");
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return std::get<0>(x) < std::get<0>(y); });
    Fixture f(std::string(kTwoByTwo) + trace_rows(rows));

    const std::map<std::string, std::pair<TimeMs, TimeMs>> svc = {{"A", {30, 100}}, {"B", {50, 120}}};
    std::map<std::string, TimeMs> free_at;
    std::int64_t expected = 0;
    for (const auto& [t, name, origin] : rows) {
      const auto [cost, slo] = svc.at(name);
      const TimeMs done = std::max(t, free_at[name]) + cost;
      if (done <= t + slo) {
        free_at[name] = done;
        ++expected;
      }
    }
    PlacementList theta;
    theta.entries = {single(0, 0, f.plans[0]), single(1, 1, f.plans[1])};
    CHECK(evaluate_goodput(f.model, theta, f.model.requests()) == expected);
    CHECK(expected < 20);
  }
}

TEST_CASE("single fitting candidate is placed once") {
  std::vector<std::tuple<TimeMs, std::string, std::string>> rows;
  for (int k = 0; k < 5; ++k) rows.emplace_back(k * 200, "A", "s0");
  Fixture f(std::string(kTwoByTwo) + trace_rows(rows));
  std::vector<GreedyStep> steps;
  const auto theta = spf(f.ctx, {Candidate{0, 0}}, CandidateKind::Set, {}, StageMode::S2S3, &steps);
  REQUIRE(theta.entries.size() == 1);
  CHECK(theta.entries[0].service == 0);
  CHECK(steps.back().phi == 5);
}

TEST_CASE("larger marginal gain is placed first") {
  std::vector<std::tuple<TimeMs, std::string, std::string>> rows;
  for (int k = 0; k < 6; ++k) rows.emplace_back(k * 200, "B", "s0");
  for (int k = 0; k < 2; ++k) rows.emplace_back(k * 200 + 1, "A", "s0");
  std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return std::get<0>(x) < std::get<0>(y); });
  Fixture f(std::string(kTwoByTwo) + trace_rows(rows));
  f.ctx.servers = {0};
  f.ctx.objective = make_objective(f.model, f.model.requests(), f.ctx.servers);
  const auto theta = spf(f.ctx, {Candidate{0, 0}, Candidate{1, 0}}, CandidateKind::Set, {}, StageMode::S2S3);
  REQUIRE(theta.entries.size() == 1);
  CHECK(theta.entries[0].service == 1);
}

TEST_CASE("without a priority list the three stages equal the last two") {
  std::vector<std::tuple<TimeMs, std::string, std::string>> rows;
  for (int k = 0; k < 8; ++k) rows.emplace_back(k * 50, k % 2 ? "A" : "B", k % 3 ? "s0" : "s1");
  Fixture f(std::string(kTwoByTwo) + trace_rows(rows));
  const auto c = build_candidates(f.ctx);
  CHECK(c.priority.empty());
  const auto staged = sssp(f.ctx, c);
  const auto s2 = spf(f.ctx, c.all, CandidateKind::Set, {}, StageMode::S2S3);
  const auto s3 = spf(f.ctx, c.hypothetical, CandidateKind::Set, s2, StageMode::S2S3);
  CHECK(staged == s3);
}

namespace {

const char* kPinned = R"(
[servers]
id
s0
s1

[gpus]
server,model,count
s0,P100,2
s1,P100,2

[services]
id,compute,vram,slo_ms,multi_gpu,payload_bytes,bs,mt,tp,compute_ms@P100
small,0.5,0.5,200,false,0,1,1,1,10
big,1.0,1.0,2000,true,0,1,1,2,100

[priority]
service,server
big,s1
)";

}  // namespace

TEST_CASE("priority list pins the heavy service first") {
  std::vector<std::tuple<TimeMs, std::string, std::string>> rows;
  for (int k = 0; k < 40; ++k) rows.emplace_back(k * 20, "small", k % 2 ? "s0" : "s1");
  rows.emplace_back(900, "big", "s1");
  Fixture f(std::string(kPinned) + trace_rows(rows));
  const auto c = build_candidates(f.ctx);
  REQUIRE(c.priority.size() == 1);
  const auto theta = sssp(f.ctx, c);
  REQUIRE_FALSE(theta.entries.empty());
  CHECK(theta.entries.front().service == f.model.service_index("big"));
  CHECK(theta.entries.front().servers() == std::vector<ServerIdx>{1});
}

TEST_CASE("a service no single server can hold is placed across servers") {
  std::string merged = R"(
[servers]
id
s0
s1

[gpus]
server,model,count
s0,P100,1
s1,P100,1

[services]
id,compute,vram,slo_ms,multi_gpu,payload_bytes,bs,mt,tp,compute_ms@P100
C,1.0,1.0,2000,true,1000,1,1,2,100
)";
  Fixture f(merged + trace_rows({{0, "C", "s0"}, {500, "C", "s1"}}));
  const auto c = build_candidates(f.ctx);
  CHECK(c.all.empty());
  REQUIRE(c.hypothetical.size() == 1);
  const auto theta = sssp(f.ctx, c);
  REQUIRE(theta.entries.size() == 1);
  CHECK(theta.entries[0].cross_server);
  GpuLedger ledger(f.model, {0, 1});
  CHECK_NOTHROW(ledger.take(theta.entries[0], f.model.service(0)));
  CHECK(evaluate_goodput(f.model, theta, f.model.requests()) == 2);
}

TEST_CASE("brute force over one candidate picks the better subset") {
  Fixture f(std::string(kTwoByTwo) + trace_rows({{0, "A", "s0"}, {10, "A", "s0"}}));
  const auto r = brute_force_optimal(f.ctx, {Candidate{0, 0}});
  CHECK(r.configs == 2);
  CHECK(r.phi == 2);
  CHECK(r.phi == std::max(f.ctx.objective({}), f.ctx.objective(r.theta)));
}

TEST_CASE("brute force dominates the greedy") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    Rng rng(seed);
    std::vector<std::tuple<TimeMs, std::string, std::string>> rows;
    for (int k = 0; k < 12; ++k) {
      rows.emplace_back(static_cast<TimeMs>(rng.below(300)), rng.below(2) ? "A" : "B", rng.below(2) ? "s0" : "s1");
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& x, const auto& y) { return std::get<0>(x) < std::get<0>(y); });
    Fixture f(std::string(kTwoByTwo) + trace_rows(rows));
    const auto c = build_candidates(f.ctx);
    const auto greedy = f.ctx.objective(sssp(f.ctx, c));
    CHECK(brute_force_optimal(f.ctx, c.all).phi >= greedy);
  }
}

TEST_CASE("brute force refuses oversized enumerations") {
  Fixture f(std::string(kTwoByTwo) + trace_rows({{0, "A", "s0"}}));
  const auto c = build_candidates(f.ctx);
  CHECK_THROWS_AS(brute_force_optimal(f.ctx, c.all, BruteForceLimits{1}), TooLarge);
}

TEST_CASE("greedy keeps the approximation ratio on random instances") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    CAPTURE(seed);
    const ScenarioModel m(make_bound_instance(seed));
    const auto o = verify_instance(m, 200'000);
    if (o.skipped) continue;
    CHECK(o.phi_opt >= o.phi_greedy);
    CHECK_FALSE(o.violated());
  }
}

TEST_CASE("one service means greedy is optimal") {
  BoundParams p;
  p.max_services = 1;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ScenarioModel m(make_bound_instance(seed, p));
    const auto o = verify_instance(m, 200'000);
    if (o.skipped) continue;
    CHECK(o.phi_greedy == o.phi_opt);
  }
}

TEST_CASE("plateau priority list terminates") {
  // Traffic only for A; the priority list repeats a zero-gain entry.
  std::string text = std::string(kTwoByTwo) + "\n[priority]\nservice,server\nB,s0\nB,s1\nB,s0\n" +
                     trace_rows({{0, "A", "s0"}});
  Fixture f(text);
  const auto c = build_candidates(f.ctx);
  std::vector<GreedyStep> steps;
  const auto theta = spf(f.ctx, c.priority, CandidateKind::List, {}, StageMode::S1, &steps);
  CHECK(steps.size() <= c.priority.size());
  CHECK(theta.entries.size() <= c.priority.size());
}

TEST_CASE("placement report lists every entry") {
  Fixture f{std::string(kTwoByTwo)};
  PlacementList theta;
  theta.epoch = 2;
  theta.entries = {single(0, 0, f.plans[0]), single(1, 1, f.plans[1])};
  const auto text = placement_report(f.model, theta);
  CHECK(text.find("# epoch 2: 2 placements") == 0);
  CHECK(text.find("service=A server=s0") != std::string::npos);
  CHECK(text.find("service=B server=s1") != std::string::npos);
}
