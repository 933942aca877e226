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

#include "doctest.h"
#include "edgeserve/allocator.hpp"
#include "edgeserve/scenario.hpp"

using namespace edgeserve;

namespace {

ServiceSpec service(double a, double b, TimeMs slo) {
  ServiceSpec s;
  s.id = "svc";
  s.compute_demand = a;
  s.vram_demand = b;
  s.latency_slo_ms = slo;
  s.compute_time_ms["G"] = 10;
  return s;
}

// Goodput and latency tabulated for bs = 1..512.
ProfileTable table(const std::string& id, double (*goodput)(int), double (*latency)(int), int mt = 1) {
  ProfileTable t;
  for (int bs = 1; bs <= 512; bs *= 2) t.set(id, "G", bs, mt, {goodput(bs), latency(bs)});
  return t;
}

}  // namespace

TEST_CASE("categorize covers the four quadrants") {
  auto video = service(0.3, 0.3, 100);
  video.frequency_slo = 60;
  CHECK(categorize(video) == TaskCategory{Sensitivity::Frequency, GpuClass::SingleGpu});
  auto chat = service(1.0, 1.0, 4000);
  chat.needs_multi_gpu = true;
  CHECK(categorize(chat) == TaskCategory{Sensitivity::Latency, GpuClass::MultiGpu});
  CHECK(categorize(service(0.5, 0.5, 100)) == TaskCategory{Sensitivity::Latency, GpuClass::SingleGpu});
  auto big_video = chat;
  big_video.frequency_slo = 30;
  CHECK(categorize(big_video) == TaskCategory{Sensitivity::Frequency, GpuClass::MultiGpu});
}

TEST_CASE("batch size: monotone profile picks the largest") {
  const auto s = service(0.5, 0.5, 1'000'000);
  const auto t = table(s.id, [](int bs) { return 10.0 * bs; }, [](int bs) { return 1.0 * bs; });
  CHECK(select_batch_size(s, "G", t) == 512);
}

TEST_CASE("batch size: latency budget clamps") {
  const auto s = service(0.5, 0.5, 1'000'000);
  const auto t = table(s.id, [](int bs) { return 10.0 * bs; }, [](int bs) { return 10.0 * bs; });
  CHECK(select_batch_size(s, "G", t, 100.0) == 8);
}

TEST_CASE("batch size: peak in the middle of the range") {
  const auto m = load_scenario_file(std::string(EDGESERVE_SCENARIO_DIR) + "/case_study_llm.scn");
  const auto profiles = ProfileTable::from_scenario(m.spec());
  CHECK(select_batch_size(m.service(0), "P100", profiles) == 2);
}

TEST_CASE("multitask degree") {
  const auto m = load_scenario_file(std::string(EDGESERVE_SCENARIO_DIR) + "/case_study_llm.scn");
  const auto profiles = ProfileTable::from_scenario(m.spec());
  CHECK(select_multitask_degree(m.service(0), "P100", profiles, 2) == 2);

  auto wide = service(0.3, 0.6, 1'000'000);
  ProfileTable t;
  t.set(wide.id, "G", 1, 1, {10, 10});
  t.set(wide.id, "G", 1, 2, {20, 10});
  CHECK(select_multitask_degree(wide, "G", t, 1) == 1);

  auto flat = service(0.2, 0.2, 1'000'000);
  ProfileTable f;
  for (int mt = 1; mt <= 5; ++mt) f.set(flat.id, "G", 1, mt, {10, 10.0 * mt});
  CHECK(select_multitask_degree(flat, "G", f, 1) == 1);
}

TEST_CASE("data-parallel group count") {
  CHECK(dp_group_count(60, 30) == 2);
  CHECK(dp_group_count(60, 24) == 3);
  CHECK(dp_group_count(120, 49) == 3);
  CHECK(dp_group_count(30, 60) == 1);
}

TEST_CASE("inter-frame count") {
  CHECK(max_inter_frame_count(30, 30) == 1);
  CHECK(max_inter_frame_count(66, 60) == 3);
  CHECK(max_inter_frame_count(1000, 4) == 4);
}

TEST_CASE("inter-request count") {
  CHECK(inter_request_count(8, 4) == 2);
  CHECK(inter_request_count(4, 4) == 1);
  CHECK(inter_request_count(2, 4) == 0);
}

TEST_CASE("plans honour pinned model parallelism") {
  const auto m = load_scenario_file(std::string(EDGESERVE_SCENARIO_DIR) + "/case_study_llm.scn");
  const auto profiles = ProfileTable::from_scenario(m.spec());
  const auto plans = build_plans(m, profiles);
  const auto& big = plans[m.service_index("qwen2.5-32b")];
  CHECK(big.bs == 4);
  CHECK(big.mp.tp == 2);
  CHECK(big.mp.pp == 2);
  CHECK(big.mt == 1);
  const auto& small = plans[m.service_index("qwen-1.5b")];
  CHECK(small.bs == 2);
  CHECK(small.mt == 2);
}

TEST_CASE("multi-GPU video plan uses several frames per request and two groups") {
  auto s = service(0.5, 0.5, 200);
  s.needs_multi_gpu = true;
  s.frequency_slo = 30;
  s.frame_budget_ms = 140;
  ProfileTable t;
  for (int bs = 1; bs <= 512; bs *= 2) {
    t.set(s.id, "G", bs, 1, {10.0, 40.0 * bs});
    t.set(s.id, "G", bs, 2, {5.0, 80.0 * bs});
  }
  t.set(s.id, "G", 4, 1, {20.0, 133.0});
  const auto plan = build_allocation_plan(s, categorize(s), t, "G");
  CHECK(plan.bs == 4);
  CHECK(plan.mt == 1);
  CHECK(plan.mf == 4);
  CHECK(plan.dp_groups == 2);
  CHECK(plan.inter_request_count == 1);
}

TEST_CASE("latency single-GPU plans never use groups or frames") {
  const auto s = service(0.5, 0.5, 200);
  ProfileTable t;
  for (int bs = 1; bs <= 512; bs *= 2) {
    t.set(s.id, "G", bs, 1, {10.0 * bs, 10.0 * bs});
    t.set(s.id, "G", bs, 2, {15.0 * bs, 12.0 * bs});
  }
  const auto plan = build_allocation_plan(s, categorize(s), t, "G");
  CHECK(plan.dp_groups == 1);
  CHECK(plan.mf == 1);
  CHECK(plan.bs == 16);
  CHECK(plan.mt == 2);
}

TEST_CASE("synthesized profile follows the analytic form") {
  const ProfileSynth synth;
  const auto e = ProfileTable::synthesize(10.0, 4, 2, synth);
  const double expect = 10.0 * (1 + 0.25 * 3) * (1 + 0.6 * 1);
  CHECK(e.latency_ms == doctest::Approx(expect));
}
