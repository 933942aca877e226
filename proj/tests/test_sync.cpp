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


#include <queue>
#include <vector>

#include "doctest.h"
#include "edgeserve/scenario.hpp"
#include "edgeserve/sync.hpp"

using namespace edgeserve;

namespace {

RingTopology ring_of(std::size_t n, TimeMs interval = 100) {
  std::vector<ServerIdx> live(n);
  for (std::size_t i = 0; i < n; ++i) live[i] = i;
  return make_rings(live, 0, interval).front();
}

std::vector<ClusterView> isolated(std::size_t n) {
  std::vector<ClusterView> v;
  for (std::size_t i = 0; i < n; ++i) v.emplace_back(i, n, 1);
  return v;
}

// Hop distance on the ring graph by breadth-first search.
std::vector<std::size_t> bfs(std::size_t n, std::size_t from) {
  std::vector<std::size_t> dist(n, n + 1);
  std::queue<std::size_t> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto w : {(u + 1) % n, (u + n - 1) % n}) {
      if (dist[w] > dist[u] + 1) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
    }
  }
  return dist;
}

}  // namespace

TEST_CASE("ring neighbours") {
  CHECK(ring_neighbors(0, 4) == std::pair<std::size_t, std::size_t>{3, 1});
  CHECK(ring_neighbors(2, 3) == std::pair<std::size_t, std::size_t>{1, 0});
  CHECK(ring_neighbors(0, 1) == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK_THROWS(ring_neighbors(0, 0));
}

TEST_CASE("two servers learn each other in one round") {
  const auto views = exchange_round(isolated(2), ring_of(2));
  CHECK(views[0].per_server[1].known);
  CHECK(views[1].per_server[0].known);
  CHECK(views[0].per_server[1].staleness_ms <= 100);
}

TEST_CASE("information spreads one hop per round") {
  for (std::size_t n : {3u, 5u, 6u, 7u, 16u}) {
    CAPTURE(n);
    const auto ring = ring_of(n);
    auto views = isolated(n);
    for (std::size_t round = 1; round <= (n + 1) / 2; ++round) {
      views = exchange_round(views, ring);
      for (std::size_t src = 0; src < n; ++src) {
        const auto dist = bfs(n, src);
        for (std::size_t dst = 0; dst < n; ++dst) {
          const auto& e = views[dst].per_server[src];
          CHECK(e.known == (dist[dst] <= round));
          if (e.known) CHECK(e.staleness_ms == static_cast<TimeMs>(dist[dst]) * 100);
        }
      }
    }
  }
}

TEST_CASE("antipodal server of six arrives in exactly three rounds") {
  const auto ring = ring_of(6);
  auto views = isolated(6);
  views = exchange_round(exchange_round(views, ring), ring);
  CHECK_FALSE(views[0].per_server[3].known);
  views = exchange_round(views, ring);
  CHECK(views[0].per_server[3].known);
}

TEST_CASE("exchanging converged views only ages nothing further") {
  const auto ring = ring_of(4);
  auto views = isolated(4);
  for (int k = 0; k < 3; ++k) views = exchange_round(views, ring);
  const auto again = exchange_round(views, ring);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t src = 0; src < 4; ++src) {
      auto a = views[i].per_server[src];
      auto b = again[i].per_server[src];
      a.staleness_ms = b.staleness_ms = 0;
      CHECK(a == b);
    }
  }
}

TEST_CASE("bypassing splices the ring") {
  const auto ring = ring_of(3);
  const auto out = bypass_faulty(ring, 1);
  CHECK(out.order == std::vector<ServerIdx>{0, 2});
  CHECK(ring_neighbors(out.ring_index(0), out.size()).second == out.ring_index(2));
  CHECK(out.messager.unavailable == std::vector<ServerIdx>{1});
  const auto empty = bypass_faulty(bypass_faulty(out, 0), 2);
  CHECK(empty.size() == 0);
  CHECK_THROWS_AS(bypass_faulty(out, 1), UnknownServer);
}

TEST_CASE("unavailable flags spread through the ring") {
  const auto ring = ring_of(4);
  auto views = isolated(4);
  for (int k = 0; k < 2; ++k) views = exchange_round(views, ring);
  flag_unavailable(views[0], 2);
  views = exchange_round(views, ring);
  CHECK(views[1].per_server[2].unavailable);
  CHECK(views[3].per_server[2].unavailable);
}

TEST_CASE("membership changes wait for the epoch boundary") {
  const auto ring = ring_of(3);
  MembershipQueue q;
  q.request_join(5);
  CHECK_THROWS_AS(q.apply(ring, false), std::logic_error);
  CHECK_FALSE(q.empty());
  q.request_exit(0);
  const auto out = q.apply(ring, true);
  CHECK(out.order == std::vector<ServerIdx>{1, 2, 5});
  CHECK(q.empty());

  std::vector<std::string> warnings;
  const auto same = apply_membership(ring, {}, {9}, true, &warnings);
  CHECK(same.order == ring.order);
  CHECK(warnings.size() == 1);
}

TEST_CASE("sync payload size") {
  CHECK(sync_transmit_ms(256, 4, 1000) == 1);
  CHECK(sync_transmit_ms(125'000, 1, 100) == 10);
}

namespace {

const char* kDevices = R"(
[control]
device_load_bandwidth_mbps = 100

[servers]
id
s0

[gpus]
server,model,count
s0,P100,1

[services]
id,compute,vram,slo_ms,multi_gpu,load_ms,model_mb,tp,compute_ms@P100,compute_ms@Jetson
cam,0.5,0.5,200,false,500,50,1,10,30
chat,1.0,1.0,4000,true,9000,16000,2,100,300
)";

}  // namespace

TEST_CASE("device registration picks a single-GPU service") {
  const auto m = load_scenario(kDevices);
  DeviceLoadQueue q;
  const auto a = register_device(m, 0, {"d0", "s0", "Jetson", 0}, {0, 100}, 1000, q);
  CHECK(a.service == m.service_index("cam"));
  // 50 MB at 100 Mbps is 4000 ms of transfer after a 500 ms load.
  CHECK(a.ready_ms == 1000 + 500 + 4000);
}

TEST_CASE("multi-GPU-only scenario has no service for a device") {
  std::string text = kDevices;
  text.erase(text.find("cam,"), text.find("chat,") - text.find("cam,"));
  const auto m = load_scenario(text);
  DeviceLoadQueue q;
  CHECK_THROWS_AS(register_device(m, 0, {"d0", "s0", "Jetson", 0}, {}, 0, q), NoEligibleService);
}

TEST_CASE("device loads queue behind each other") {
  const auto m = load_scenario(kDevices);
  DeviceLoadQueue q;
  // Deterministic service time 4500 ms; arrivals at 0, 1000 and 20000.
  const auto a = register_device(m, 0, {"d0", "s0", "Jetson", 0}, {}, 0, q);
  const auto b = register_device(m, 0, {"d1", "s0", "Jetson", 0}, {}, 1000, q);
  const auto c = register_device(m, 0, {"d2", "s0", "Jetson", 0}, {}, 20000, q);
  CHECK(a.ready_ms == 4500);
  CHECK(b.load_start_ms == 4500);
  CHECK(b.ready_ms == 9000);
  CHECK(c.load_start_ms == 20000);
  CHECK(c.ready_ms == 24500);
}

TEST_CASE("loading delay grows with queue position") {
  const auto m = load_scenario(kDevices);
  DeviceLoadQueue q;
  TimeMs previous = 0;
  for (int k = 0; k < 50; ++k) {
    const auto a = register_device(m, 0, {"d" + std::to_string(k), "s0", "Jetson", 0}, {}, 0, q);
    CHECK(a.ready_ms - a.registered_ms == 4500 * (k + 1));
    CHECK(a.ready_ms > previous);
    previous = a.ready_ms;
  }
}
