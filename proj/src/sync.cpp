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

#include "edgeserve/sync.hpp"

#include <algorithm>
#include <cmath>

namespace edgeserve {

ClusterView::ClusterView(ServerIdx owner_, std::size_t servers, std::size_t services) : owner(owner_) {
  per_server.resize(servers);
  for (auto& e : per_server) e.services.resize(services);
  per_server.at(owner).known = true;
}

TimeMs ClusterView::staleness(ServerIdx source, TimeMs now) const {
  if (source == owner) return 0;
  return per_server.at(source).staleness_ms + std::max<TimeMs>(0, now - as_of_ms);
}

std::pair<std::size_t, std::size_t> ring_neighbors(std::size_t idx, std::size_t n) {
  if (n == 0) throw std::invalid_argument("ring must have at least one member");
  return {(idx + n - 1) % n, (idx + 1) % n};
}

bool RingTopology::contains(ServerIdx server) const {
  return std::find(order.begin(), order.end(), server) != order.end();
}

std::size_t RingTopology::ring_index(ServerIdx server) const {
  const auto it = std::find(order.begin(), order.end(), server);
  if (it == order.end()) throw UnknownServer("server " + std::to_string(server) + " is not in the ring");
  return static_cast<std::size_t>(it - order.begin());
}

std::vector<RingTopology> make_rings(const std::vector<ServerIdx>& live, int group_size, TimeMs sync_interval_ms) {
  std::vector<RingTopology> rings;
  const std::size_t chunk = group_size <= 0 ? std::max<std::size_t>(live.size(), 1) : static_cast<std::size_t>(group_size);
  for (std::size_t start = 0; start < live.size(); start += chunk) {
    RingTopology ring;
    ring.sync_interval_ms = sync_interval_ms;
    for (std::size_t i = start; i < std::min(live.size(), start + chunk); ++i) {
      ring.order.push_back(live[i]);
      ring.messager.registered[live[i]] = "server-" + std::to_string(live[i]);
    }
    rings.push_back(std::move(ring));
  }
  if (rings.empty()) rings.push_back(RingTopology{{}, sync_interval_ms, {}});
  return rings;
}

namespace {

// True when `candidate` should replace `current` for the same source.
bool fresher(const ViewEntry& candidate, const ViewEntry& current) {
  if (!current.known) return candidate.known;
  if (!candidate.known) return false;
  if (candidate.staleness_ms != current.staleness_ms) return candidate.staleness_ms < current.staleness_ms;
  if (candidate.seq != current.seq) return candidate.seq > current.seq;
  return true;  // neighbour copy wins ties, which heals local corruption
}

}  // namespace

std::vector<ClusterView> exchange_round(const std::vector<ClusterView>& views, const RingTopology& ring) {
  std::vector<ClusterView> next = views;
  const std::size_t n = ring.size();
  const TimeMs interval = ring.sync_interval_ms;

  for (std::size_t i = 0; i < n; ++i) {
    const ServerIdx self = ring.order[i];
    const auto [li, ri] = ring_neighbors(i, n);
    const ServerIdx left = ring.order[li];
    const ServerIdx right = ring.order[ri];
    const ClusterView& mine = views.at(self);
    ClusterView& out = next.at(self);

    for (std::size_t src = 0; src < mine.per_server.size(); ++src) {
      if (src == self) {
        out.per_server[src].known = true;
        out.per_server[src].staleness_ms = 0;
        continue;
      }
      ViewEntry best = mine.per_server[src];
      bool unavailable = best.unavailable;
      if (best.known) best.staleness_ms += interval;
      for (ServerIdx nb : {left, right}) {
        if (nb == self) continue;
        ViewEntry incoming = views.at(nb).per_server[src];
        unavailable = unavailable || incoming.unavailable;
        if (!incoming.known) continue;
        incoming.staleness_ms += interval;
        if (fresher(incoming, best)) best = std::move(incoming);
      }
      best.unavailable = unavailable;
      out.per_server[src] = std::move(best);
    }
  }
  return next;
}

RingTopology bypass_faulty(const RingTopology& ring, ServerIdx faulty) {
  if (!ring.contains(faulty)) throw UnknownServer("cannot bypass server " + std::to_string(faulty) + ": not in the ring");
  RingTopology out = ring;
  out.order.erase(std::find(out.order.begin(), out.order.end(), faulty));
  out.messager.unavailable.push_back(faulty);
  return out;
}

void flag_unavailable(ClusterView& view, ServerIdx server) {
  auto& e = view.per_server.at(server);
  e.unavailable = true;
  for (auto& s : e.services) s.hosted = false;
}

RingTopology apply_membership(const RingTopology& ring, const std::vector<ServerIdx>& joins,
                              const std::vector<ServerIdx>& exits, bool at_epoch_boundary,
                              std::vector<std::string>* warnings) {
  if (!at_epoch_boundary) throw std::logic_error("membership changes apply only at placement epoch boundaries");
  RingTopology out = ring;
  for (ServerIdx s : exits) {
    const auto it = std::find(out.order.begin(), out.order.end(), s);
    if (it == out.order.end()) {
      if (warnings) warnings->push_back("exit of server " + std::to_string(s) + " ignored: not in the ring");
      continue;
    }
    out.order.erase(it);
    out.messager.registered.erase(s);
  }
  for (ServerIdx s : joins) {
    if (out.contains(s)) continue;
    out.order.push_back(s);
    out.messager.registered[s] = "server-" + std::to_string(s);
  }
  return out;
}

RingTopology MembershipQueue::apply(const RingTopology& ring, bool at_epoch_boundary, std::vector<std::string>* warnings) {
  auto out = apply_membership(ring, joins_, exits_, at_epoch_boundary, warnings);
  joins_.clear();
  exits_.clear();
  return out;
}

TimeMs sync_transmit_ms(std::int64_t bytes_per_server, std::size_t servers, double bandwidth_mbps) {
  if (!(bandwidth_mbps > 0.0)) throw std::invalid_argument("bandwidth must be positive");
  const double bits = static_cast<double>(bytes_per_server) * static_cast<double>(servers) * 8.0;
  return static_cast<TimeMs>(std::ceil(bits / (bandwidth_mbps * 1000.0)));
}

DeviceAssignment register_device(const ScenarioModel& model, ServerIdx server, const DeviceSpec& device,
                                 const std::vector<std::int64_t>& demand, TimeMs now, DeviceLoadQueue& queue) {
  std::optional<ServiceIdx> pick;
  for (ServiceIdx i = 0; i < model.service_count(); ++i) {
    if (model.service(i).needs_multi_gpu) continue;
    const auto d = i < demand.size() ? demand[i] : 0;
    if (!pick || d > (*pick < demand.size() ? demand[*pick] : 0)) pick = i;
  }
  if (!pick) throw NoEligibleService("device " + device.id + ": every service needs more than one GPU");

  const auto& svc = model.service(*pick);
  const double load_bits = svc.model_mb * 8.0e6;
  const auto transfer = static_cast<TimeMs>(std::ceil(load_bits / (model.control().device_load_bandwidth_mbps * 1000.0)));

  DeviceAssignment a;
  a.device = device.id;
  a.server = server;
  a.service = *pick;
  a.registered_ms = now;
  a.load_start_ms = std::max(now, queue.free_at_ms);
  a.ready_ms = a.load_start_ms + svc.model_load_ms + transfer;
  queue.free_at_ms = a.ready_ms;
  return a;
}

}  // namespace edgeserve
