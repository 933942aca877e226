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
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edgeserve/allocator.hpp"
#include "edgeserve/model.hpp"
#include "edgeserve/scenario.hpp"

namespace edgeserve {

/// What one server publishes about one service it may host.
struct ServiceStat {
  bool hosted = false;
  double theoretical = 0.0;  // p-hat, units per second the placement can sustain
  double processed = 0.0;    // p, units per second completed over the last window
  double backlog_ms = 0.0;   // expected compute time of queued work

  bool operator==(const ServiceStat&) const = default;
};

/// One server's cached knowledge about one source server.
struct ViewEntry {
  bool known = false;
  bool unavailable = false;
  std::uint64_t epoch = 0;  // placement epoch the source was serving
  std::uint64_t seq = 0;    // source-local snapshot counter
  TimeMs staleness_ms = 0;  // age at the last sync round
  TimeMs window_ms = 0;     // length of the window `processed` was measured over
  std::vector<ServiceStat> services;

  bool operator==(const ViewEntry&) const = default;
};

/// A server's possibly stale snapshot of every server in its ring.
struct ClusterView {
  ServerIdx owner = 0;
  TimeMs as_of_ms = 0;  // time of the last sync round that touched this view
  std::vector<ViewEntry> per_server;

  ClusterView() = default;
  ClusterView(ServerIdx owner, std::size_t servers, std::size_t services);

  /// Age of the knowledge about `source` at `now`. Zero for the owner.
  TimeMs staleness(ServerIdx source, TimeMs now) const;

  bool operator==(const ClusterView&) const = default;
};

std::pair<std::size_t, std::size_t> ring_neighbors(std::size_t idx, std::size_t n);

class UnknownServer : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Central registry of stationary server information.
struct Messager {
  std::map<ServerIdx, std::string> registered;  // server -> address label
  std::vector<ServerIdx> unavailable;

  bool operator==(const Messager&) const = default;
};

struct RingTopology {
  std::vector<ServerIdx> order;  // position in this vector is the ring index
  TimeMs sync_interval_ms = 100;
  Messager messager;

  std::size_t size() const { return order.size(); }
  bool contains(ServerIdx server) const;
  std::size_t ring_index(ServerIdx server) const;

  bool operator==(const RingTopology&) const = default;
};

/// Rings of at most `group_size` consecutive servers (0: one ring for all).
std::vector<RingTopology> make_rings(const std::vector<ServerIdx>& live, int group_size, TimeMs sync_interval_ms);

/// One synchronous round: each ring member merges both neighbours' caches.
/// Every entry ages by one interval; per source the freshest copy wins, ties go
/// to the higher snapshot counter and then to the neighbour's copy; the owner's
/// own entry resets to staleness zero. Views of servers outside the ring are
/// returned unchanged.
std::vector<ClusterView> exchange_round(const std::vector<ClusterView>& views, const RingTopology& ring);

/// Splices `faulty` out of the ring and flags it unavailable in the messager.
RingTopology bypass_faulty(const RingTopology& ring, ServerIdx faulty);

/// Marks `server` unavailable in a view (the messager broadcast after a bypass).
void flag_unavailable(ClusterView& view, ServerIdx server);

/// Join/exit requests held until the next placement epoch boundary.
class MembershipQueue {
 public:
  void request_join(ServerIdx server) { joins_.push_back(server); }
  void request_exit(ServerIdx server) { exits_.push_back(server); }
  bool empty() const { return joins_.empty() && exits_.empty(); }

  /// Applies every pending request atomically. Throws std::logic_error unless
  /// called at an epoch boundary. Exits of servers not in the ring are ignored
  /// and reported through `warnings`.
  RingTopology apply(const RingTopology& ring, bool at_epoch_boundary, std::vector<std::string>* warnings = nullptr);

 private:
  std::vector<ServerIdx> joins_;
  std::vector<ServerIdx> exits_;
};

RingTopology apply_membership(const RingTopology& ring, const std::vector<ServerIdx>& joins,
                              const std::vector<ServerIdx>& exits, bool at_epoch_boundary,
                              std::vector<std::string>* warnings = nullptr);

/// Transmit time of one sync payload of `bytes_per_server * servers` bytes.
TimeMs sync_transmit_ms(std::int64_t bytes_per_server, std::size_t servers, double bandwidth_mbps);

// ---------------------------------------------------------------------------
// Edge devices
// ---------------------------------------------------------------------------

class NoEligibleService : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Serial model-loading channel of one server towards its devices.
struct DeviceLoadQueue {
  TimeMs free_at_ms = 0;
};

struct DeviceAssignment {
  std::string device;
  ServerIdx server = 0;
  ServiceIdx service = 0;
  TimeMs registered_ms = 0;
  TimeMs load_start_ms = 0;
  TimeMs ready_ms = 0;
};

/// Picks the single-GPU service with the highest `demand` (ties: lowest index)
/// and schedules its model load behind earlier registrations on the server.
DeviceAssignment register_device(const ScenarioModel& model, ServerIdx server, const DeviceSpec& device,
                                 const std::vector<std::int64_t>& demand, TimeMs now, DeviceLoadQueue& queue);

}  // namespace edgeserve
