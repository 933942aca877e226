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

#include "edgeserve/engine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <memory>
#include <queue>
#include <set>

#include "edgeserve/handler.hpp"
#include "edgeserve/rng.hpp"

namespace edgeserve {

TimeMs transmit_latency(std::int64_t bytes, double bandwidth_mbps, TimeMs overhead_ms) {
  if (!(bandwidth_mbps > 0.0)) throw ZeroBandwidth("bandwidth must be positive");
  if (bytes < 0) throw std::invalid_argument("payload size must be non-negative");
  const double bits = static_cast<double>(bytes) * 8.0;
  return static_cast<TimeMs>(std::ceil(bits / (bandwidth_mbps * 1000.0) - 1e-9)) + overhead_ms;
}

LatencyTable::LatencyTable(const ScenarioModel& model, ProfileTable profiles)
    : model_(&model), profiles_(std::move(profiles)) {}

TimeMs LatencyTable::batch_ms(ServiceIdx service, const std::string& gpu_model, int count, int mt) const {
  int bs = 1;
  while (bs < count && bs < kBatchSizes.back()) bs *= 2;
  const double ms = profiles_.at(model_->service(service).id, gpu_model, bs, mt).latency_ms;
  return std::max<TimeMs>(1, static_cast<TimeMs>(std::ceil(ms - 1e-9)));
}

TimeMs LatencyTable::load_ms(ServiceIdx service) const { return model_->service(service).model_load_ms; }

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::Full: return "full";
    case Strategy::RoundRobin: return "round_robin";
    case Strategy::NoOffload: return "no_offload";
    case Strategy::CentralizedGroup: return "centralized_group";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(const std::string& name) {
  for (Strategy s : kAllStrategies) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

namespace {

// Tables every run of one scenario shares. Built once per top-level call so the
// placement objective does not rebuild them per candidate.
struct Shared {
  explicit Shared(const ScenarioModel& model)
      : latency(model, ProfileTable::from_scenario(model.spec())), plans(build_plans(model, latency.profiles())) {}
  LatencyTable latency;
  std::vector<AllocationPlan> plans;
};

enum class EventKind : std::uint8_t {
  Arrival,
  Handle,
  BatchComplete,
  BatchTimeout,
  FrameRelease,
  SyncRound,
  PlacementEpoch,
  DeviceRegister,
  DeviceReady,
  Fault,
  Corrupt,
  Join,
  Exit,
  CentralDecision,
  DirectEnqueue,
};

struct Event {
  TimeMs time = 0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::Arrival;
  std::size_t a = 0, b = 0, c = 0, d = 0;
};

struct EventLater {
  bool operator()(const Event& x, const Event& y) const { return x.time != y.time ? x.time > y.time : x.seq > y.seq; }
};

struct Item {
  std::size_t request = 0;
  int frame = -1;  // -1 for latency requests
  TimeMs enqueued_ms = 0;
};

struct Group {
  std::vector<GpuRef> gpus;  // empty on devices
  std::string gpu_model;
  std::vector<double> boundary_mbps;  // one per server boundary inside the group
  std::vector<TimeMs> executor_free;  // one per multitask slice
  std::deque<Item> queue;
  std::optional<TimeMs> timeout_at;
  std::set<std::size_t> inflight;  // batch ids
};

struct Instance {
  ServiceIdx service = 0;
  ServerIdx anchor = 0;
  std::vector<ServerIdx> servers;
  bool cross = false;
  bool device = false;
  AllocationPlan plan;
  std::vector<Group> groups;
  TimeMs ready_ms = 0;
  bool alive = true;
  bool draining = false;
  TimeMs full_ms = 1;     // one full batch including transfers
  double capacity = 0.0;  // units per second
  double active_fps = 0.0;
  std::optional<Placement> placement;
};

struct Stream {
  std::size_t instance = 0;
  TimeMs start_ms = 0;
  int released = 0;
  int done = 0;
  TimeMs first_done = 0;
  TimeMs last_done = 0;
};

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv(std::uint64_t& h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
}

class Simulator {
 public:
  Simulator(const ScenarioModel& model, std::shared_ptr<const Shared> shared, const RunOptions& options)
      : model_(model), shared_(std::move(shared)), opt_(options), ctl_(model.control()) {
    n_ = model.server_count();
    s_ = model.service_count();
    requests_ = opt_.requests ? *opt_.requests : model.requests();
    records_.resize(requests_.size());
    streams_.resize(requests_.size());
    for (std::size_t i = 0; i < requests_.size(); ++i) {
      auto& r = requests_[i];
      if (r.hop_path.empty()) r.hop_path = {r.origin};
      auto& rec = records_[i];
      rec.id = r.id;
      rec.service = r.service;
      rec.origin = r.origin;
      rec.arrival_ms = r.arrival_ms;
      rec.deadline_ms = r.deadline_ms;
      rec.submitted = submitted_units(r, model.service(r.service));
    }
    pending_ = requests_.size();

    const auto seed = opt_.seed.value_or(ctl_.seed);
    for (ServerIdx s = 0; s < n_; ++s) rngs_.push_back(Rng::derive(seed, s));
    scramble_ = Rng::derive(seed, 0xC0FFEE);
    offload_state_.resize(n_);

    std::vector<ServerIdx> members;
    if (opt_.servers) {
      members = *opt_.servers;
      std::sort(members.begin(), members.end());
    } else {
      for (ServerIdx s = 0; s < n_; ++s) {
        if (model.servers()[s].initially_live) members.push_back(s);
      }
    }
    alive_.assign(n_, false);
    member_.assign(n_, false);
    for (ServerIdx s : members) alive_[s] = member_[s] = true;
    rings_ = make_rings(members, ctl_.group_size, ctl_.sync_interval_ms);
    for (ServerIdx s = 0; s < n_; ++s) views_.emplace_back(s, n_, s_);
    busy_.resize(n_);
    for (ServerIdx s = 0; s < n_; ++s) busy_[s].assign(model.servers()[s].gpu_models.size(), 0.0);
    processed_log_.resize(n_ * s_);
    origin_demand_.assign(n_, std::vector<std::int64_t>(s_, 0));

    config_.max_offload = ctl_.max_offload;
    config_.devices = ctl_.device_policy;
    config_.policy = opt_.expected_offload ? OffloadPolicy::Expected : OffloadPolicy::Proportional;
    switch (opt_.strategy) {
      case Strategy::Full: break;
      case Strategy::RoundRobin: config_.policy = OffloadPolicy::RoundRobin; break;
      case Strategy::NoOffload:
        config_.offload = false;
        config_.cross_server = false;
        break;
      case Strategy::CentralizedGroup: break;
    }
    central_done_.assign(requests_.size(), false);
    for (const auto& d : model.spec().devices) device_models_[d.id] = d.gpu_model;
  }

  RunResult run() {
    // The first epoch precedes any arrival at t=0.
    if (opt_.fixed_placement) {
      install(*opt_.fixed_placement, true);
      result_.placements.push_back(*opt_.fixed_placement);
      broadcast();
    } else {
      push(0, EventKind::PlacementEpoch);
    }
    for (std::size_t i = 0; i < requests_.size(); ++i) push(requests_[i].arrival_ms, EventKind::Arrival, i);
    push(ctl_.sync_interval_ms, EventKind::SyncRound);
    if (!opt_.evaluation) {
      auto timed = [&](const std::vector<ServerAt>& list, EventKind kind) {
        for (const auto& e : list) push(e.at_ms, kind, model_.server_index(e.server));
      };
      timed(ctl_.fail, EventKind::Fault);
      timed(ctl_.corrupt, EventKind::Corrupt);
      timed(ctl_.join, EventKind::Join);
      timed(ctl_.exit, EventKind::Exit);
      for (std::size_t d = 0; d < model_.spec().devices.size(); ++d) {
        push(model_.spec().devices[d].register_at_ms, EventKind::DeviceRegister, d);
      }
    }

    TimeMs last_arrival = 0;
    for (const auto& r : requests_) last_arrival = std::max(last_arrival, r.arrival_ms);
    horizon_ = std::max(ctl_.duration_ms, last_arrival) + 3'600'000;

    std::uint64_t hash = kFnvOffset;
    while (!queue_.empty()) {
      const Event e = queue_.top();
      queue_.pop();
      if (e.time < now_) result_.invariant_violations.push_back("clock moved backwards");
      if (e.time > horizon_) break;
      // Periodic ticks stop once the run has drained.
      const bool tick = e.kind == EventKind::SyncRound || e.kind == EventKind::PlacementEpoch;
      if (tick && pending_ == 0 && e.time >= ctl_.duration_ms) continue;
      now_ = e.time;
      ++result_.events;
      fnv(hash, static_cast<std::uint64_t>(e.time));
      fnv(hash, static_cast<std::uint64_t>(e.kind));
      fnv(hash, e.a);
      fnv(hash, e.b);
      dispatch(e);
    }
    result_.event_hash = hash;
    finalize();
    return std::move(result_);
  }

 private:
  // ---- event plumbing -----------------------------------------------------

  void push(TimeMs t, EventKind kind, std::size_t a = 0, std::size_t b = 0, std::size_t c = 0, std::size_t d = 0) {
    queue_.push({t, seq_++, kind, a, b, c, d});
  }

  bool active() const { return pending_ > 0 || now_ < ctl_.duration_ms; }

  void dispatch(const Event& e) {
    switch (e.kind) {
      case EventKind::Arrival: on_arrival(e.a); break;
      case EventKind::Handle: on_handle(e.a, e.b); break;
      case EventKind::BatchComplete: on_batch_complete(e.a, e.b, e.c, e.d); break;
      case EventKind::BatchTimeout: on_batch_timeout(e.a, e.b); break;
      case EventKind::FrameRelease: on_frame_release(e.a); break;
      case EventKind::SyncRound: on_sync_round(); break;
      case EventKind::PlacementEpoch: on_epoch(); break;
      case EventKind::DeviceRegister: on_device_register(e.a); break;
      case EventKind::DeviceReady: on_device_ready(e.a); break;
      case EventKind::Fault: on_fault(e.a); break;
      case EventKind::Corrupt: on_corrupt(e.a); break;
      case EventKind::Join: pending_joins_.push_back(e.a); break;
      case EventKind::Exit: pending_exits_.push_back(e.a); break;
      case EventKind::CentralDecision: on_central_decision(e.a); break;
      case EventKind::DirectEnqueue: on_direct_enqueue(e.a, e.b); break;
    }
  }

  TimeseriesRow& bucket(TimeMs t) {
    const TimeMs width = std::max<TimeMs>(1, ctl_.timeseries_bucket_ms);
    auto& row = series_[t / width];
    row.t_ms = (t / width) * width;
    return row;
  }

  // ---- requests -----------------------------------------------------------

  const ServiceSpec& spec_of(std::size_t rid) const { return model_.service(requests_[rid].service); }

  void finish(std::size_t rid, Outcome outcome) {
    auto& rec = records_[rid];
    if (rec.outcome != Outcome::Pending) return;
    const auto& req = requests_[rid];
    rec.outcome = outcome;
    rec.hop_path = req.hop_path;
    rec.offload_count = req.offload_count;
    if (outcome == Outcome::Completed) {
      rec.completion_ms = now_;
      const auto& svc = spec_of(rid);
      if (svc.frequency_sensitive()) {
        const auto& st = streams_[rid];
        rec.achieved_fps = req.frame_count > 1 && st.last_done > st.first_done
                               ? (req.frame_count - 1) * 1000.0 / static_cast<double>(st.last_done - st.first_done)
                               : *svc.frequency_slo;
        rec.satisfied = satisfied_frames(req.frame_count, *svc.frequency_slo, rec.achieved_fps);
      } else {
        rec.satisfied = satisfied_latency(req.deadline_ms, now_);
      }
      auto& row = bucket(now_);
      row.completed += 1;
      row.satisfied += rec.satisfied;
    }
    --pending_;
  }

  void on_arrival(std::size_t rid) {
    const auto& r = requests_[rid];
    bucket(now_).arrivals += 1;
    origin_demand_[r.origin][r.service] += submitted_units(r, spec_of(rid));
    on_handle(rid, r.origin);
  }

  std::optional<ServerIdx> next_alive(ServerIdx from) const {
    for (std::size_t k = 1; k <= n_; ++k) {
      const ServerIdx s = (from + k) % n_;
      if (alive_[s] && member_[s]) return s;
    }
    return std::nullopt;
  }

  void on_handle(std::size_t rid, ServerIdx server) {
    if (records_[rid].outcome != Outcome::Pending) return;
    auto& req = requests_[rid];
    if (!alive_[server]) {
      // A user whose edge server is down reconnects to the next live one; work
      // already in flight towards a dead server is lost.
      const auto alt = req.offload_count == 0 ? next_alive(server) : std::nullopt;
      if (!alt) {
        finish(rid, Outcome::Lost);
        return;
      }
      req.hop_path = {*alt};
      records_[rid].redirected = true;
      server = *alt;
    }

    if (opt_.strategy == Strategy::CentralizedGroup) {
      if (!central_done_[rid]) {
        central_done_[rid] = true;
        push(now_ + central_delay(server), EventKind::CentralDecision, rid);
      }
      return;
    }

    const auto& svc = spec_of(rid);
    const auto decision = edgeserve::handle(req, local_options(server, rid), views_[server], config_, svc.latency_slo_ms,
                                            now_, rngs_[server], offload_state_[server]);
    switch (decision.kind) {
      case DecisionKind::Timeout: finish(rid, Outcome::Timeout); break;
      case DecisionKind::SolveLocal:
      case DecisionKind::SolveCrossServerParallel:
      case DecisionKind::SolveOnDevice: admit(rid, decision.target); break;
      case DecisionKind::Offload: offload(rid, server, decision.target, EventKind::Handle, 0); break;
      case DecisionKind::OffloadExceeded: finish(rid, Outcome::OffloadExceeded); break;
      case DecisionKind::ResourceInsufficient: finish(rid, Outcome::ResourceInsufficient); break;
    }
  }

  void offload(std::size_t rid, ServerIdx from, ServerIdx to, EventKind next, std::size_t arg) {
    auto& req = requests_[rid];
    req = record_hop(std::move(req), to);
    result_.offloads.push_back({now_, from, to, req.id});
    bucket(now_).offloads += 1;
    const auto delay = ctl_.decision_cost_ms + transmit_latency(spec_of(rid).payload_bytes, model_.bandwidth_mbps(from, to),
                                                                ctl_.hop_overhead_ms);
    push(now_ + delay, next, rid, next == EventKind::Handle ? to : arg);
  }

  // ---- capacity estimates -------------------------------------------------

  bool usable(const Instance& inst) const { return inst.alive && !inst.draining && inst.ready_ms <= now_; }

  TimeMs batch_timeout(ServiceIdx service) const {
    return std::max<TimeMs>(0, model_.service(service).latency_slo_ms / std::max(1, ctl_.batch_timeout_divisor));
  }

  // Completion time a new latency request would see on group `g`.
  TimeMs projected(const Instance& inst, const Group& g) const {
    const int bs = inst.plan.bs;
    const auto execs = static_cast<std::int64_t>(g.executor_free.size());
    const TimeMs earliest = *std::min_element(g.executor_free.begin(), g.executor_free.end());
    const auto q = static_cast<std::int64_t>(g.queue.size());
    TimeMs start = std::max(now_, earliest);
    if (earliest <= now_ && q + 1 < bs) {
      const TimeMs oldest = g.queue.empty() ? now_ : g.queue.front().enqueued_ms;
      start = std::max(now_, oldest + batch_timeout(inst.service));
    }
    return start + (q / (bs * execs)) * inst.full_ms + inst.full_ms;
  }

  std::pair<TimeMs, std::size_t> best_group(const Instance& inst) const {
    TimeMs best = std::numeric_limits<TimeMs>::max();
    std::size_t idx = 0;
    for (std::size_t g = 0; g < inst.groups.size(); ++g) {
      const auto t = projected(inst, inst.groups[g]);
      if (t < best) {
        best = t;
        idx = g;
      }
    }
    return {best, idx};
  }

  // Higher is better; nullopt when the instance cannot take the request.
  std::optional<double> fitness(const Instance& inst, std::size_t rid) const {
    const auto& svc = spec_of(rid);
    if (svc.frequency_sensitive()) {
      const double spare = inst.capacity - inst.active_fps;
      if (spare <= 1e-9) return std::nullopt;
      return spare;
    }
    const auto t = best_group(inst).first;
    if (t > requests_[rid].deadline_ms) return std::nullopt;
    return -static_cast<double>(t);
  }

  LocalOptions local_options(ServerIdx server, std::size_t rid) const {
    LocalOptions out;
    std::optional<double> best_local, best_cross, best_device;
    const auto service = requests_[rid].service;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const auto& inst = instances_[i];
      if (inst.service != service || !usable(inst)) continue;
      std::optional<std::size_t>* slot = nullptr;
      std::optional<double>* score = nullptr;
      if (inst.device) {
        if (inst.anchor != server) continue;
        slot = &out.device;
        score = &best_device;
      } else if (inst.cross) {
        if (std::find(inst.servers.begin(), inst.servers.end(), server) == inst.servers.end()) continue;
        slot = &out.cross;
        score = &best_cross;
      } else {
        if (inst.anchor != server) continue;
        slot = &out.local;
        score = &best_local;
      }
      const auto f = fitness(inst, rid);
      if (f && (!*score || *f > **score)) {
        *score = f;
        *slot = i;
      }
    }
    return out;
  }

  // ---- batching -----------------------------------------------------------

  void admit(std::size_t rid, std::size_t ii) {
    auto& inst = instances_[ii];
    records_[rid].served_by = inst.anchor;
    const auto& svc = spec_of(rid);
    if (svc.frequency_sensitive()) {
      inst.active_fps += *svc.frequency_slo;
      auto& st = streams_[rid];
      st.instance = ii;
      st.start_ms = now_;
      on_frame_release(rid);
      return;
    }
    const auto g = best_group(inst).second;
    inst.groups[g].queue.push_back({rid, -1, now_});
    try_dispatch(ii, g, false);
  }

  void on_frame_release(std::size_t rid) {
    if (records_[rid].outcome != Outcome::Pending) return;
    auto& st = streams_[rid];
    auto& inst = instances_[st.instance];
    if (!inst.alive) return;
    const int frame = st.released++;
    const auto g = static_cast<std::size_t>(frame) % inst.groups.size();
    inst.groups[g].queue.push_back({rid, frame, now_});
    try_dispatch(st.instance, g, false);
    const int total = requests_[rid].frame_count;
    if (st.released < total) {
      const double fps = *spec_of(rid).frequency_slo;
      const auto next = st.start_ms + static_cast<TimeMs>(std::floor(st.released * 1000.0 / fps + 1e-9));
      push(std::max(next, now_), EventKind::FrameRelease, rid);
    }
  }

  // Picks up to bs queued items. Streams honour the multi-frame limits: at most
  // inter_request_count distinct streams, each with at most mf frames.
  std::vector<std::size_t> pick(const Instance& inst, const Group& g) const {
    std::vector<std::size_t> idx;
    const auto& svc = model_.service(inst.service);
    const bool frames = svc.frequency_sensitive();
    std::map<std::size_t, int> per_stream;
    for (std::size_t k = 0; k < g.queue.size() && static_cast<int>(idx.size()) < inst.plan.bs; ++k) {
      const auto& item = g.queue[k];
      if (frames) {
        auto it = per_stream.find(item.request);
        if (it == per_stream.end()) {
          if (static_cast<int>(per_stream.size()) >= std::max(1, inst.plan.inter_request_count)) continue;
          it = per_stream.emplace(item.request, 0).first;
        }
        if (it->second >= std::max(1, inst.plan.mf)) continue;
        ++it->second;
      }
      idx.push_back(k);
    }
    return idx;
  }

  void try_dispatch(std::size_t ii, std::size_t gi, bool allow_partial) {
    auto& inst = instances_[ii];
    auto& g = inst.groups[gi];
    while (!g.queue.empty()) {
      const auto exec_it = std::find_if(g.executor_free.begin(), g.executor_free.end(), [&](TimeMs t) { return t <= now_; });
      if (exec_it == g.executor_free.end()) break;
      const auto idx = pick(inst, g);
      if (idx.empty()) break;
      const bool full = static_cast<int>(idx.size()) >= inst.plan.bs;
      if (!full && !allow_partial) break;

      std::vector<Item> batch;
      for (auto k : idx) batch.push_back(g.queue[k]);
      for (auto it = idx.rbegin(); it != idx.rend(); ++it) g.queue.erase(g.queue.begin() + static_cast<std::ptrdiff_t>(*it));

      const int count = static_cast<int>(batch.size());
      TimeMs dur = shared_->latency.batch_ms(inst.service, g.gpu_model, count, inst.plan.mt);
      const auto bytes = model_.service(inst.service).payload_bytes * count;
      for (double mbps : g.boundary_mbps) dur += transmit_latency(bytes, mbps, ctl_.hop_overhead_ms);

      *exec_it = now_ + dur;
      const auto bid = batches_.size();
      batches_.push_back(std::move(batch));
      g.inflight.insert(bid);
      for (const auto& ref : g.gpus) busy_[ref.server][ref.gpu] += static_cast<double>(dur) / inst.plan.mt;
      push(now_ + dur, EventKind::BatchComplete, ii, gi, static_cast<std::size_t>(exec_it - g.executor_free.begin()), bid);
    }
    arm_timeout(ii, gi);
  }

  void arm_timeout(std::size_t ii, std::size_t gi) {
    auto& inst = instances_[ii];
    auto& g = inst.groups[gi];
    if (g.queue.empty() || g.timeout_at) return;
    const bool idle = std::any_of(g.executor_free.begin(), g.executor_free.end(), [&](TimeMs t) { return t <= now_; });
    if (!idle) return;
    const TimeMs at = std::max(now_, g.queue.front().enqueued_ms + batch_timeout(inst.service));
    g.timeout_at = at;
    push(at, EventKind::BatchTimeout, ii, gi);
  }

  void on_batch_timeout(std::size_t ii, std::size_t gi) {
    auto& inst = instances_[ii];
    if (!inst.alive) return;
    auto& g = inst.groups[gi];
    if (g.timeout_at != now_) return;
    g.timeout_at.reset();
    if (!g.queue.empty() && g.queue.front().enqueued_ms + batch_timeout(inst.service) > now_) {
      arm_timeout(ii, gi);
      return;
    }
    try_dispatch(ii, gi, true);
  }

  void on_batch_complete(std::size_t ii, std::size_t gi, std::size_t /*exec*/, std::size_t bid) {
    auto& inst = instances_[ii];
    if (!inst.alive) return;
    inst.groups[gi].inflight.erase(bid);
    const auto batch = std::move(batches_[bid]);
    batches_[bid].clear();
    for (const auto& item : batch) complete_item(inst, item);
    try_dispatch(ii, gi, true);
  }

  void log_processed(ServerIdx server, ServiceIdx service) { processed_log_[server * s_ + service].push_back(now_); }

  void complete_item(Instance& inst, const Item& item) {
    const auto rid = item.request;
    if (records_[rid].outcome != Outcome::Pending) return;
    log_processed(inst.anchor, inst.service);
    if (item.frame < 0) {
      finish(rid, Outcome::Completed);
      return;
    }
    auto& st = streams_[rid];
    if (st.done == 0) st.first_done = now_;
    st.last_done = now_;
    if (++st.done == requests_[rid].frame_count) {
      inst.active_fps = std::max(0.0, inst.active_fps - *spec_of(rid).frequency_slo);
      finish(rid, Outcome::Completed);
    }
  }

  // ---- centralized baseline -----------------------------------------------

  std::vector<ServerIdx> central_group(ServerIdx server) const {
    std::vector<ServerIdx> live;
    for (ServerIdx s = 0; s < n_; ++s) {
      if (alive_[s] && member_[s]) live.push_back(s);
    }
    const auto size = static_cast<std::size_t>(std::max(1, ctl_.central_group_size));
    const auto pos = static_cast<std::size_t>(std::find(live.begin(), live.end(), server) - live.begin());
    const auto start = (std::min(pos, live.empty() ? 0 : live.size() - 1) / size) * size;
    return {live.begin() + static_cast<std::ptrdiff_t>(std::min(start, live.size())),
            live.begin() + static_cast<std::ptrdiff_t>(std::min(start + size, live.size()))};
  }

  TimeMs central_delay(ServerIdx server) const {
    return ctl_.central_delay_per_server_ms * static_cast<TimeMs>(central_group(server).size());
  }

  void on_central_decision(std::size_t rid) {
    if (records_[rid].outcome != Outcome::Pending) return;
    auto& req = requests_[rid];
    if (now_ > req.deadline_ms) {
      finish(rid, Outcome::Timeout);
      return;
    }
    const ServerIdx here = req.hop_path.back();
    const auto group = central_group(here);
    std::optional<std::size_t> best;
    double best_fit = 0.0;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const auto& inst = instances_[i];
      if (inst.service != req.service || !usable(inst) || inst.device) continue;
      if (std::find(group.begin(), group.end(), inst.anchor) == group.end()) continue;
      const auto f = fitness(inst, rid);
      if (f && (!best || *f > best_fit)) {
        best = i;
        best_fit = *f;
      }
    }
    if (!best) {
      finish(rid, Outcome::ResourceInsufficient);
      return;
    }
    const auto target = instances_[*best].anchor;
    if (target == here) {
      admit(rid, *best);
      return;
    }
    offload(rid, here, target, EventKind::DirectEnqueue, *best);
  }

  void on_direct_enqueue(std::size_t rid, std::size_t ii) {
    if (records_[rid].outcome != Outcome::Pending) return;
    if (!instances_[ii].alive) {
      finish(rid, Outcome::Lost);
      return;
    }
    admit(rid, ii);
  }

  // ---- placement ----------------------------------------------------------

  Instance make_instance(const Placement& p, TimeMs ready) const {
    Instance inst;
    inst.service = p.service;
    inst.plan = p.plan;
    inst.servers = p.servers();
    inst.anchor = inst.servers.front();
    inst.cross = p.cross_server;
    inst.ready_ms = ready;
    inst.placement = p;
    for (const auto& grp : p.groups) {
      Group g;
      g.gpus = grp;
      g.gpu_model = model_.servers()[grp.front().server].gpu_models[grp.front().gpu];
      for (std::size_t k = 1; k < grp.size(); ++k) {
        if (grp[k].server != grp[k - 1].server) g.boundary_mbps.push_back(model_.bandwidth_mbps(grp[k - 1].server, grp[k].server));
      }
      g.executor_free.assign(static_cast<std::size_t>(p.plan.mt), 0);
      inst.groups.push_back(std::move(g));
    }
    set_capacity(inst);
    return inst;
  }

  void set_capacity(Instance& inst) const {
    const auto& g = inst.groups.front();
    TimeMs full = shared_->latency.batch_ms(inst.service, g.gpu_model, inst.plan.bs, inst.plan.mt);
    const auto bytes = model_.service(inst.service).payload_bytes * inst.plan.bs;
    for (double mbps : g.boundary_mbps) full += transmit_latency(bytes, mbps, ctl_.hop_overhead_ms);
    inst.full_ms = full;
    inst.capacity = static_cast<double>(inst.groups.size()) * inst.plan.mt * inst.plan.bs * 1000.0 / static_cast<double>(full);
  }

  void install(const PlacementList& theta, bool preload) {
    std::vector<bool> kept(instances_.size(), false);
    for (const auto& p : theta.entries) {
      bool reused = false;
      for (std::size_t i = 0; i < instances_.size(); ++i) {
        auto& inst = instances_[i];
        if (kept[i] || inst.device || !inst.alive || inst.draining || !inst.placement) continue;
        if (inst.placement->service == p.service && inst.placement->groups == p.groups && inst.placement->plan == p.plan) {
          kept[i] = true;
          reused = true;
          break;
        }
      }
      if (reused) continue;
      const TimeMs ready = preload ? now_ : now_ + shared_->latency.load_ms(p.service);
      instances_.push_back(make_instance(p, ready));
      kept.push_back(true);
    }
    // Replaced placements stop taking work and drain what they hold.
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (!kept[i] && !instances_[i].device) instances_[i].draining = true;
    }
  }

  PlacementList current_placement(const std::vector<ServerIdx>& scope) const {
    PlacementList out;
    for (const auto& inst : instances_) {
      if (!inst.alive || inst.draining || inst.device || !inst.placement) continue;
      const bool inside = std::all_of(inst.servers.begin(), inst.servers.end(), [&](ServerIdx s) {
        return std::find(scope.begin(), scope.end(), s) != scope.end();
      });
      if (inside) out.entries.push_back(*inst.placement);
    }
    return out;
  }

  std::vector<Request> evaluation_requests(const std::vector<ServerIdx>& scope) const {
    const TimeMs interval = ctl_.placement_interval_ms;
    TimeMs from = now_;
    if (ctl_.placement_trace == PlacementTrace::History && now_ > 0) from = now_ - interval;
    std::vector<Request> out;
    for (const auto& r : requests_) {
      if (r.arrival_ms < from || r.arrival_ms >= from + interval) continue;
      if (std::find(scope.begin(), scope.end(), r.origin) == scope.end()) continue;
      if (static_cast<int>(out.size()) >= ctl_.eval_max_requests) break;
      Request e = r;
      e.id = out.size();
      e.arrival_ms -= from;
      e.deadline_ms -= from;
      e.hop_path = {e.origin};
      e.offload_count = 0;
      out.push_back(std::move(e));
    }
    return out;
  }

  void apply_membership_changes() {
    std::vector<std::string> warnings;
    for (ServerIdx s : pending_exits_) {
      bool found = false;
      for (auto& ring : rings_) {
        if (!ring.contains(s)) continue;
        ring = apply_membership(ring, {}, {s}, true, &warnings);
        found = true;
      }
      if (!found) {
        result_.warnings.push_back("exit of server " + model_.servers()[s].id + " ignored: not a member");
        continue;
      }
      member_[s] = false;
      for (auto& inst : instances_) {
        if (std::find(inst.servers.begin(), inst.servers.end(), s) != inst.servers.end()) inst.draining = true;
      }
      for (auto& v : views_) flag_unavailable(v, s);
    }
    for (ServerIdx s : pending_joins_) {
      if (member_[s]) continue;
      auto smallest = std::min_element(rings_.begin(), rings_.end(),
                                       [](const RingTopology& a, const RingTopology& b) { return a.size() < b.size(); });
      *smallest = apply_membership(*smallest, {s}, {}, true, &warnings);
      member_[s] = alive_[s] = true;
      auto& own = views_[s];
      own = ClusterView(s, n_, s_);
      own.as_of_ms = now_;
      for (auto& v : views_) v.per_server[s].unavailable = false;
    }
    pending_joins_.clear();
    pending_exits_.clear();
  }

  void on_epoch() {
    ++epoch_;
    apply_membership_changes();
    PlacementList theta;
    theta.epoch = epoch_;
    for (const auto& ring : rings_) {
      std::vector<ServerIdx> scope;
      for (ServerIdx s : ring.order) {
        if (alive_[s]) scope.push_back(s);
      }
      if (scope.empty()) continue;
      std::sort(scope.begin(), scope.end());
      const auto reqs = evaluation_requests(scope);
      if (reqs.empty() && epoch_ > 1) {
        // Nothing to learn from; keep serving with what is installed.
        for (auto& p : current_placement(scope).entries) theta.entries.push_back(std::move(p));
        continue;
      }
      PlacementContext ctx{&model_, &shared_->plans, scope, objective(reqs, scope)};
      const auto theta0 = ctl_.placement_mode == PlacementMode::Online ? current_placement(scope) : PlacementList{};
      auto part = sssp(ctx, build_candidates(ctx), theta0);
      for (auto& p : part.entries) theta.entries.push_back(std::move(p));
    }
    install(theta, epoch_ == 1 && ctl_.preload_initial);
    result_.placements.push_back(theta);
    broadcast();
    if (active()) push(now_ + ctl_.placement_interval_ms, EventKind::PlacementEpoch);
  }

  Objective objective(const std::vector<Request>& reqs, const std::vector<ServerIdx>& scope) const {
    auto shared = shared_;
    const ScenarioModel* model = &model_;
    return [shared, model, reqs, scope](const PlacementList& theta) {
      RunOptions o;
      o.fixed_placement = theta;
      o.requests = reqs;
      o.servers = scope;
      o.evaluation = true;
      o.seed = model->control().eval_seed;
      o.expected_offload = model->control().eval_mode == EvalMode::Expected;
      return Simulator(*model, shared, o).run().metrics.satisfied;
    };
  }

  // ---- synchronization ----------------------------------------------------

  ServiceStat stat(ServerIdx server, ServiceIdx service, bool placed_only) {
    ServiceStat st;
    TimeMs best_backlog = std::numeric_limits<TimeMs>::max();
    for (const auto& inst : instances_) {
      if (inst.service != service || inst.anchor != server || inst.device || !inst.alive || inst.draining) continue;
      if (!placed_only && inst.ready_ms > now_) continue;
      st.hosted = true;
      st.theoretical += inst.capacity;
      for (const auto& g : inst.groups) {
        const TimeMs earliest = *std::min_element(g.executor_free.begin(), g.executor_free.end());
        const auto per_round = static_cast<TimeMs>(inst.plan.bs) * static_cast<TimeMs>(g.executor_free.size());
        const TimeMs wait = std::max<TimeMs>(0, earliest - now_) +
                            static_cast<TimeMs>(g.queue.size()) / per_round * inst.full_ms;
        best_backlog = std::min(best_backlog, wait);
      }
    }
    if (st.hosted) st.backlog_ms = static_cast<double>(best_backlog);
    if (!placed_only) {
      auto& log = processed_log_[server * s_ + service];
      const TimeMs from = now_ - ctl_.sync_interval_ms;
      while (!log.empty() && log.front() <= from) log.pop_front();
      st.processed = static_cast<double>(log.size()) * 1000.0 / static_cast<double>(ctl_.sync_interval_ms);
    }
    return st;
  }

  void publish(ServerIdx s) {
    auto& e = views_[s].per_server[s];
    e.known = true;
    e.unavailable = false;
    e.epoch = epoch_;
    e.seq += 1;
    e.staleness_ms = 0;
    e.window_ms = ctl_.sync_interval_ms;
    for (ServiceIdx l = 0; l < s_; ++l) e.services[l] = stat(s, l, false);
  }

  static void rebase(ClusterView& v, TimeMs now) {
    const TimeMs delta = std::max<TimeMs>(0, now - v.as_of_ms);
    for (ServerIdx src = 0; src < v.per_server.size(); ++src) {
      if (src != v.owner && v.per_server[src].known) v.per_server[src].staleness_ms += delta;
    }
    v.as_of_ms = now;
  }

  // Placement decisions reach every member through the messager, one interval late.
  void broadcast() {
    for (const auto& ring : rings_) {
      for (ServerIdx src : ring.order) {
        publish(src);
        for (ServerIdx dst : ring.order) {
          if (dst == src) continue;
          auto& v = views_[dst];
          rebase(v, now_);
          auto& e = v.per_server[src];
          const bool fresh = !e.known || e.epoch != epoch_;
          e.known = true;
          e.epoch = epoch_;
          if (fresh) e.staleness_ms = ctl_.sync_interval_ms;
          for (ServiceIdx l = 0; l < s_; ++l) {
            const auto placed = stat(src, l, true);
            e.services[l].hosted = placed.hosted;
            e.services[l].theoretical = placed.theoretical;
            if (fresh) {
              e.services[l].processed = 0.0;
              e.services[l].backlog_ms = 0.0;
            }
          }
        }
      }
    }
  }

  void on_sync_round() {
    for (auto& ring : rings_) {
      for (std::size_t k = 0; k < ring.order.size();) {
        const ServerIdx s = ring.order[k];
        if (alive_[s]) {
          ++k;
          continue;
        }
        ring = bypass_faulty(ring, s);
        for (auto& v : views_) flag_unavailable(v, s);
        result_.bypassed_at.emplace(s, now_);
      }
      for (ServerIdx s : ring.order) publish(s);
      views_ = exchange_round(views_, ring);
      for (ServerIdx s : ring.order) views_[s].as_of_ms = now_;
    }
    if (active()) push(now_ + ctl_.sync_interval_ms, EventKind::SyncRound);
  }

  // ---- failures and devices -----------------------------------------------

  void kill(std::size_t ii) {
    auto& inst = instances_[ii];
    if (!inst.alive) return;
    inst.alive = false;
    for (auto& g : inst.groups) {
      for (const auto& item : g.queue) finish(item.request, Outcome::Lost);
      for (auto bid : g.inflight) {
        for (const auto& item : batches_[bid]) finish(item.request, Outcome::Lost);
        batches_[bid].clear();
      }
      g.queue.clear();
      g.inflight.clear();
    }
    // Streams whose remaining frames have not been released yet.
    for (std::size_t rid = 0; rid < requests_.size(); ++rid) {
      if (records_[rid].outcome == Outcome::Pending && spec_of(rid).frequency_sensitive() &&
          streams_[rid].instance == ii && records_[rid].served_by && streams_[rid].released > 0) {
        finish(rid, Outcome::Lost);
      }
    }
  }

  void on_fault(ServerIdx s) {
    if (!alive_[s]) return;
    alive_[s] = false;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
      const auto& inst = instances_[i];
      if (std::find(inst.servers.begin(), inst.servers.end(), s) != inst.servers.end()) kill(i);
    }
  }

  // Silent corruption: the server's cached entries about its peers are
  // overwritten with noise. Neighbours' copies replace them in later rounds.
  void on_corrupt(ServerIdx s) {
    auto& v = views_[s];
    for (ServerIdx src = 0; src < n_; ++src) {
      if (src == s || !v.per_server[src].known) continue;
      auto& e = v.per_server[src];
      e.seq = 0;
      for (auto& st : e.services) {
        st.hosted = (scramble_.next() & 1) != 0;
        st.theoretical = scramble_.uniform() * 100.0;
        st.processed = scramble_.uniform() * 100.0;
        st.backlog_ms = scramble_.uniform() * 1000.0;
      }
    }
  }

  void on_device_register(std::size_t d) {
    const auto& dev = model_.spec().devices[d];
    const auto server = model_.server_index(dev.server);
    if (!alive_[server]) {
      result_.warnings.push_back("device " + dev.id + " registered with a server that is down");
      return;
    }
    try {
      auto a = register_device(model_, server, dev, origin_demand_[server], now_, device_queue_[server]);
      push(a.ready_ms, EventKind::DeviceReady, result_.device_assignments.size(), d);
      result_.device_assignments.push_back(std::move(a));
    } catch (const NoEligibleService& e) {
      result_.warnings.push_back(e.what());
    }
  }

  void on_device_ready(std::size_t k) {
    const auto& a = result_.device_assignments[k];
    if (!alive_[a.server]) return;
    Instance inst;
    inst.service = a.service;
    inst.anchor = a.server;
    inst.servers = {a.server};
    inst.device = true;
    const auto& svc = model_.service(a.service);
    const auto& gpu_model = device_models_.at(a.device);
    inst.plan = shared_->plans[a.service];
    // The server plan was sized for the reference GPU; redo the batch size.
    if (!svc.plan.bs) {
      try {
        inst.plan.bs = select_batch_size(svc, gpu_model, shared_->latency.profiles(),
                                         static_cast<double>(svc.latency_slo_ms) * ctl_.bs_slo_fraction);
      } catch (const NoFeasibleBatchSize&) {
        inst.plan.bs = 1;
      }
    }
    inst.plan.mt = 1;
    inst.plan.dp_groups = 1;
    inst.plan.mp = {};
    inst.plan.mf = std::min(inst.plan.mf, inst.plan.bs);
    inst.plan.inter_request_count = inter_request_count(inst.plan.bs, inst.plan.mf);
    inst.ready_ms = now_;
    Group g;
    g.gpu_model = gpu_model;
    g.executor_free.assign(1, 0);
    inst.groups.push_back(std::move(g));
    set_capacity(inst);
    instances_.push_back(std::move(inst));
  }

  // ---- wrap-up ------------------------------------------------------------

  void finalize() {
    for (std::size_t rid = 0; rid < requests_.size(); ++rid) {
      if (records_[rid].outcome == Outcome::Pending) {
        result_.warnings.push_back("request " + std::to_string(requests_[rid].id) + " still pending at the horizon");
        finish(rid, Outcome::Lost);
      }
    }
    const TimeMs end = std::max(now_, ctl_.duration_ms);
    auto& m = result_.metrics;
    m.duration_ms = end;
    m.requests = static_cast<std::int64_t>(requests_.size());
    std::int64_t offload_sum = 0;
    for (std::size_t rid = 0; rid < requests_.size(); ++rid) {
      const auto& rec = records_[rid];
      const auto cat = categorize(spec_of(rid));
      m.submitted += rec.submitted;
      m.satisfied += rec.satisfied;
      m.per_category[cat].submitted += rec.submitted;
      m.per_category[cat].satisfied += rec.satisfied;
      m.outcomes[rec.outcome] += 1;
      m.offload_histogram[rec.offload_count] += 1;
      offload_sum += rec.offload_count;
      if (rec.completion_ms && !spec_of(rid).frequency_sensitive()) {
        m.latency_histogram[(*rec.completion_ms - rec.arrival_ms) / 10 * 10] += 1;
      }
      check_invariants(rec);
    }
    for (auto& [cat, st] : m.per_category) {
      st.goodput_per_s = end > 0 ? static_cast<double>(st.satisfied) * 1000.0 / static_cast<double>(end) : 0.0;
    }
    m.offloads = static_cast<std::int64_t>(result_.offloads.size());
    m.mean_offload_count = requests_.empty() ? 0.0 : static_cast<double>(offload_sum) / static_cast<double>(requests_.size());
    for (ServerIdx s = 0; s < n_; ++s) {
      for (std::size_t g = 0; g < busy_[s].size(); ++g) {
        GpuUtilization u;
        u.server = model_.servers()[s].id;
        u.gpu = g;
        u.model = model_.servers()[s].gpu_models[g];
        u.busy_ms = static_cast<TimeMs>(std::llround(busy_[s][g]));
        u.utilization = end > 0 ? busy_[s][g] / static_cast<double>(end) : 0.0;
        m.gpu_utilization.push_back(std::move(u));
      }
    }
    result_.records = std::move(records_);
    if (!series_.empty()) {
      const auto last = series_.rbegin()->first;
      const TimeMs width = std::max<TimeMs>(1, ctl_.timeseries_bucket_ms);
      for (TimeMs b = 0; b <= last; ++b) {
        auto it = series_.find(b);
        TimeseriesRow row = it == series_.end() ? TimeseriesRow{} : it->second;
        row.t_ms = b * width;
        result_.timeseries.push_back(row);
      }
    }
  }

  void check_invariants(const RequestRecord& rec) {
    std::set<ServerIdx> seen(rec.hop_path.begin(), rec.hop_path.end());
    const auto id = std::to_string(rec.id);
    if (seen.size() != rec.hop_path.size()) result_.invariant_violations.push_back("request " + id + " revisited a server");
    if (rec.offload_count > std::max(ctl_.max_offload, 1)) {
      result_.invariant_violations.push_back("request " + id + " exceeded the offload bound");
    }
    if (!rec.hop_path.empty() && rec.offload_count != static_cast<int>(rec.hop_path.size()) - 1) {
      result_.invariant_violations.push_back("request " + id + " hop path and offload count disagree");
    }
  }

  const ScenarioModel& model_;
  std::shared_ptr<const Shared> shared_;
  RunOptions opt_;
  const Control& ctl_;
  std::size_t n_ = 0, s_ = 0;

  std::vector<Request> requests_;
  std::vector<RequestRecord> records_;
  std::vector<Stream> streams_;
  std::vector<bool> central_done_;
  std::size_t pending_ = 0;

  std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
  std::uint64_t seq_ = 0;
  TimeMs now_ = 0;
  TimeMs horizon_ = 0;
  std::uint64_t epoch_ = 0;

  std::vector<Rng> rngs_;
  Rng scramble_;
  std::vector<OffloadState> offload_state_;
  HandlerConfig config_;

  std::vector<bool> alive_, member_;
  std::vector<RingTopology> rings_;
  std::vector<ClusterView> views_;
  std::vector<ServerIdx> pending_joins_, pending_exits_;

  std::vector<Instance> instances_;
  std::vector<std::vector<Item>> batches_;
  std::vector<std::vector<double>> busy_;
  std::vector<std::deque<TimeMs>> processed_log_;
  std::vector<std::vector<std::int64_t>> origin_demand_;
  std::map<ServerIdx, DeviceLoadQueue> device_queue_;
  std::map<std::string, std::string> device_models_;

  std::map<TimeMs, TimeseriesRow> series_;
  RunResult result_;
};

RunResult simulate_shared(const ScenarioModel& model, std::shared_ptr<const Shared> shared, const RunOptions& options) {
  return Simulator(model, std::move(shared), options).run();
}

}  // namespace

RunResult simulate(const ScenarioModel& model, const RunOptions& options) {
  return simulate_shared(model, std::make_shared<const Shared>(model), options);
}

RunResult run(const ScenarioModel& model, std::optional<std::uint64_t> seed) {
  RunOptions o;
  o.seed = seed;
  return simulate(model, o);
}

RunResult run_baseline(const ScenarioModel& model, Strategy baseline, std::optional<std::uint64_t> seed) {
  RunOptions o;
  o.strategy = baseline;
  o.seed = seed;
  return simulate(model, o);
}

Objective make_objective(const ScenarioModel& model, const std::vector<Request>& requests,
                         const std::vector<ServerIdx>& servers) {
  auto shared = std::make_shared<const Shared>(model);
  const ScenarioModel* m = &model;
  return [shared, m, requests, servers](const PlacementList& theta) {
    RunOptions o;
    o.fixed_placement = theta;
    o.requests = requests;
    o.servers = servers;
    o.evaluation = true;
    o.seed = m->control().eval_seed;
    o.expected_offload = m->control().eval_mode == EvalMode::Expected;
    return simulate_shared(*m, shared, o).metrics.satisfied;
  };
}

std::int64_t evaluate_goodput(const ScenarioModel& model, const PlacementList& theta, const std::vector<Request>& requests,
                              Strategy strategy) {
  RunOptions o;
  o.strategy = strategy;
  o.fixed_placement = theta;
  o.requests = requests;
  o.evaluation = true;
  o.seed = model.control().eval_seed;
  o.expected_offload = model.control().eval_mode == EvalMode::Expected;
  return simulate(model, o).metrics.satisfied;
}

PlacementList plan_placement(const ScenarioModel& model, const std::vector<ServerIdx>& servers,
                             const std::vector<Request>& requests, const PlacementList& theta0,
                             std::vector<GreedyStep>* steps) {
  const auto plans = build_plans(model, ProfileTable::from_scenario(model.spec()));
  PlacementContext ctx{&model, &plans, servers, make_objective(model, requests, servers)};
  return sssp(ctx, build_candidates(ctx), theta0, steps);
}

}  // namespace edgeserve
