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

#include "edgeserve/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace edgeserve {

namespace {
constexpr double kSlack = 1e-9;
}

std::vector<ServerIdx> Placement::servers() const {
  std::set<ServerIdx> s;
  for (const auto& g : groups) {
    for (const auto& ref : g) s.insert(ref.server);
  }
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------
// GPU ledger
// ---------------------------------------------------------------------------

GpuLedger::GpuLedger(const ScenarioModel& model, const std::vector<ServerIdx>& servers) : servers_(servers) {
  free_.resize(model.server_count());
  for (ServerIdx s : servers_) free_.at(s).resize(model.servers()[s].gpu_models.size());
}

std::vector<GpuRef> GpuLedger::gpus(ServerIdx server) const {
  std::vector<GpuRef> out;
  if (server >= free_.size()) return out;
  for (std::size_t g = 0; g < free_[server].size(); ++g) out.push_back({server, g});
  return out;
}

std::vector<GpuRef> GpuLedger::all_gpus() const {
  std::vector<GpuRef> out;
  for (ServerIdx s : servers_) {
    for (std::size_t g = 0; g < free_[s].size(); ++g) out.push_back({s, g});
  }
  return out;
}

double GpuLedger::compute_free(GpuRef gpu) const { return free_.at(gpu.server).at(gpu.gpu).compute; }
double GpuLedger::vram_free(GpuRef gpu) const { return free_.at(gpu.server).at(gpu.gpu).vram; }

bool GpuLedger::fits(GpuRef gpu, double compute, double vram) const {
  const auto& f = free_.at(gpu.server).at(gpu.gpu);
  return compute <= f.compute + kSlack && vram <= f.vram + kSlack;
}

void GpuLedger::take(GpuRef gpu, double compute, double vram) {
  auto& f = free_.at(gpu.server).at(gpu.gpu);
  if (!fits(gpu, compute, vram)) throw InfeasiblePlacement("GPU over-committed");
  f.compute = std::max(0.0, f.compute - compute);
  f.vram = std::max(0.0, f.vram - vram);
}

void GpuLedger::take(const Placement& placement, const ServiceSpec& service) {
  const double a = service.compute_demand * placement.plan.mt;
  const double b = service.vram_demand * placement.plan.mt;
  for (const auto& g : placement.groups) {
    for (const auto& ref : g) take(ref, a, b);
  }
}

// ---------------------------------------------------------------------------
// GPU assignment
// ---------------------------------------------------------------------------

std::optional<Placement> try_assign_gpus(GpuLedger& ledger, const ServiceSpec& spec, ServiceIdx service,
                                         const AllocationPlan& plan, ServerIdx server) {
  const auto pool = server == kHypotheticalServer ? ledger.all_gpus() : ledger.gpus(server);
  const double a = spec.compute_demand * plan.mt;
  const double b = spec.vram_demand * plan.mt;

  GpuLedger trial = ledger;
  std::set<GpuRef> used;
  Placement p;
  p.service = service;
  p.server = server;
  p.plan = plan;
  for (int g = 0; g < plan.dp_groups; ++g) {
    std::vector<GpuRef> group;
    for (int k = 0; k < plan.gpus_per_group(); ++k) {
      const GpuRef* best = nullptr;
      for (const auto& ref : pool) {
        if (used.contains(ref) || !trial.fits(ref, a, b)) continue;
        if (!best) {
          best = &ref;
          continue;
        }
        const double dv = trial.vram_free(ref) - trial.vram_free(*best);
        const double dc = trial.compute_free(ref) - trial.compute_free(*best);
        if (dv > kSlack || (std::abs(dv) <= kSlack && dc > kSlack)) best = &ref;
      }
      if (!best) return std::nullopt;
      trial.take(*best, a, b);
      used.insert(*best);
      group.push_back(*best);
    }
    p.groups.push_back(std::move(group));
  }
  p.cross_server = p.servers().size() > 1;
  ledger = std::move(trial);
  return p;
}

Placement online_assign_gpus(GpuLedger& ledger, const ServiceSpec& spec, ServiceIdx service, const AllocationPlan& plan,
                             ServerIdx server) {
  auto p = try_assign_gpus(ledger, spec, service, plan, server);
  if (!p) {
    throw InfeasiblePlacement(spec.id + " (" + to_string(plan) + ") does not fit on " +
                              (server == kHypotheticalServer ? std::string("the hypothetical server")
                                                             : "server " + std::to_string(server)));
  }
  return *std::move(p);
}

// ---------------------------------------------------------------------------
// Approximation parameter
// ---------------------------------------------------------------------------

ApproximationParam approximation_P(const std::vector<ServiceSpec>& services) {
  double max_a = 0.0, min_a = std::numeric_limits<double>::infinity();
  double max_b = 0.0, min_b = std::numeric_limits<double>::infinity();
  for (const auto& s : services) {
    max_a = std::max(max_a, s.compute_demand);
    max_b = std::max(max_b, s.vram_demand);
    if (s.compute_demand > 0.0) min_a = std::min(min_a, s.compute_demand);
    if (s.vram_demand > 0.0) min_b = std::min(min_b, s.vram_demand);
  }
  if (!std::isfinite(min_a) || !std::isfinite(min_b)) {
    throw EmptyServices("approximation parameter needs services with positive compute and VRAM demand");
  }
  // 0.5 / 0.1 evaluates to 5.000000000000001; the slack keeps the ceiling at 5.
  const int pa = static_cast<int>(std::ceil(max_a / min_a - kSlack));
  const int pb = static_cast<int>(std::ceil(max_b / min_b - kSlack));
  return {pa + pb};
}

// ---------------------------------------------------------------------------
// Candidates and greedy
// ---------------------------------------------------------------------------

namespace {

const AllocationPlan& plan_of(const PlacementContext& ctx, ServiceIdx s) { return ctx.plans->at(s); }

GpuLedger ledger_for(const PlacementContext& ctx, const PlacementList& theta) {
  GpuLedger ledger(*ctx.model, ctx.servers);
  for (const auto& p : theta.entries) ledger.take(p, ctx.model->service(p.service));
  return ledger;
}

bool contains_candidate(const PlacementList& theta, const Candidate& c) {
  return std::any_of(theta.entries.begin(), theta.entries.end(),
                     [&](const Placement& p) { return p.service == c.service && p.server == c.server; });
}

}  // namespace

CandidateSet build_candidates(const PlacementContext& ctx) {
  CandidateSet set;
  const auto& model = *ctx.model;
  for (ServiceIdx l = 0; l < model.service_count(); ++l) {
    for (ServerIdx n : ctx.servers) {
      GpuLedger empty(model, ctx.servers);
      if (try_assign_gpus(empty, model.service(l), l, plan_of(ctx, l), n)) set.all.push_back({l, n});
    }
    GpuLedger empty(model, ctx.servers);
    if (try_assign_gpus(empty, model.service(l), l, plan_of(ctx, l), kHypotheticalServer)) {
      set.hypothetical.push_back({l, kHypotheticalServer});
    }
  }
  std::sort(set.all.begin(), set.all.end());
  for (const auto& p : model.spec().priority) {
    const auto l = model.service_index(p.service);
    const auto n = model.server_index(p.server);
    if (std::find(ctx.servers.begin(), ctx.servers.end(), n) == ctx.servers.end()) continue;
    set.priority.push_back({l, n});
  }
  return set;
}

PlacementList spf(const PlacementContext& ctx, const std::vector<Candidate>& candidates, CandidateKind kind,
                  const PlacementList& theta0, StageMode mode, std::vector<GreedyStep>* steps) {
  const auto& model = *ctx.model;
  PlacementList theta = theta0;
  GpuLedger ledger = ledger_for(ctx, theta);
  std::int64_t phi_prev = ctx.objective(theta);

  // S1 accepts plateaus, so it is capped at one append per list entry.
  const std::size_t cap = mode == StageMode::S1 ? candidates.size() : std::numeric_limits<std::size_t>::max();
  for (std::size_t iteration = 0; iteration < cap; ++iteration) {
    std::optional<Placement> best;
    Candidate best_candidate{};
    std::int64_t best_phi = std::numeric_limits<std::int64_t>::min();

    for (const auto& delta : candidates) {
      if (kind == CandidateKind::List && contains_candidate(theta, delta)) continue;
      GpuLedger trial = ledger;
      auto placement = try_assign_gpus(trial, model.service(delta.service), delta.service, plan_of(ctx, delta.service),
                                       delta.server);
      if (!placement) continue;
      PlacementList next = theta;
      next.entries.push_back(*placement);
      const auto phi = ctx.objective(next);
      // Strictly greater keeps the earliest of a tie set; candidates arrive in
      // (service, server) order, so that is the lowest pair.
      if (phi > best_phi || (phi == best_phi && delta < best_candidate)) {
        best_phi = phi;
        best = std::move(placement);
        best_candidate = delta;
      }
    }
    if (!best) break;
    const bool keep = mode == StageMode::S1 ? best_phi >= phi_prev : best_phi > phi_prev;
    if (!keep) break;
    ledger.take(*best, model.service(best->service));
    theta.entries.push_back(*std::move(best));
    phi_prev = best_phi;
    if (steps) steps->push_back({best_candidate, best_phi});
  }
  return theta;
}

PlacementList sssp(const PlacementContext& ctx, const CandidateSet& candidates, const PlacementList& theta0,
                   std::vector<GreedyStep>* steps) {
  auto theta1 = spf(ctx, candidates.priority, CandidateKind::List, theta0, StageMode::S1, steps);
  auto theta2 = spf(ctx, candidates.all, CandidateKind::Set, theta1, StageMode::S2S3, steps);
  return spf(ctx, candidates.hypothetical, CandidateKind::Set, theta2, StageMode::S2S3, steps);
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

namespace {

class Enumerator {
 public:
  Enumerator(const PlacementContext& ctx, const std::vector<Candidate>& candidates, bool evaluate, std::size_t limit)
      : ctx_(ctx), candidates_(candidates), evaluate_(evaluate), limit_(limit) {}

  void run() {
    PlacementList theta;
    GpuLedger ledger = ledger_for(ctx_, theta);
    visit(0, ledger, theta, std::nullopt);
  }

  std::size_t configs() const { return configs_; }
  BruteForceResult result() const { return {best_theta_, best_phi_, configs_}; }

 private:
  // Placement options for one more replica of candidate `c`. Single-slice plans
  // branch over every fitting GPU with a distinct free state; larger groups use
  // the greedy assignment.
  std::vector<std::pair<Placement, GpuLedger>> options(const Candidate& c, const GpuLedger& ledger,
                                                       std::optional<GpuRef> min_gpu) const {
    const auto& spec = ctx_.model->service(c.service);
    const auto& plan = ctx_.plans->at(c.service);
    std::vector<std::pair<Placement, GpuLedger>> out;
    if (plan.total_gpus() == 1) {
      const auto pool = c.server == kHypotheticalServer ? ledger.all_gpus() : ledger.gpus(c.server);
      std::set<std::pair<double, double>> seen;
      const double a = spec.compute_demand * plan.mt;
      const double b = spec.vram_demand * plan.mt;
      for (const auto& ref : pool) {
        if (min_gpu && ref < *min_gpu) continue;
        if (!ledger.fits(ref, a, b)) continue;
        if (!seen.insert({ledger.compute_free(ref), ledger.vram_free(ref)}).second) continue;
        GpuLedger next = ledger;
        next.take(ref, a, b);
        Placement p{c.service, c.server, {{ref}}, plan, false};
        out.emplace_back(std::move(p), std::move(next));
      }
      return out;
    }
    GpuLedger next = ledger;
    if (auto p = try_assign_gpus(next, spec, c.service, plan, c.server)) out.emplace_back(*std::move(p), std::move(next));
    return out;
  }

  void visit(std::size_t from, const GpuLedger& ledger, PlacementList& theta, std::optional<GpuRef> last_gpu) {
    if (++configs_ > limit_) throw TooLarge("more than " + std::to_string(limit_) + " feasible placement configurations");
    if (evaluate_) {
      const auto phi = ctx_.objective(theta);
      if (phi > best_phi_) {
        best_phi_ = phi;
        best_theta_ = theta;
      }
    }
    for (std::size_t j = from; j < candidates_.size(); ++j) {
      // Replicas of the same candidate take GPUs in non-decreasing order so
      // each arrangement is visited once.
      const auto min_gpu = j == from ? last_gpu : std::nullopt;
      for (auto& [p, next] : options(candidates_[j], ledger, min_gpu)) {
        const auto gpu = p.groups.front().front();
        theta.entries.push_back(std::move(p));
        visit(j, next, theta, gpu);
        theta.entries.pop_back();
      }
    }
  }

  const PlacementContext& ctx_;
  const std::vector<Candidate>& candidates_;
  bool evaluate_;
  std::size_t limit_;
  std::size_t configs_ = 0;
  std::int64_t best_phi_ = std::numeric_limits<std::int64_t>::min();
  PlacementList best_theta_;
};

}  // namespace

BruteForceResult brute_force_optimal(const PlacementContext& ctx, const std::vector<Candidate>& candidates,
                                     const BruteForceLimits& limits) {
  auto sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  Enumerator counter(ctx, sorted, false, limits.max_configs);
  counter.run();
  Enumerator search(ctx, sorted, true, limits.max_configs);
  search.run();
  return search.result();
}

std::string placement_report(const ScenarioModel& model, const PlacementList& theta) {
  std::ostringstream out;
  out << "# epoch " << theta.epoch << ": " << theta.entries.size() << " placements\n";
  for (const auto& p : theta.entries) {
    out << "service=" << model.service(p.service).id << " server="
        << (p.server == kHypotheticalServer ? std::string("*") : model.servers()[p.server].id) << " gpus=";
    bool first_group = true;
    for (const auto& g : p.groups) {
      if (!first_group) out << '|';
      first_group = false;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (i) out << '+';
        out << model.servers()[g[i].server].id << ':' << g[i].gpu;
      }
    }
    out << " plan=" << to_string(p.plan) << " cross_server=" << (p.cross_server ? "true" : "false") << '\n';
  }
  return out.str();
}

}  // namespace edgeserve
