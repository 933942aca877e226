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

#include "edgeserve/allocator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace edgeserve {

void ProfileTable::set(const std::string& service, const std::string& gpu_model, int bs, int mt, ProfileEntry entry) {
  entries_[{service, gpu_model, bs, mt}] = entry;
}

std::optional<ProfileEntry> ProfileTable::find(const std::string& service, const std::string& gpu_model, int bs,
                                               int mt) const {
  const auto it = entries_.find({service, gpu_model, bs, mt});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

const ProfileEntry& ProfileTable::at(const std::string& service, const std::string& gpu_model, int bs, int mt) const {
  const auto it = entries_.find({service, gpu_model, bs, mt});
  if (it == entries_.end()) {
    throw std::out_of_range("no profile for " + service + " on " + gpu_model + " bs=" + std::to_string(bs) +
                            " mt=" + std::to_string(mt));
  }
  return it->second;
}

ProfileEntry ProfileTable::synthesize(double base_ms, int bs, int mt, const ProfileSynth& synth) {
  const double latency = base_ms * (1.0 + synth.bs_slope * (bs - 1)) * (1.0 + synth.mt_slope * (mt - 1));
  return {static_cast<double>(bs) * mt * 1000.0 / latency, latency};
}

ProfileTable ProfileTable::from_scenario(const Scenario& scenario) {
  ProfileTable table;
  for (const auto& service : scenario.services) {
    for (const auto& [model, base] : service.compute_time_ms) {
      for (int bs : kBatchSizes) {
        for (int mt : kMultitaskDegrees) table.set(service.id, model, bs, mt, synthesize(base, bs, mt, scenario.profile_synth));
      }
    }
  }
  for (const auto& row : scenario.profiles) table.set(row.service, row.gpu_model, row.bs, row.mt, {row.goodput, row.latency_ms});
  return table;
}

std::string to_string(const AllocationPlan& plan) {
  std::ostringstream out;
  out << "BS" << plan.bs << "+MT" << plan.mt;
  if (plan.mp.tp > 1) out << "+TP" << plan.mp.tp;
  if (plan.mp.pp > 1) out << "+PP" << plan.mp.pp;
  if (plan.mf > 1) out << "+MF" << plan.mf;
  if (plan.dp_groups > 1) out << "+DP" << plan.dp_groups;
  return out.str();
}

TaskCategory categorize(const ServiceSpec& service) {
  return {service.frequency_sensitive() ? Sensitivity::Frequency : Sensitivity::Latency,
          service.needs_multi_gpu ? GpuClass::MultiGpu : GpuClass::SingleGpu};
}

int select_batch_size(const ServiceSpec& service, const std::string& gpu_model, const ProfileTable& profiles,
                      double latency_budget_ms) {
  int best_bs = 0;
  double best_goodput = -1.0;
  for (int bs : kBatchSizes) {
    const auto& entry = profiles.at(service.id, gpu_model, bs, 1);
    if (entry.latency_ms > latency_budget_ms) continue;
    if (entry.goodput > best_goodput) {
      best_goodput = entry.goodput;
      best_bs = bs;
    }
  }
  if (best_bs == 0) {
    throw NoFeasibleBatchSize(service.id + ": batch size 1 already exceeds the latency budget on " + gpu_model);
  }
  return best_bs;
}

int select_batch_size(const ServiceSpec& service, const std::string& gpu_model, const ProfileTable& profiles) {
  return select_batch_size(service, gpu_model, profiles, static_cast<double>(service.latency_slo_ms));
}

int select_multitask_degree(const ServiceSpec& service, const std::string& gpu_model, const ProfileTable& profiles, int bs,
                            double latency_budget_ms) {
  int best_mt = 1;
  double best_goodput = -1.0;
  for (int mt : kMultitaskDegrees) {
    if (service.compute_demand * mt > 1.0 + 1e-9 || service.vram_demand * mt > 1.0 + 1e-9) break;
    const auto& entry = profiles.at(service.id, gpu_model, bs, mt);
    if (mt > 1 && entry.latency_ms > latency_budget_ms) continue;
    if (entry.goodput > best_goodput) {
      best_goodput = entry.goodput;
      best_mt = mt;
    }
  }
  return best_mt;
}

int select_multitask_degree(const ServiceSpec& service, const std::string& gpu_model, const ProfileTable& profiles, int bs) {
  return select_multitask_degree(service, gpu_model, profiles, bs, std::numeric_limits<double>::infinity());
}

int dp_group_count(double frame_rate_requirement, double rate_of_one_group) {
  if (!(rate_of_one_group > 0.0)) throw ZeroGroupRate("frame rate of one DP group must be positive");
  if (!(frame_rate_requirement > 0.0)) throw std::invalid_argument("frame rate requirement must be positive");
  // Guard against 60 / 30 landing a hair above 2.
  return std::max(1, static_cast<int>(std::ceil(frame_rate_requirement / rate_of_one_group - 1e-9)));
}

int max_inter_frame_count(double inter_frame_budget_ms, double fps) {
  if (!(inter_frame_budget_ms > 0.0) || !(fps > 0.0)) throw std::invalid_argument("budget and fps must be positive");
  return std::max(1, static_cast<int>(std::floor(inter_frame_budget_ms * fps / 1000.0 + 1e-9)));
}

int inter_request_count(int bs, int mf_max) {
  if (bs < 1 || mf_max < 1) throw std::invalid_argument("bs and mf must be at least 1");
  return bs / mf_max;
}

AllocationPlan build_allocation_plan(const ServiceSpec& service, const TaskCategory& category, const ProfileTable& profiles,
                                     const std::string& gpu_model, double slo_fraction) {
  const double budget = static_cast<double>(service.latency_slo_ms) * slo_fraction;
  AllocationPlan plan;

  if (category.gpu_class == GpuClass::MultiGpu) plan.mp = {service.plan.tp, service.plan.pp};
  plan.bs = service.plan.bs ? *service.plan.bs : select_batch_size(service, gpu_model, profiles, budget);
  plan.mt = service.plan.mt ? *service.plan.mt : select_multitask_degree(service, gpu_model, profiles, plan.bs, budget);

  if (category.sensitivity == Sensitivity::Frequency) {
    const double fps = *service.frequency_slo;
    plan.mf = service.plan.mf ? *service.plan.mf
                              : max_inter_frame_count(static_cast<double>(service.inter_frame_budget_ms()), fps);
    while (plan.mf > 1 && inter_request_count(plan.bs, plan.mf) < 1) --plan.mf;
    if (category.gpu_class == GpuClass::MultiGpu) {
      plan.dp_groups = service.plan.dp ? *service.plan.dp
                                       : dp_group_count(fps, profiles.at(service.id, gpu_model, plan.bs, plan.mt).goodput);
    }
  }
  plan.inter_request_count = inter_request_count(plan.bs, plan.mf);
  return plan;
}

std::vector<AllocationPlan> build_plans(const ScenarioModel& model, const ProfileTable& profiles) {
  std::vector<AllocationPlan> plans;
  plans.reserve(model.service_count());
  for (const auto& service : model.services()) {
    plans.push_back(build_allocation_plan(service, categorize(service), profiles, model.reference_gpu_model(),
                                          model.control().bs_slo_fraction));
  }
  return plans;
}

}  // namespace edgeserve
