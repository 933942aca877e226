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

#include "edgeserve/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace edgeserve {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace {

std::string server_name(const ScenarioModel& model, ServerIdx s) {
  return s == kHypotheticalServer ? std::string("*") : model.servers().at(s).id;
}

}  // namespace

std::string run_summary_csv(const ScenarioModel& model, const RunResult& result) {
  const auto& m = result.metrics;
  std::ostringstream out;
  out << "key,value\n";
  out << "requests," << m.requests << '\n';
  out << "submitted," << m.submitted << '\n';
  out << "satisfied," << m.satisfied << '\n';
  out << "satisfaction_rate," << format_double(m.satisfaction_rate()) << '\n';
  out << "goodput_per_s," << format_double(m.goodput_per_s()) << '\n';
  out << "duration_ms," << m.duration_ms << '\n';
  out << "offloads," << m.offloads << '\n';
  out << "mean_offload_count," << format_double(m.mean_offload_count) << '\n';
  for (Outcome o : {Outcome::Completed, Outcome::Timeout, Outcome::OffloadExceeded, Outcome::ResourceInsufficient,
                    Outcome::Lost}) {
    const auto it = m.outcomes.find(o);
    out << "outcome_" << to_string(o) << ',' << (it == m.outcomes.end() ? 0 : it->second) << '\n';
  }
  for (const auto& [cat, st] : m.per_category) {
    const auto name = to_string(cat);
    out << "submitted_" << name << ',' << st.submitted << '\n';
    out << "satisfied_" << name << ',' << st.satisfied << '\n';
    out << "goodput_per_s_" << name << ',' << format_double(st.goodput_per_s) << '\n';
  }
  out << "placement_epochs," << result.placements.size() << '\n';
  for (const auto& [server, at] : result.bypassed_at) out << "bypassed_" << server_name(model, server) << ',' << at << '\n';
  out << "invariant_violations," << result.invariant_violations.size() << '\n';
  out << "events," << result.events << '\n';
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(result.event_hash));
  out << "event_hash," << hash << '\n';
  return out.str();
}

std::string timeseries_csv(const RunResult& result) {
  std::ostringstream out;
  out << "t_ms,arrivals,completed,satisfied,offloads\n";
  for (const auto& r : result.timeseries) {
    out << r.t_ms << ',' << r.arrivals << ',' << r.completed << ',' << r.satisfied << ',' << r.offloads << '\n';
  }
  return out.str();
}

std::string gpu_utilization_csv(const RunResult& result) {
  std::ostringstream out;
  out << "server,gpu,model,busy_ms,utilization\n";
  for (const auto& u : result.metrics.gpu_utilization) {
    out << u.server << ',' << u.gpu << ',' << u.model << ',' << u.busy_ms << ',' << format_double(u.utilization) << '\n';
  }
  return out.str();
}

std::string requests_csv(const ScenarioModel& model, const RunResult& result) {
  std::ostringstream out;
  out << "id,service,origin,served_by,arrival_ms,completion_ms,outcome,offload_count,hop_path,submitted,satisfied\n";
  for (const auto& r : result.records) {
    out << r.id << ',' << model.service(r.service).id << ',' << server_name(model, r.origin) << ','
        << (r.served_by ? server_name(model, *r.served_by) : "") << ',' << r.arrival_ms << ','
        << (r.completion_ms ? std::to_string(*r.completion_ms) : "") << ',' << to_string(r.outcome) << ','
        << r.offload_count << ',';
    for (std::size_t i = 0; i < r.hop_path.size(); ++i) out << (i ? ">" : "") << server_name(model, r.hop_path[i]);
    out << ',' << r.submitted << ',' << r.satisfied << '\n';
  }
  return out.str();
}

std::string placement_history(const ScenarioModel& model, const RunResult& result) {
  std::string out;
  for (const auto& theta : result.placements) out += placement_report(model, theta);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  std::error_code ec;
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    fs::create_directories(parent, ec);
    if (ec) throw OutputError(parent.string(), ec.message());
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw OutputError(path, "cannot open for writing");
  file << text;
  if (!file) throw OutputError(path, "write failed");
}

std::vector<std::string> emit_metrics(const ScenarioModel& model, const RunResult& result, const std::string& dir) {
  const auto join = [&](const char* name) { return (std::filesystem::path(dir) / name).string(); };
  std::vector<std::string> paths = {join("run_summary.csv"), join("timeseries.csv"), join("gpu_utilization.csv"),
                                    join("requests.csv"), join("placement_report.txt")};
  write_text(paths[0], run_summary_csv(model, result));
  write_text(paths[1], timeseries_csv(result));
  write_text(paths[2], gpu_utilization_csv(result));
  write_text(paths[3], requests_csv(model, result));
  write_text(paths[4], placement_history(model, result));
  return paths;
}

std::string summary_line(const RunResult& result) {
  const auto& m = result.metrics;
  std::ostringstream out;
  out << "satisfied=" << m.satisfied << '/' << m.submitted << " rate=" << format_double(m.satisfaction_rate())
      << " goodput_per_s=" << format_double(m.goodput_per_s()) << " offloads=" << m.offloads
      << " mean_offload_count=" << format_double(m.mean_offload_count);
  return out.str();
}

}  // namespace edgeserve
