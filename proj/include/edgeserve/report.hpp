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

#include <stdexcept>
#include <string>
#include <vector>

#include "edgeserve/engine.hpp"

namespace edgeserve {

/// Failure to create or write an output file. The message carries the path.
class OutputError : public std::runtime_error {
 public:
  OutputError(const std::string& path, const std::string& what) : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

std::string format_double(double v);

std::string run_summary_csv(const ScenarioModel& model, const RunResult& result);
std::string timeseries_csv(const RunResult& result);
std::string gpu_utilization_csv(const RunResult& result);
std::string requests_csv(const ScenarioModel& model, const RunResult& result);
std::string placement_history(const ScenarioModel& model, const RunResult& result);

/// Writes run_summary.csv, timeseries.csv, gpu_utilization.csv, requests.csv
/// and placement_report.txt into `dir`, creating it if needed. Returns the paths.
std::vector<std::string> emit_metrics(const ScenarioModel& model, const RunResult& result, const std::string& dir);

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::string& path, const std::string& text);

/// One-line summary for the terminal.
std::string summary_line(const RunResult& result);

}  // namespace edgeserve
