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

#include "edgeserve/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "edgeserve/workload.hpp"

namespace edgeserve {
namespace {

constexpr std::string_view kComputePrefix = "compute_ms@";

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Field parsers throw std::invalid_argument; callers attach the line number.
std::int64_t to_int(std::string_view s) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("not an integer: '" + std::string(s) + "'");
  return v;
}

std::uint64_t to_uint(std::string_view s) {
  std::uint64_t v = 0;
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    s.remove_prefix(2);
    base = 16;
  }
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("not an unsigned integer: '" + std::string(s) + "'");
  return v;
}

double to_double(std::string_view s) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + std::string(s) + "'");
  return v;
}

bool to_bool(std::string_view s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(s) + "'");
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<ServerAt> to_server_list(std::string_view s) {
  std::vector<ServerAt> out;
  std::string flat(s);
  std::replace(flat.begin(), flat.end(), ',', ' ');
  std::istringstream in(flat);
  std::string token;
  while (in >> token) {
    const auto at = token.find('@');
    if (at == std::string::npos || at == 0) throw std::invalid_argument("expected server@ms, got '" + token + "'");
    out.push_back({token.substr(0, at), to_int(std::string_view(token).substr(at + 1))});
  }
  return out;
}

std::string fmt_server_list(const std::vector<ServerAt>& list) {
  std::string out;
  for (const auto& e : list) {
    if (!out.empty()) out += ' ';
    out += e.server + "@" + std::to_string(e.at_ms);
  }
  return out;
}

// One key of the [control] section: how to read it and how to print it.
struct ControlKey {
  std::string_view name;
  std::function<void(Control&, std::string_view)> set;
  std::function<std::string(const Control&)> get;
};

template <typename T>
ControlKey int_key(std::string_view name, T Control::*field) {
  return {name, [field](Control& c, std::string_view v) { c.*field = static_cast<T>(to_int(v)); },
          [field](const Control& c) { return std::to_string(c.*field); }};
}

ControlKey double_key(std::string_view name, double Control::*field) {
  return {name, [field](Control& c, std::string_view v) { c.*field = to_double(v); },
          [field](const Control& c) { return fmt_double(c.*field); }};
}

ControlKey bool_key(std::string_view name, bool Control::*field) {
  return {name, [field](Control& c, std::string_view v) { c.*field = to_bool(v); },
          [field](const Control& c) { return std::string(c.*field ? "true" : "false"); }};
}

ControlKey list_key(std::string_view name, std::vector<ServerAt> Control::*field) {
  return {name, [field](Control& c, std::string_view v) { c.*field = to_server_list(v); },
          [field](const Control& c) { return fmt_server_list(c.*field); }};
}

const std::vector<ControlKey>& control_keys() {
  static const std::vector<ControlKey> keys = {
      {"seed", [](Control& c, std::string_view v) { c.seed = to_uint(v); },
       [](const Control& c) { return std::to_string(c.seed); }},
      {"eval_seed", [](Control& c, std::string_view v) { c.eval_seed = to_uint(v); },
       [](const Control& c) { return std::to_string(c.eval_seed); }},
      int_key("max_offload", &Control::max_offload),
      int_key("sync_interval_ms", &Control::sync_interval_ms),
      int_key("placement_interval_ms", &Control::placement_interval_ms),
      {"placement_mode",
       [](Control& c, std::string_view v) {
         if (v == "offline") c.placement_mode = PlacementMode::Offline;
         else if (v == "online") c.placement_mode = PlacementMode::Online;
         else throw std::invalid_argument("expected offline|online");
       },
       [](const Control& c) { return std::string(c.placement_mode == PlacementMode::Offline ? "offline" : "online"); }},
      {"eval_mode",
       [](Control& c, std::string_view v) {
         if (v == "sampled") c.eval_mode = EvalMode::Sampled;
         else if (v == "expected") c.eval_mode = EvalMode::Expected;
         else throw std::invalid_argument("expected sampled|expected");
       },
       [](const Control& c) { return std::string(c.eval_mode == EvalMode::Sampled ? "sampled" : "expected"); }},
      {"placement_trace",
       [](Control& c, std::string_view v) {
         if (v == "lookahead") c.placement_trace = PlacementTrace::Lookahead;
         else if (v == "history") c.placement_trace = PlacementTrace::History;
         else throw std::invalid_argument("expected lookahead|history");
       },
       [](const Control& c) {
         return std::string(c.placement_trace == PlacementTrace::Lookahead ? "lookahead" : "history");
       }},
      int_key("eval_max_requests", &Control::eval_max_requests),
      bool_key("device_policy", &Control::device_policy),
      bool_key("preload_initial", &Control::preload_initial),
      int_key("bytes_per_server", &Control::bytes_per_server),
      int_key("group_size", &Control::group_size),
      int_key("hop_overhead_ms", &Control::hop_overhead_ms),
      double_key("default_bandwidth_mbps", &Control::default_bandwidth_mbps),
      int_key("batch_timeout_divisor", &Control::batch_timeout_divisor),
      double_key("bs_slo_fraction", &Control::bs_slo_fraction),
      int_key("decision_cost_ms", &Control::decision_cost_ms),
      int_key("central_group_size", &Control::central_group_size),
      int_key("central_delay_per_server_ms", &Control::central_delay_per_server_ms),
      double_key("device_load_bandwidth_mbps", &Control::device_load_bandwidth_mbps),
      int_key("duration_ms", &Control::duration_ms),
      int_key("timeseries_bucket_ms", &Control::timeseries_bucket_ms),
      list_key("fail", &Control::fail),
      list_key("corrupt", &Control::corrupt),
      list_key("join", &Control::join),
      list_key("exit", &Control::exit),
  };
  return keys;
}

void set_control(Control& control, std::string_view key, std::string_view value) {
  for (const auto& k : control_keys()) {
    if (k.name == key) {
      k.set(control, value);
      return;
    }
  }
  throw std::invalid_argument("unknown control key '" + std::string(key) + "'");
}

// A CSV table row with its header, addressed by column name.
class Row {
 public:
  Row(const std::vector<std::string>& header, std::vector<std::string> cells) : header_(header), cells_(std::move(cells)) {}

  std::string_view get(std::string_view column) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (header_[i] == column) return cells_[i];
    }
    return {};
  }
  bool has(std::string_view column) const { return !get(column).empty(); }
  std::string require(std::string_view column) const {
    const auto v = get(column);
    if (v.empty()) throw std::invalid_argument("missing value for '" + std::string(column) + "'");
    return std::string(v);
  }
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::string>& cells() const { return cells_; }

 private:
  const std::vector<std::string>& header_;
  std::vector<std::string> cells_;
};

struct Section {
  std::vector<std::string> allowed;  // empty: key-value section
  bool allow_compute_columns = false;
};

const std::map<std::string, Section, std::less<>>& sections() {
  static const std::map<std::string, Section, std::less<>> s = {
      {"control", {}},
      {"profile_synth", {}},
      {"servers", {{"id", "live"}}},
      {"gpus", {{"server", "model", "count"}}},
      {"services",
       {{"id", "compute", "vram", "slo_ms", "fps", "multi_gpu", "load_ms", "payload_bytes", "frame_budget_ms", "model_mb",
         "bs", "mt", "mf", "dp", "tp", "pp"},
        true}},
      {"bandwidth", {{"from", "to", "mbps"}}},
      {"devices", {{"id", "server", "model", "register_ms"}}},
      {"profiles", {{"service", "gpu", "bs", "mt", "goodput", "latency_ms"}}},
      {"workload", {{"service", "origin", "rate_per_s", "pattern", "start_ms", "duration_ms", "frames", "on_ms", "off_ms"}}},
      {"priority", {{"service", "server"}}},
      {"trace", {{"arrival_ms", "service_id", "origin_server", "frame_count"}}},
  };
  return s;
}

std::optional<int> opt_int(const Row& row, std::string_view col) {
  if (!row.has(col)) return std::nullopt;
  return static_cast<int>(to_int(row.get(col)));
}

void apply_row(Scenario& sc, std::string_view section, const Row& row) {
  if (section == "servers") {
    sc.servers.push_back({row.require("id"), {}, row.has("live") ? to_bool(row.get("live")) : true});
  } else if (section == "gpus") {
    const auto server = row.require("server");
    const auto it = std::find_if(sc.servers.begin(), sc.servers.end(), [&](const ServerSpec& s) { return s.id == server; });
    if (it == sc.servers.end()) throw std::invalid_argument("gpus row names unknown server '" + server + "'");
    const auto count = row.has("count") ? to_int(row.get("count")) : 1;
    if (count < 0) throw std::invalid_argument("negative gpu count");
    for (std::int64_t i = 0; i < count; ++i) it->gpu_models.push_back(row.require("model"));
  } else if (section == "services") {
    ServiceSpec s;
    s.id = row.require("id");
    s.compute_demand = to_double(row.require("compute"));
    s.vram_demand = to_double(row.require("vram"));
    s.latency_slo_ms = to_int(row.require("slo_ms"));
    if (row.has("fps")) s.frequency_slo = to_double(row.get("fps"));
    if (row.has("multi_gpu")) s.needs_multi_gpu = to_bool(row.get("multi_gpu"));
    if (row.has("load_ms")) s.model_load_ms = to_int(row.get("load_ms"));
    if (row.has("payload_bytes")) s.payload_bytes = to_int(row.get("payload_bytes"));
    if (row.has("frame_budget_ms")) s.frame_budget_ms = to_int(row.get("frame_budget_ms"));
    if (row.has("model_mb")) s.model_mb = to_double(row.get("model_mb"));
    s.plan.bs = opt_int(row, "bs");
    s.plan.mt = opt_int(row, "mt");
    s.plan.mf = opt_int(row, "mf");
    s.plan.dp = opt_int(row, "dp");
    s.plan.tp = opt_int(row, "tp").value_or(1);
    s.plan.pp = opt_int(row, "pp").value_or(1);
    for (std::size_t i = 0; i < row.header().size(); ++i) {
      const auto& col = row.header()[i];
      if (col.rfind(kComputePrefix, 0) == 0 && !row.cells()[i].empty()) {
        s.compute_time_ms[col.substr(kComputePrefix.size())] = to_double(row.cells()[i]);
      }
    }
    sc.services.push_back(std::move(s));
  } else if (section == "bandwidth") {
    sc.bandwidth_mbps[{row.require("from"), row.require("to")}] = to_double(row.require("mbps"));
  } else if (section == "devices") {
    sc.devices.push_back({row.require("id"), row.require("server"), row.require("model"),
                          row.has("register_ms") ? to_int(row.get("register_ms")) : 0});
  } else if (section == "profiles") {
    sc.profiles.push_back({row.require("service"), row.require("gpu"), static_cast<int>(to_int(row.require("bs"))),
                           static_cast<int>(to_int(row.require("mt"))), to_double(row.require("goodput")),
                           to_double(row.require("latency_ms"))});
  } else if (section == "workload") {
    StreamSpec s;
    s.service = row.require("service");
    s.origin = row.require("origin");
    s.rate_per_s = to_double(row.require("rate_per_s"));
    const auto pattern = row.get("pattern");
    if (pattern.empty() || pattern == "poisson") s.pattern = ArrivalPattern::Poisson;
    else if (pattern == "onoff") s.pattern = ArrivalPattern::OnOff;
    else throw std::invalid_argument("pattern must be poisson|onoff");
    if (row.has("start_ms")) s.start_ms = to_int(row.get("start_ms"));
    s.duration_ms = to_int(row.require("duration_ms"));
    if (row.has("frames")) s.frames = static_cast<int>(to_int(row.get("frames")));
    if (row.has("on_ms")) s.on_ms = to_int(row.get("on_ms"));
    if (row.has("off_ms")) s.off_ms = to_int(row.get("off_ms"));
    sc.workload.push_back(s);
  } else if (section == "priority") {
    sc.priority.push_back({row.require("service"), row.require("server")});
  } else if (section == "trace") {
    sc.trace.push_back({to_int(row.require("arrival_ms")), row.require("service_id"), row.require("origin_server"),
                        row.has("frame_count") ? static_cast<int>(to_int(row.get("frame_count"))) : 1});
  }
}

void apply_key_value(Scenario& sc, std::string_view section, std::string_view key, std::string_view value) {
  if (section == "control") {
    set_control(sc.control, key, value);
  } else if (key == "bs_slope") {
    sc.profile_synth.bs_slope = to_double(value);
  } else if (key == "mt_slope") {
    sc.profile_synth.mt_slope = to_double(value);
  } else {
    throw std::invalid_argument("unknown profile_synth key '" + std::string(key) + "'");
  }
}

bool is_pow2_in(int v, int max) { return v >= 1 && v <= max && (v & (v - 1)) == 0; }

}  // namespace

Scenario parse_scenario(std::string_view text) {
  Scenario sc;
  std::string current;
  std::set<std::string> seen;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  std::size_t pos = 0;

  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      current = std::string(trim(line.substr(1, line.size() - 2)));
      if (!sections().contains(current)) throw ParseError(line_no, "unknown section [" + current + "]");
      if (!seen.insert(current).second) throw ParseError(line_no, "duplicate section [" + current + "]");
      header.clear();
      continue;
    }
    if (current.empty()) throw ParseError(line_no, "content before the first section");

    const auto& section = sections().find(current)->second;
    try {
      if (section.allowed.empty()) {
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument("expected key = value");
        apply_key_value(sc, current, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        continue;
      }
      auto cells = split(line, ',');
      if (header.empty()) {
        for (const auto& col : cells) {
          const bool known = std::find(section.allowed.begin(), section.allowed.end(), col) != section.allowed.end();
          const bool compute = section.allow_compute_columns && col.rfind(kComputePrefix, 0) == 0 &&
                               col.size() > kComputePrefix.size();
          if (!known && !compute) throw std::invalid_argument("unknown column '" + col + "' in [" + current + "]");
          if (std::count(cells.begin(), cells.end(), col) > 1) throw std::invalid_argument("duplicate column '" + col + "'");
        }
        header = std::move(cells);
        continue;
      }
      if (cells.size() != header.size()) {
        throw std::invalid_argument("expected " + std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
      }
      apply_row(sc, current, Row(header, std::move(cells)));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return sc;
}

void apply_overrides(Scenario& scenario, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ValidationError(o, "override must be key=value");
    const auto key = trim(std::string_view(o).substr(0, eq));
    try {
      set_control(scenario.control, key, trim(std::string_view(o).substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(std::string(key), e.what());
    }
  }
}

void validate_scenario(const Scenario& sc) {
  auto fail = [](const std::string& field, const std::string& what) { throw ValidationError(field, what); };

  if (sc.servers.empty()) fail("servers", "at least one server is required");
  if (sc.services.empty()) fail("services", "at least one service is required");

  std::set<std::string> server_ids;
  std::set<std::string> models;
  for (const auto& s : sc.servers) {
    if (!server_ids.insert(s.id).second) fail("servers.id", "duplicate server '" + s.id + "'");
    models.insert(s.gpu_models.begin(), s.gpu_models.end());
  }
  auto need_server = [&](const std::string& field, const std::string& id) {
    if (!server_ids.contains(id)) fail(field, "unknown server '" + id + "'");
  };
  for (const auto& d : sc.devices) {
    need_server("devices.server", d.server);
    models.insert(d.gpu_model);
  }

  std::set<std::string> service_ids;
  for (const auto& s : sc.services) {
    if (!service_ids.insert(s.id).second) fail("services.id", "duplicate service '" + s.id + "'");
    if (!(s.compute_demand > 0.0 && s.compute_demand <= 1.0)) fail("compute_demand", s.id + " must lie in (0, 1]");
    if (!(s.vram_demand > 0.0 && s.vram_demand <= 1.0)) fail("vram_demand", s.id + " must lie in (0, 1]");
    if (s.latency_slo_ms <= 0) fail("slo_ms", s.id + " must be positive");
    if (s.frequency_slo && !(*s.frequency_slo > 0.0)) fail("fps", s.id + " must be positive");
    if (s.frame_budget_ms && *s.frame_budget_ms <= 0) fail("frame_budget_ms", s.id + " must be positive");
    if (s.model_load_ms < 0) fail("load_ms", s.id + " must be non-negative");
    if (s.payload_bytes < 0) fail("payload_bytes", s.id + " must be non-negative");
    for (const auto& m : models) {
      const auto it = s.compute_time_ms.find(m);
      if (it == s.compute_time_ms.end()) fail(std::string(kComputePrefix) + m, s.id + " has no compute time for GPU model " + m);
      if (!(it->second > 0.0)) fail(std::string(kComputePrefix) + m, s.id + " compute time must be positive");
    }
    const auto& p = s.plan;
    if (p.bs && !is_pow2_in(*p.bs, 512)) fail("bs", s.id + " batch size must be a power of two in [1, 512]");
    if (p.mt && !is_pow2_in(*p.mt, 16)) fail("mt", s.id + " multitask degree must be a power of two in [1, 16]");
    if (p.mt && (s.compute_demand * *p.mt > 1.0 + 1e-9 || s.vram_demand * *p.mt > 1.0 + 1e-9)) {
      fail("mt", s.id + " slices do not fit one GPU at this degree");
    }
    if (p.mf && *p.mf < 1) fail("mf", s.id + " must be at least 1");
    if (p.dp && *p.dp < 1) fail("dp", s.id + " must be at least 1");
    if (p.dp && *p.dp > 1 && !s.frequency_sensitive()) fail("dp", s.id + " data parallelism needs a frequency SLO");
    if (p.tp < 1 || p.pp < 1) fail("tp", s.id + " parallel degrees must be at least 1");
    if ((p.tp * p.pp > 1 || p.dp.value_or(1) > 1) && !s.needs_multi_gpu) {
      fail("multi_gpu", s.id + " spans several GPUs but is not declared multi_gpu");
    }
  }
  auto need_service = [&](const std::string& field, const std::string& id) {
    if (!service_ids.contains(id)) fail(field, "unknown service '" + id + "'");
  };

  for (const auto& [key, mbps] : sc.bandwidth_mbps) {
    need_server("bandwidth.from", key.first);
    need_server("bandwidth.to", key.second);
    if (!(mbps > 0.0)) fail("bandwidth.mbps", "must be positive");
  }
  for (const auto& p : sc.profiles) {
    need_service("profiles.service", p.service);
    if (!models.contains(p.gpu_model)) fail("profiles.gpu", "unknown GPU model '" + p.gpu_model + "'");
    if (!is_pow2_in(p.bs, 512)) fail("profiles.bs", "must be a power of two in [1, 512]");
    if (!is_pow2_in(p.mt, 16)) fail("profiles.mt", "must be a power of two in [1, 16]");
    if (!(p.latency_ms > 0.0)) fail("profiles.latency_ms", "must be positive");
    if (p.goodput < 0.0) fail("profiles.goodput", "must be non-negative");
  }
  if (sc.profile_synth.bs_slope < 0.0) fail("bs_slope", "must be non-negative");
  if (sc.profile_synth.mt_slope < 0.0) fail("mt_slope", "must be non-negative");

  for (const auto& w : sc.workload) {
    need_service("workload.service", w.service);
    need_server("workload.origin", w.origin);
    if (w.rate_per_s < 0.0) fail("workload.rate_per_s", "must be non-negative");
    if (w.duration_ms < 0 || w.start_ms < 0) fail("workload.duration_ms", "must be non-negative");
    if (w.frames < 1) fail("workload.frames", "must be at least 1");
    if (w.pattern == ArrivalPattern::OnOff && (w.on_ms <= 0 || w.off_ms < 0)) fail("workload.on_ms", "onoff needs on_ms > 0");
  }
  for (const auto& t : sc.trace) {
    need_service("trace.service_id", t.service);
    need_server("trace.origin_server", t.origin);
    if (t.arrival_ms < 0) fail("trace.arrival_ms", "must be non-negative");
    if (t.frame_count < 1) fail("trace.frame_count", "must be at least 1");
    const auto& svc = *std::find_if(sc.services.begin(), sc.services.end(), [&](const ServiceSpec& s) { return s.id == t.service; });
    if (!svc.frequency_sensitive() && t.frame_count != 1) fail("trace.frame_count", "latency requests carry one frame");
  }
  for (const auto& p : sc.priority) {
    need_service("priority.service", p.service);
    need_server("priority.server", p.server);
  }

  const auto& c = sc.control;
  if (c.max_offload < 0) fail("max_offload", "must be non-negative");
  if (c.sync_interval_ms < 1) fail("sync_interval_ms", "must be at least 1");
  if (c.placement_interval_ms < c.sync_interval_ms) fail("placement_interval_ms", "must be at least sync_interval_ms");
  if (c.eval_max_requests < 1) fail("eval_max_requests", "must be at least 1");
  if (c.bytes_per_server < 0) fail("bytes_per_server", "must be non-negative");
  if (c.group_size < 0) fail("group_size", "must be non-negative");
  if (c.hop_overhead_ms < 0) fail("hop_overhead_ms", "must be non-negative");
  if (!(c.default_bandwidth_mbps > 0.0)) fail("default_bandwidth_mbps", "must be positive");
  if (c.batch_timeout_divisor < 1) fail("batch_timeout_divisor", "must be at least 1");
  if (!(c.bs_slo_fraction > 0.0 && c.bs_slo_fraction <= 1.0)) fail("bs_slo_fraction", "must lie in (0, 1]");
  if (c.decision_cost_ms < 0) fail("decision_cost_ms", "must be non-negative");
  if (c.central_group_size < 1) fail("central_group_size", "must be at least 1");
  if (c.central_delay_per_server_ms < 0) fail("central_delay_per_server_ms", "must be non-negative");
  if (!(c.device_load_bandwidth_mbps > 0.0)) fail("device_load_bandwidth_mbps", "must be positive");
  if (c.duration_ms < 0) fail("duration_ms", "must be non-negative");
  if (c.timeseries_bucket_ms < 1) fail("timeseries_bucket_ms", "must be at least 1");
  for (const auto& e : c.fail) need_server("fail", e.server);
  for (const auto& e : c.corrupt) need_server("corrupt", e.server);
  for (const auto& e : c.exit) need_server("exit", e.server);
  for (const auto& e : c.join) {
    need_server("join", e.server);
    const auto& s = *std::find_if(sc.servers.begin(), sc.servers.end(), [&](const ServerSpec& x) { return x.id == e.server; });
    if (s.initially_live) fail("join", e.server + " is already live");
  }
}

ScenarioModel::ScenarioModel(Scenario spec) : spec_(std::move(spec)) {
  validate_scenario(spec_);
  for (ServerIdx i = 0; i < spec_.servers.size(); ++i) server_by_id_.emplace(spec_.servers[i].id, i);
  for (ServiceIdx i = 0; i < spec_.services.size(); ++i) service_by_id_.emplace(spec_.services[i].id, i);

  std::map<std::string, int> counts;
  for (const auto& s : spec_.servers) {
    for (const auto& m : s.gpu_models) ++counts[m];
  }
  int best = -1;
  for (const auto& [model, n] : counts) {
    if (n > best) {
      best = n;
      reference_gpu_ = model;
    }
  }
  if (reference_gpu_.empty()) {
    const auto models = gpu_models();
    if (!models.empty()) reference_gpu_ = models.front();
  }

  auto rows = spec_.trace;
  auto generated = generate_workload(spec_.workload, spec_.control.seed);
  rows.insert(rows.end(), generated.begin(), generated.end());
  std::stable_sort(rows.begin(), rows.end(), [](const TraceRow& a, const TraceRow& b) { return a.arrival_ms < b.arrival_ms; });
  requests_ = resolve_trace(*this, rows);
}

std::optional<ServerIdx> ScenarioModel::find_server(std::string_view id) const {
  const auto it = server_by_id_.find(id);
  if (it == server_by_id_.end()) return std::nullopt;
  return it->second;
}

std::optional<ServiceIdx> ScenarioModel::find_service(std::string_view id) const {
  const auto it = service_by_id_.find(id);
  if (it == service_by_id_.end()) return std::nullopt;
  return it->second;
}

ServerIdx ScenarioModel::server_index(std::string_view id) const {
  const auto idx = find_server(id);
  if (!idx) throw ValidationError("server", "unknown server '" + std::string(id) + "'");
  return *idx;
}

ServiceIdx ScenarioModel::service_index(std::string_view id) const {
  const auto idx = find_service(id);
  if (!idx) throw ValidationError("service", "unknown service '" + std::string(id) + "'");
  return *idx;
}

double ScenarioModel::bandwidth_mbps(ServerIdx from, ServerIdx to) const {
  const auto& a = spec_.servers.at(from).id;
  const auto& b = spec_.servers.at(to).id;
  if (auto it = spec_.bandwidth_mbps.find({a, b}); it != spec_.bandwidth_mbps.end()) return it->second;
  if (auto it = spec_.bandwidth_mbps.find({b, a}); it != spec_.bandwidth_mbps.end()) return it->second;
  return spec_.control.default_bandwidth_mbps;
}

std::vector<std::string> ScenarioModel::gpu_models() const {
  std::set<std::string> models;
  for (const auto& s : spec_.servers) models.insert(s.gpu_models.begin(), s.gpu_models.end());
  for (const auto& d : spec_.devices) models.insert(d.gpu_model);
  return {models.begin(), models.end()};
}

std::vector<Request> resolve_trace(const ScenarioModel& model, const std::vector<TraceRow>& rows) {
  std::vector<Request> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    Request r;
    r.id = out.size();
    r.service = model.service_index(row.service);
    r.origin = model.server_index(row.origin);
    r.arrival_ms = row.arrival_ms;
    r.deadline_ms = row.arrival_ms + model.service(r.service).latency_slo_ms;
    r.frame_count = row.frame_count;
    r.hop_path = {r.origin};
    out.push_back(std::move(r));
  }
  return out;
}

ScenarioModel load_scenario(std::string_view text, const std::vector<std::string>& overrides) {
  auto sc = parse_scenario(text);
  apply_overrides(sc, overrides);
  return ScenarioModel(std::move(sc));
}

ScenarioModel load_scenario_file(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str(), overrides);
}

std::string serialize_scenario(const Scenario& sc) {
  std::ostringstream out;
  auto opt = [](const auto& o) { return o ? std::to_string(*o) : std::string(); };

  out << "[control]\n";
  for (const auto& k : control_keys()) out << k.name << " = " << k.get(sc.control) << '\n';

  out << "\n[profile_synth]\nbs_slope = " << fmt_double(sc.profile_synth.bs_slope)
      << "\nmt_slope = " << fmt_double(sc.profile_synth.mt_slope) << '\n';

  out << "\n[servers]\nid,live\n";
  for (const auto& s : sc.servers) out << s.id << ',' << (s.initially_live ? "true" : "false") << '\n';

  out << "\n[gpus]\nserver,model,count\n";
  for (const auto& s : sc.servers) {
    for (std::size_t i = 0; i < s.gpu_models.size();) {
      std::size_t j = i;
      while (j < s.gpu_models.size() && s.gpu_models[j] == s.gpu_models[i]) ++j;
      out << s.id << ',' << s.gpu_models[i] << ',' << (j - i) << '\n';
      i = j;
    }
  }

  std::set<std::string> models;
  for (const auto& s : sc.services) {
    for (const auto& [m, _] : s.compute_time_ms) models.insert(m);
  }
  out << "\n[services]\nid,compute,vram,slo_ms,fps,multi_gpu,load_ms,payload_bytes,frame_budget_ms,model_mb,bs,mt,mf,dp,tp,pp";
  for (const auto& m : models) out << ',' << kComputePrefix << m;
  out << '\n';
  for (const auto& s : sc.services) {
    out << s.id << ',' << fmt_double(s.compute_demand) << ',' << fmt_double(s.vram_demand) << ',' << s.latency_slo_ms << ','
        << (s.frequency_slo ? fmt_double(*s.frequency_slo) : "") << ',' << (s.needs_multi_gpu ? "true" : "false") << ','
        << s.model_load_ms << ',' << s.payload_bytes << ',' << opt(s.frame_budget_ms) << ',' << fmt_double(s.model_mb) << ','
        << opt(s.plan.bs) << ',' << opt(s.plan.mt) << ',' << opt(s.plan.mf) << ',' << opt(s.plan.dp) << ',' << s.plan.tp << ','
        << s.plan.pp;
    for (const auto& m : models) {
      out << ',';
      if (auto it = s.compute_time_ms.find(m); it != s.compute_time_ms.end()) out << fmt_double(it->second);
    }
    out << '\n';
  }

  if (!sc.bandwidth_mbps.empty()) {
    out << "\n[bandwidth]\nfrom,to,mbps\n";
    for (const auto& [k, v] : sc.bandwidth_mbps) out << k.first << ',' << k.second << ',' << fmt_double(v) << '\n';
  }
  if (!sc.devices.empty()) {
    out << "\n[devices]\nid,server,model,register_ms\n";
    for (const auto& d : sc.devices) out << d.id << ',' << d.server << ',' << d.gpu_model << ',' << d.register_at_ms << '\n';
  }
  if (!sc.profiles.empty()) {
    out << "\n[profiles]\nservice,gpu,bs,mt,goodput,latency_ms\n";
    for (const auto& p : sc.profiles) {
      out << p.service << ',' << p.gpu_model << ',' << p.bs << ',' << p.mt << ',' << fmt_double(p.goodput) << ','
          << fmt_double(p.latency_ms) << '\n';
    }
  }
  if (!sc.workload.empty()) {
    out << "\n[workload]\nservice,origin,rate_per_s,pattern,start_ms,duration_ms,frames,on_ms,off_ms\n";
    for (const auto& w : sc.workload) {
      out << w.service << ',' << w.origin << ',' << fmt_double(w.rate_per_s) << ','
          << (w.pattern == ArrivalPattern::Poisson ? "poisson" : "onoff") << ',' << w.start_ms << ',' << w.duration_ms << ','
          << w.frames << ',' << w.on_ms << ',' << w.off_ms << '\n';
    }
  }
  if (!sc.priority.empty()) {
    out << "\n[priority]\nservice,server\n";
    for (const auto& p : sc.priority) out << p.service << ',' << p.server << '\n';
  }
  if (!sc.trace.empty()) {
    out << "\n[trace]\narrival_ms,service_id,origin_server,frame_count\n";
    for (const auto& t : sc.trace) out << t.arrival_ms << ',' << t.service << ',' << t.origin << ',' << t.frame_count << '\n';
  }
  return out.str();
}

}  // namespace edgeserve
