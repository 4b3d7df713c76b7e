/*
 * Copyright 2026 The tailsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "tailsim/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace tailsim {

using nlohmann::json;

namespace {

// Applies `fn` to obj[key] if present and records the key as consumed.
template <typename Fn>
void take(const json& obj, std::vector<std::string>& seen, const char* key, Fn fn) {
  seen.push_back(key);
  auto it = obj.find(key);
  if (it != obj.end()) fn(*it);
}

void reject_unknown(const json& obj, const std::vector<std::string>& seen,
                    const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const auto& k : seen)
      if (k == it.key()) known = true;
    if (!known)
      throw std::runtime_error("config: unknown key '" + it.key() + "' in section " + section);
  }
}

void parse_cluster(const json& j, ClusterSpec* c) {
  std::vector<std::string> seen;
  take(j, seen, "racks", [&](const json& v) { c->racks = v.get<std::uint32_t>(); });
  take(j, seen, "servers_per_rack",
       [&](const json& v) { c->servers_per_rack = v.get<std::uint32_t>(); });
  take(j, seen, "fan_out", [&](const json& v) { c->fan_out = v.get<std::uint32_t>(); });
  take(j, seen, "leaf_threads",
       [&](const json& v) { c->leaf_threads = v.get<std::uint32_t>(); });
  take(j, seen, "benchmark", [&](const json& v) { c->benchmark = v.get<std::string>(); });
  take(j, seen, "peak_qps", [&](const json& v) { c->peak_qps = v.get<double>(); });
  take(j, seen, "budgets_ms", [&](const json& b) {
    c->budgets.total_us = ms_to_us(b.at("total").get<double>());
    c->budgets.request_us = ms_to_us(b.at("request").get<double>());
    c->budgets.reply_us = ms_to_us(b.at("reply").get<double>());
    c->budgets.compute_us = ms_to_us(b.at("compute").get<double>());
    c->budgets.aggregate_us = ms_to_us(b.at("aggregate").get<double>());
  });
  reject_unknown(j, seen, "cluster");
}

void parse_service(const json& j, ServiceTimeModel* m) {
  std::vector<std::string> seen;
  take(j, seen, "family", [&](const json& v) {
    std::string f = v.get<std::string>();
    if (f == "lognormal") m->family = ServiceTimeModel::Family::Lognormal;
    else if (f == "shifted-exponential") m->family = ServiceTimeModel::Family::ShiftedExp;
    else if (f == "empirical-table") m->family = ServiceTimeModel::Family::EmpiricalTable;
    else throw std::runtime_error("config: unknown service family " + f);
  });
  take(j, seen, "q_lo", [&](const json& v) { m->q_lo_p = v.get<double>(); });
  take(j, seen, "q_lo_ms", [&](const json& v) { m->q_lo_us = v.get<double>() * 1000; });
  take(j, seen, "q_hi", [&](const json& v) { m->q_hi_p = v.get<double>(); });
  take(j, seen, "q_hi_ms", [&](const json& v) { m->q_hi_us = v.get<double>() * 1000; });
  take(j, seen, "shift_ms", [&](const json& v) { m->shift_us = v.get<double>() * 1000; });
  take(j, seen, "mean_ms", [&](const json& v) { m->mean_us = v.get<double>() * 1000; });
  take(j, seen, "table", [&](const json& v) {
    m->table.clear();
    for (const auto& row : v)
      m->table.emplace_back(row.at(0).get<double>(), row.at(1).get<double>() * 1000);
  });
  take(j, seen, "base_frequency_ghz",
       [&](const json& v) { m->base_frequency_ghz = v.get<double>(); });
  take(j, seen, "modulation", [&](const json& v) {
    m->mod_duty = v.at("duty").get<double>();
    m->mod_factor_heavy = v.at("factor_heavy").get<double>();
    m->mod_cycle_us = ms_to_us(v.at("cycle_ms").get<double>());
  });
  reject_unknown(j, seen, "workload.service");
}

void parse_workload(const json& j, WorkloadConfig* w) {
  std::vector<std::string> seen;
  take(j, seen, "service", [&](const json& v) { parse_service(v, &w->service); });
  take(j, seen, "request_bytes",
       [&](const json& v) { w->request_bytes = v.get<std::uint32_t>(); });
  take(j, seen, "reply_bytes_lo",
       [&](const json& v) { w->reply_bytes_lo = v.get<std::uint32_t>(); });
  take(j, seen, "reply_bytes_hi",
       [&](const json& v) { w->reply_bytes_hi = v.get<std::uint32_t>(); });
  take(j, seen, "bg_size_mb", [&](const json& v) {
    w->bg_size_mb_a = v.at(0).get<double>();
    w->bg_size_mb_b = v.at(1).get<double>();
  });
  take(j, seen, "target_net_utilization",
       [&](const json& v) { w->target_net_utilization = v.get<double>(); });
  reject_unknown(j, seen, "workload");
}

void parse_network(const json& j, NetworkConfig* n) {
  std::vector<std::string> seen;
  take(j, seen, "link_gbps", [&](const json& v) { n->link_gbps = v.get<double>(); });
  take(j, seen, "propagation_us",
       [&](const json& v) { n->propagation_us = v.get<SimTime>(); });
  take(j, seen, "buffer_bytes",
       [&](const json& v) { n->buffer_bytes = v.get<std::uint64_t>(); });
  take(j, seen, "ecn_threshold_bytes",
       [&](const json& v) { n->ecn_threshold_bytes = v.get<std::uint64_t>(); });
  take(j, seen, "chunk_bytes", [&](const json& v) { n->chunk_bytes = v.get<std::uint32_t>(); });
  take(j, seen, "bg_chunk_bytes",
       [&](const json& v) { n->bg_chunk_bytes = v.get<std::uint32_t>(); });
  take(j, seen, "bg_pace_gbps", [&](const json& v) { n->bg_pace_gbps = v.get<double>(); });
  take(j, seen, "oversubscription",
       [&](const json& v) { n->oversubscription = v.get<double>(); });
  take(j, seen, "reply_jitter_ms",
       [&](const json& v) { n->reply_jitter_us = ms_to_us(v.get<double>()); });
  take(j, seen, "rto_min_ms", [&](const json& v) { n->rto_min_us = ms_to_us(v.get<double>()); });
  take(j, seen, "pods", [&](const json& v) { n->pods = v.get<std::uint32_t>(); });
  take(j, seen, "aggs_per_pod",
       [&](const json& v) { n->aggs_per_pod = v.get<std::uint32_t>(); });
  take(j, seen, "core_switches",
       [&](const json& v) { n->core_switches = v.get<std::uint32_t>(); });
  reject_unknown(j, seen, "network");
}

void parse_power(const json& j, PowerCurve* p) {
  std::vector<std::string> seen;
  take(j, seen, "states", [&](const json& v) {
    p->states.clear();
    for (const auto& row : v)
      p->states.push_back({row.at("ghz").get<double>(), row.at("active_watts").get<double>()});
  });
  take(j, seen, "idle_watts", [&](const json& v) { p->idle_w = v.get<double>(); });
  take(j, seen, "actuation_ms",
       [&](const json& v) { p->actuation_us = ms_to_us(v.get<double>()); });
  take(j, seen, "alpha", [&](const json& v) { p->alpha = v.get<double>(); });
  reject_unknown(j, seen, "power");
}

void parse_policy(const json& j, PolicyConfig* p) {
  std::vector<std::string> seen;
  take(j, seen, "kind",
       [&](const json& v) { p->kind = policy_kind_from_string(v.get<std::string>()); });
  take(j, seen, "sla_miss_target",
       [&](const json& v) { p->sla_miss_target = v.get<double>(); });
  take(j, seen, "scale_initial", [&](const json& v) { p->scale_initial = v.get<double>(); });
  take(j, seen, "scale_step", [&](const json& v) { p->scale_step = v.get<double>(); });
  take(j, seen, "control_interval_s",
       [&](const json& v) { p->control_interval_us = sec_to_us(v.get<double>()); });
  take(j, seen, "guard_band", [&](const json& v) { p->guard_band = v.get<double>(); });
  take(j, seen, "rto_min_ms",
       [&](const json& v) { p->rto_min_us = ms_to_us(v.get<double>()); });
  take(j, seen, "median_net_latency_ms",
       [&](const json& v) { p->median_net_latency_us = ms_to_us(v.get<double>()); });
  take(j, seen, "rapl_latency_ms",
       [&](const json& v) { p->rapl_latency_us = ms_to_us(v.get<double>()); });
  take(j, seen, "pegasus", [&](const json& v) {
    if (v.contains("margin")) p->pegasus_margin = v.at("margin").get<double>();
    if (v.contains("step_interval_s"))
      p->pegasus_step_us = sec_to_us(v.at("step_interval_s").get<double>());
    if (v.contains("window_s")) p->pegasus_window_us = sec_to_us(v.at("window_s").get<double>());
    if (v.contains("min_samples"))
      p->pegasus_min_samples = v.at("min_samples").get<std::size_t>();
  });
  take(j, seen, "edf", [&](const json& v) { p->edf = v.get<bool>(); });
  take(j, seen, "use_request_slack",
       [&](const json& v) { p->use_request_slack = v.get<bool>(); });
  take(j, seen, "use_queuing_slack",
       [&](const json& v) { p->use_queuing_slack = v.get<bool>(); });
  take(j, seen, "scale_adaptation",
       [&](const json& v) { p->scale_adaptation = v.get<bool>(); });
  reject_unknown(j, seen, "policy");
}

void parse_run(const json& j, RunConfig* r) {
  std::vector<std::string> seen;
  take(j, seen, "duration_s", [&](const json& v) { r->duration_s = v.get<double>(); });
  take(j, seen, "warmup_s", [&](const json& v) { r->warmup_s = v.get<double>(); });
  take(j, seen, "seed", [&](const json& v) { r->seed = v.get<std::uint64_t>(); });
  take(j, seen, "load", [&](const json& v) { r->load = v.get<double>(); });
  take(j, seen, "out", [&](const json& v) { r->out_path = v.get<std::string>(); });
  take(j, seen, "request_log",
       [&](const json& v) { r->request_log_path = v.get<std::string>(); });
  take(j, seen, "flow_log", [&](const json& v) { r->flow_log_path = v.get<std::string>(); });
  take(j, seen, "trace", [&](const json& v) { r->trace = v.get<bool>(); });
  take(j, seen, "calibration",
       [&](const json& v) { r->calibration_path = v.get<std::string>(); });
  reject_unknown(j, seen, "run");
}

PowerCurve default_power_curve() {
  PowerCurve p;
  p.states = {{1.2, 1.9948}, {1.5, 2.6255}, {1.8, 3.4271}, {2.1, 4.4071}, {2.5, 6.0}};
  p.idle_w = 1.8;
  p.actuation_us = 1000;
  p.alpha = 1.0;
  return p;
}

}  // namespace

void ExperimentConfig::validate() const {
  cluster.validate();
  workload.service.validate();
  power.validate();
  if (run.load <= 0 || run.load > 1)
    throw std::invalid_argument("run.load outside (0,1]");
  if (run.duration_s <= 0) throw std::invalid_argument("run.duration_s must be positive");
  if (workload.target_net_utilization < 0 || workload.target_net_utilization >= 1)
    throw std::invalid_argument("target_net_utilization outside [0,1)");
  if (network.ecn_threshold_bytes >= network.buffer_bytes)
    throw std::invalid_argument("ecn threshold must be below buffer capacity");
  if (policy.control_interval_us == 0)
    throw std::invalid_argument("control interval must be positive");
}

ExperimentConfig config_from_json_text(const std::string& text) {
  json j = json::parse(text);
  ExperimentConfig cfg;
  cfg.power = default_power_curve();
  std::vector<std::string> seen;
  take(j, seen, "cluster", [&](const json& v) { parse_cluster(v, &cfg.cluster); });
  take(j, seen, "workload", [&](const json& v) { parse_workload(v, &cfg.workload); });
  take(j, seen, "network", [&](const json& v) { parse_network(v, &cfg.network); });
  take(j, seen, "power", [&](const json& v) { parse_power(v, &cfg.power); });
  take(j, seen, "policy", [&](const json& v) { parse_policy(v, &cfg.policy); });
  take(j, seen, "run", [&](const json& v) { parse_run(v, &cfg.run); });
  reject_unknown(j, seen, "(top level)");
  cfg.workload.service.calibrate();
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const ExperimentConfig& cfg) {
  json j;
  j["cluster"] = {{"racks", cfg.cluster.racks},
                  {"servers_per_rack", cfg.cluster.servers_per_rack},
                  {"fan_out", cfg.cluster.fan_out},
                  {"leaf_threads", cfg.cluster.leaf_threads},
                  {"benchmark", cfg.cluster.benchmark},
                  {"peak_qps", cfg.cluster.peak_qps},
                  {"budgets_ms",
                   {{"total", us_to_ms(cfg.cluster.budgets.total_us)},
                    {"request", us_to_ms(cfg.cluster.budgets.request_us)},
                    {"reply", us_to_ms(cfg.cluster.budgets.reply_us)},
                    {"compute", us_to_ms(cfg.cluster.budgets.compute_us)},
                    {"aggregate", us_to_ms(cfg.cluster.budgets.aggregate_us)}}}};
  json states = json::array();
  for (const auto& s : cfg.power.states)
    states.push_back({{"ghz", s.ghz}, {"active_watts", s.active_w}});
  j["power"] = {{"states", states},
                {"idle_watts", cfg.power.idle_w},
                {"actuation_ms", us_to_ms(cfg.power.actuation_us)},
                {"alpha", cfg.power.alpha}};
  return j.dump(2);
}

Calibration load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calibration file: " + path);
  json j = json::parse(in);
  Calibration c;
  for (const auto& v : j.at("avg_peak_wait_us")) c.avg_peak_wait_us.push_back(v.get<SimTime>());
  c.median_net_latency_us = j.at("median_net_latency_us").get<SimTime>();
  c.p99_compute_us = j.at("p99_compute_us").get<SimTime>();
  c.p99_request_leg_us = j.at("p99_request_leg_us").get<SimTime>();
  c.compute_budget_ok = j.at("compute_budget_ok").get<bool>();
  c.request_budget_ok = j.at("request_budget_ok").get<bool>();
  if (j.contains("report")) c.report = j.at("report").get<std::string>();
  return c;
}

void save_calibration(const Calibration& c, const std::string& path) {
  json j;
  j["avg_peak_wait_us"] = c.avg_peak_wait_us;
  j["median_net_latency_us"] = c.median_net_latency_us;
  j["p99_compute_us"] = c.p99_compute_us;
  j["p99_request_leg_us"] = c.p99_request_leg_us;
  j["compute_budget_ok"] = c.compute_budget_ok;
  j["request_budget_ok"] = c.request_budget_ok;
  j["report"] = c.report;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write calibration file: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace tailsim
