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

#include "tailsim/policy.hpp"

#include <stdexcept>

namespace tailsim {

PolicyKind policy_kind_from_string(const std::string& s) {
  if (s == "baseline") return PolicyKind::Baseline;
  if (s == "pegasus") return PolicyKind::Pegasus;
  if (s == "timetrader") return PolicyKind::TimeTrader;
  throw std::invalid_argument("unknown policy: " + s);
}

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::Baseline: return "baseline";
    case PolicyKind::Pegasus: return "pegasus";
    case PolicyKind::TimeTrader: return "timetrader";
  }
  return "?";
}

DurUs request_slack(bool ecn_seen, bool retransmitted, SimTime request_budget_us,
                    const PolicyConfig& cfg) {
  if (ecn_seen || retransmitted) return 0;
  DurUs timeout_bound = static_cast<DurUs>(cfg.rto_min_us);
  DurUs budget_bound =
      static_cast<DurUs>(request_budget_us) - static_cast<DurUs>(cfg.median_net_latency_us);
  if (budget_bound < 0) budget_bound = 0;
  return std::min(timeout_bound, budget_bound);
}

DurUs queuing_slack(SimTime avg_peak_wait_us, SimTime current_wait_us) {
  return current_wait_us >= avg_peak_wait_us
             ? 0
             : static_cast<DurUs>(avg_peak_wait_us - current_wait_us);
}

double slowdown_factor(DurUs request_slack_us, DurUs queuing_slack_us, double scale,
                       SimTime compute_budget_us, SimTime rapl_latency_us) {
  if (request_slack_us < 0 || queuing_slack_us < 0 || scale < 0)
    throw std::invalid_argument("slowdown_factor: negative input");
  DurUs usable = request_slack_us + queuing_slack_us - static_cast<DurUs>(rapl_latency_us);
  if (usable < 0) usable = 0;
  return static_cast<double>(usable) * scale / static_cast<double>(compute_budget_us);
}

double scale_update(double scale, double window_miss_fraction, const PolicyConfig& cfg) {
  double room = (cfg.sla_miss_target - window_miss_fraction) / cfg.sla_miss_target;
  double next = room > cfg.guard_band ? scale + cfg.scale_step : scale - cfg.scale_step;
  return std::clamp(next, 0.0, 1.0);
}

double scale_table_initial(double load, bool memcached) {
  // Nearest of the three configured utilization rows.
  struct Row { double load, search, mc; };
  static constexpr Row rows[] = {{0.3, 0.7, 0.8}, {0.6, 0.4, 0.5}, {0.9, 0.2, 0.2}};
  const Row* best = &rows[0];
  for (const Row& r : rows) {
    if (std::abs(r.load - load) < std::abs(best->load - load)) best = &r;
  }
  return memcached ? best->mc : best->search;
}

int pegasus_update(const PegasusState& st, SimTime cluster_p99_us, SimTime deadline_us,
                   const PowerCurve& curve, double margin) {
  double thr_down = (1.0 - margin) * static_cast<double>(deadline_us);
  int ix = st.state_ix;
  if (static_cast<double>(cluster_p99_us) < thr_down) {
    if (ix > 0) --ix;
  } else if (cluster_p99_us > deadline_us) {
    if (ix < curve.base_state()) ++ix;
  }
  return ix;
}

}  // namespace tailsim
