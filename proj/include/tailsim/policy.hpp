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

#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>

#include "tailsim/power.hpp"
#include "tailsim/time.hpp"

namespace tailsim {

enum class PolicyKind { Baseline, Pegasus, TimeTrader };

PolicyKind policy_kind_from_string(const std::string& s);
std::string to_string(PolicyKind k);

/// Knobs of the three power-management policies. All constants are
/// config-overridable; defaults follow the evaluated system.
struct PolicyConfig {
  PolicyKind kind = PolicyKind::Baseline;
  double sla_miss_target = 0.01;
  double scale_initial = -1;        // < 0: seed from the scale table by load
  double scale_step = 0.05;
  SimTime control_interval_us = 5 * kUsPerSec;
  double guard_band = 0.05;
  SimTime rto_min_us = 20 * kUsPerMs;
  SimTime median_net_latency_us = 200;  // calibrated
  SimTime rapl_latency_us = 1 * kUsPerMs;
  // Pegasus controller.
  double pegasus_margin = 0.1;
  SimTime pegasus_step_us = 1 * kUsPerSec;
  SimTime pegasus_window_us = 10 * kUsPerSec;
  std::size_t pegasus_min_samples = 100;
  // Mechanism toggles (ablations).
  bool edf = true;                // EDF leaf queue for TimeTrader
  bool use_request_slack = true;
  bool use_queuing_slack = true;
  bool scale_adaptation = true;
};

/// Per-request network slack inferred from congestion signals: zero when the
/// request saw ECN or a retransmission, otherwise the conservative minimum of
/// the timeout bound and the budget headroom.
DurUs request_slack(bool ecn_seen, bool retransmitted, SimTime request_budget_us,
                    const PolicyConfig& cfg);

/// max(0, average peak wait - current wait).
DurUs queuing_slack(SimTime avg_peak_wait_us, SimTime current_wait_us);

/// slowdown = max(0, total slack - actuation latency) * scale / compute budget.
double slowdown_factor(DurUs request_slack_us, DurUs queuing_slack_us, double scale,
                       SimTime compute_budget_us, SimTime rapl_latency_us);

/// Per-leaf scale adaptation against the missed-deadline target: one +/-step
/// per control interval, clamped to [0, 1].
double scale_update(double scale, double window_miss_fraction, const PolicyConfig& cfg);

/// Initial scale by nearest configured load (WebSearch / memcached columns).
double scale_table_initial(double load, bool memcached);

/// Centralized controller state: a trailing window of response-time samples
/// and the cluster-wide uniform state.
struct PegasusState {
  int state_ix = 0;                      // current uniform state (index into curve)
  std::deque<std::pair<SimTime, SimTime>> window;  // (arrival time, latency us)

  void observe(SimTime now, SimTime latency_us, SimTime window_us) {
    window.emplace_back(now, latency_us);
    while (!window.empty() && window.front().first + window_us < now) window.pop_front();
  }
};

/// One control step: below (1 - margin) * deadline steps one state down,
/// above the deadline steps one state up, otherwise holds. Returns the new
/// state index (never below the slowest state, never above base).
int pegasus_update(const PegasusState& st, SimTime cluster_p99_us, SimTime deadline_us,
                   const PowerCurve& curve, double margin);

}  // namespace tailsim
