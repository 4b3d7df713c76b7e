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

#include <cstdint>
#include <string>
#include <vector>

#include "tailsim/time.hpp"

namespace tailsim {

/// Nearest-rank percentile: rank = ceil(p * n), 1-based. Deterministic.
/// Throws on an empty sample or p outside (0, 1).
double percentile(std::vector<double> samples, double p);
SimTime percentile_us(std::vector<SimTime> samples, double p);

struct LatencyPercentiles {
  double p50 = 0, p90 = 0, p99 = 0, p999 = 0;
};

LatencyPercentiles latency_percentiles_ms(const std::vector<SimTime>& us);

/// One row of experiment output. Field order mirrors the summary CSV.
struct RunSummary {
  std::string policy;
  std::string benchmark;
  double load = 0;
  std::uint64_t seed = 0;
  std::uint64_t queries = 0;    // issued in the measurement window
  std::uint64_t completed = 0;  // all replies arrived by the deadline
  std::uint64_t dropped = 0;    // deadline passed with replies outstanding
  double miss_reply_frac = 0;
  double miss_query_frac = 0;
  LatencyPercentiles total;      // request-compute-reply, per reply
  LatencyPercentiles request_leg;
  LatencyPercentiles leaf_response;  // wait + service
  double energy_j = 0;
  double savings_frac = 0;  // vs same-seed baseline; NaN when no reference
  std::vector<double> state_ghz;      // frequency states, ascending
  std::vector<double> state_frac;     // fraction of requests granted each state
  // Extra diagnostics (not part of the fixed CSV column set).
  double clean_request_frac = 0;      // requests with neither ECN nor retransmit
  double access_utilization = 0;      // mean over server access links, window only
  double mean_leaf_wait_ms = 0;
  double mean_total_slack_ms = 0;
  double frac_slack_ge_quarter_budget = 0;
  std::uint64_t replies_due = 0;
  std::uint64_t replies_late = 0;
  std::uint64_t in_flight_end = 0;
};

/// Fixed-order summary CSV (header + one row).
std::string summary_csv_header(const RunSummary& s);
std::string summary_csv_row(const RunSummary& s);

/// JSON mirror of the summary for tooling.
std::string summary_json(const RunSummary& s);

}  // namespace tailsim
