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
#include <stdexcept>
#include <string>
#include <vector>

#include "tailsim/rng.hpp"
#include "tailsim/time.hpp"

namespace tailsim {

using NodeId = std::uint32_t;
using QueryId = std::uint64_t;

/// Decomposed SLA time budget. The simulated deadline covers the
/// request-compute-reply legs; the aggregate leg is budgeted but not simulated.
struct BudgetSet {
  SimTime total_us = 0;
  SimTime request_us = 0;
  SimTime reply_us = 0;
  SimTime compute_us = 0;
  SimTime aggregate_us = 0;

  SimTime deadline_us() const { return request_us + compute_us + reply_us; }
  void validate() const {
    if (!request_us || !reply_us || !compute_us || !aggregate_us)
      throw std::invalid_argument("all budget components must be positive");
    if (request_us + reply_us + compute_us + aggregate_us != total_us)
      throw std::invalid_argument("budget components must sum to the total");
  }
};

struct ClusterSpec {
  std::uint32_t racks = 8;
  std::uint32_t servers_per_rack = 8;
  std::uint32_t fan_out = 32;
  std::uint32_t leaf_threads = 96;  // service contexts per leaf, 2 per core
  std::string benchmark = "search";
  BudgetSet budgets;
  double peak_qps = 0;

  std::uint32_t nodes() const { return racks * servers_per_rack; }
  void validate() const {
    if (peak_qps <= 0) throw std::invalid_argument("peak_qps must be positive");
    if (leaf_threads < 1) throw std::invalid_argument("leaf_threads must be >= 1");
    if (fan_out > nodes() - 1)
      throw std::invalid_argument("fan_out exceeds available leaves (nodes - 1)");
    if (benchmark != "search" && benchmark != "memcached")
      throw std::invalid_argument("benchmark must be search or memcached");
    budgets.validate();
  }
};

/// Leaf service demand model: a base distribution (lognormal, shifted
/// exponential, or an empirical quantile table) multiplied by a slow per-leaf
/// work/load phase factor. The phase factor is a deterministic function of
/// (seed, leaf, arrival time), so demands do not depend on the policy under
/// test, and the marginal distribution is re-solved so the configured
/// calibration quantiles hold for the mixture.
struct ServiceTimeModel {
  enum class Family { Lognormal, ShiftedExp, EmpiricalTable };
  Family family = Family::Lognormal;

  // Lognormal base (in log-microseconds), solved from the quantile targets.
  double mu_log = 0;
  double sigma_log = 0;
  // Calibration targets for the marginal distribution.
  double q_lo_p = 0.80;
  double q_lo_us = 30000;
  double q_hi_p = 0.99;
  double q_hi_us = 60000;

  // Shifted exponential base.
  double shift_us = 0;
  double mean_us = 0;

  // Empirical inverse-CDF table: (cumulative probability, value in us).
  std::vector<std::pair<double, double>> table;

  double base_frequency_ghz = 2.5;

  // Work/load phase modulation: each leaf alternates between a heavy phase
  // (demand x factor_heavy, for duty x cycle) and a light phase (factor
  // solved so the time-average factor is 1). duty = 0 disables.
  double mod_duty = 0;
  double mod_factor_heavy = 1.0;
  SimTime mod_cycle_us = 600 * kUsPerMs;

  double factor_light() const {
    if (mod_duty <= 0) return 1.0;
    return (1.0 - mod_duty * mod_factor_heavy) / (1.0 - mod_duty);
  }

  void validate() const;

  /// Solves the base-distribution parameters so the marginal (phase-mixed)
  /// distribution meets the configured quantile targets (lognormal family).
  void calibrate();

  /// Phase factor for a leaf at a point in time.
  double phase_factor(std::uint64_t seed, NodeId leaf, SimTime t) const;

  /// Base draw (no phase factor), addressed by (seed, query, leaf).
  double base_sample_us(std::uint64_t seed, QueryId q, NodeId leaf) const;

  /// Service demand at base frequency for one sub-request. Evaluated at the
  /// query arrival time so the demand is identical across policies.
  SimTime demand_us(std::uint64_t seed, QueryId q, NodeId leaf, SimTime arrival) const;

  /// Mean of the marginal demand distribution (for load/utilization math).
  double marginal_mean_us() const;
};

/// One user query fanned out to fan_out distinct leaves.
struct Query {
  QueryId id = 0;
  SimTime arrival_us = 0;
  NodeId parent = 0;
  std::vector<NodeId> leaves;
  SimTime deadline_us = 0;  // arrival + request + compute + reply budgets
  std::uint32_t replies_received = 0;
  bool dropped = false;     // deadline passed with replies outstanding
  bool counted = false;     // inside the measurement window
};

/// One leg of a query at one leaf, with its timestamps and slack bookkeeping.
struct SubRequest {
  QueryId query = 0;
  NodeId leaf = 0;
  SimTime ts_sent = 0;
  SimTime ts_arrived_leaf = 0;
  SimTime ts_service_start = 0;
  SimTime ts_service_end = 0;
  SimTime ts_reply_arrived = 0;
  bool ecn_seen = false;
  bool retransmitted = false;
  DurUs request_slack_us = 0;
  DurUs queuing_slack_us = 0;
  double slowdown = 0;
  int granted_state = -1;
  SimTime service_demand_us = 0;  // at base frequency
  SimTime edf_key = 0;
  std::uint32_t reply_bytes = 0;
};

/// Poisson arrival times over [0, duration) at load_fraction * peak_qps.
std::vector<SimTime> generate_arrivals(double load_fraction, SimTime duration_us,
                                       double peak_qps, RngStream rng);

/// Uniform parent choice plus fan_out distinct leaves excluding the parent.
void assign_roles(const ClusterSpec& spec, std::uint64_t seed, QueryId q, NodeId* parent,
                  std::vector<NodeId>* leaves);

/// Reply size for one leg, uniform in [lo, hi] bytes.
std::uint32_t reply_size_bytes(std::uint64_t seed, QueryId q, NodeId leaf, std::uint32_t lo,
                               std::uint32_t hi);

}  // namespace tailsim
