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

#include <cstdio>
#include <deque>
#include <memory>
#include <optional>

#include "tailsim/config.hpp"
#include "tailsim/leaf.hpp"
#include "tailsim/metrics.hpp"
#include "tailsim/network.hpp"

namespace tailsim {

/// One simulation instance: cluster + workload + network + policy, run for
/// warmup plus a measurement window. Single-threaded; owns all state.
class Experiment {
 public:
  Experiment(ExperimentConfig cfg, const Calibration* calibration);
  ~Experiment();

  /// Simulates and returns the summary. Deterministic per (config, seed).
  RunSummary run();

  /// Runs and extracts calibration artifacts (caller selects baseline @ 0.9).
  Calibration calibrate();

  /// Baseline energy for the same seed, used to fill savings_frac.
  void set_baseline_energy(double joules) { baseline_energy_j_ = joules; }

  const ExperimentConfig& config() const { return cfg_; }

 private:
  struct QueryRec {
    Query q;
    std::vector<SubRequest> subs;
    std::uint32_t slot = 0;
    bool deadline_passed = false;
  };

  void build();
  void schedule_arrivals();
  void schedule_background();
  void schedule_controllers();
  void on_query_arrival(SimTime t, QueryId qid);
  void on_request_delivered(Flow& f);
  void on_service_complete(SubRequest* sub);
  void on_reply_delivered(Flow& f);
  void on_query_deadline(QueryId qid);
  void maybe_free_query(QueryId qid);
  void pegasus_step();
  void window_open();
  void window_close();
  QueryRec& rec(QueryId qid) { return arena_[slot_of_[qid]]; }

  ExperimentConfig cfg_;
  const Calibration* calib_;
  Simulation sim_;
  std::unique_ptr<FatTree> net_;
  std::deque<LeafServer> leaves_;
  PowerCurve curve_;
  EnergyAccumulator energy_;

  // Query arena with slot reuse; queries live until resolved.
  std::deque<QueryRec> arena_;
  std::vector<std::uint32_t> slot_of_;
  std::vector<std::uint32_t> free_slots_;

  // Timing.
  SimTime window_start_ = 0, window_end_ = 0, run_end_ = 0;
  double mean_demand_us_ = 0;

  // Pegasus.
  PegasusState pegasus_;

  // Window statistics.
  std::uint64_t issued_ = 0, completed_ = 0, missed_q_ = 0;
  std::uint64_t replies_seen_ = 0, replies_late_ = 0;
  std::vector<SimTime> total_us_, reqleg_us_, leafresp_us_;
  std::vector<std::uint64_t> state_hist_;
  std::uint64_t clean_requests_ = 0, slack_quarter_ = 0;
  double slack_sum_us_ = 0, wait_sum_us_ = 0;
  std::uint64_t sub_count_ = 0;
  double energy_at_open_ = 0, energy_at_close_ = 0;
  double access_busy_at_open_ = 0, access_busy_at_close_ = 0;
  double baseline_energy_j_ = -1;

  std::FILE* request_log_ = nullptr;
  std::FILE* flow_log_ = nullptr;
  std::FILE* trace_ = nullptr;
};

/// Convenience wrappers used by the CLI and the test suites.
RunSummary run_experiment(const ExperimentConfig& cfg, const Calibration* calibration,
                          double baseline_energy_j = -1);
Calibration calibrate_peak(ExperimentConfig cfg);

/// Single-leaf queueing harness (no network): Poisson arrivals into k service
/// contexts. Returns mean response / mean service for comparison against the
/// Erlang-C oracle, and the mean wait for M/D/1 style checks.
struct MmkResult {
  double mean_response_us = 0;
  double mean_service_us = 0;
  double mean_wait_us = 0;
  double ratio = 0;
};
MmkResult simulate_mmk(int contexts, double rho, double mean_service_us,
                       std::uint64_t arrivals, std::uint64_t seed,
                       bool deterministic_service = false);

/// Analytic/oracle validation suite (CLI `validate`). Prints one line per
/// check; returns the number of failures.
int run_validation_suite(std::FILE* out);

}  // namespace tailsim
