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

#include <deque>
#include <functional>
#include <map>
#include <vector>

#include "tailsim/policy.hpp"
#include "tailsim/power.hpp"
#include "tailsim/sim.hpp"
#include "tailsim/workload.hpp"

namespace tailsim {

/// A leaf server: request admission with timestamping, an EDF or FIFO queue
/// over a pool of service contexts grouped two per core, per-request slowdown
/// application subject to the worst-of-contexts core rule, and per-core
/// energy integration.
///
/// Requests are never preempted. The EDF key is
///   ts_arrived_leaf + compute budget + request slack
/// so zero-slack requests sort first without any cross-node clock agreement.
class LeafServer {
 public:
  using CompleteFn = std::function<void(SubRequest*)>;

  LeafServer(Simulation* sim, NodeId id, std::uint32_t contexts, const PowerCurve* curve,
             const PolicyConfig* policy, const BudgetSet* budgets,
             EnergyAccumulator* energy, std::size_t core_base, CompleteFn on_complete);

  /// Timestamps arrival, computes the request slack from the flow's congestion
  /// signals, and either dispatches to an idle context or enqueues.
  void admit(SubRequest* sub);

  /// Head of the pending queue under the active discipline (nullptr if none).
  SubRequest* peek_next() const;

  bool edf() const { return policy_->edf && policy_->kind == PolicyKind::TimeTrader; }

  std::uint32_t contexts() const { return static_cast<std::uint32_t>(ctxs_.size()); }
  std::uint32_t cores() const { return static_cast<std::uint32_t>(cores_.size()); }
  std::size_t core_base() const { return core_base_; }
  NodeId id() const { return id_; }

  double scale() const { return scale_; }
  void set_scale(double s) { scale_ = s; }
  SimTime avg_peak_wait_us() const { return avg_peak_wait_us_; }
  void set_avg_peak_wait(SimTime w) { avg_peak_wait_us_ = w; }

  /// Pegasus: pin every core to one state (with the usual actuation latency).
  void set_uniform_state(int state_ix);
  int core_state(std::uint32_t core_ix) const { return cores_[core_ix].cur_state; }

  /// Reply outcome feedback for the missed-deadline window.
  void note_reply(bool missed) {
    ++window_replies_;
    if (missed) ++window_missed_;
  }
  /// One control-interval tick: adapts scale against the miss target.
  void control_tick();

  /// Closes all open energy segments up to `now` (window boundaries, run end).
  void flush_energy(SimTime now);

  // Wait bookkeeping for calibration (enabled inside the measurement window).
  void set_stats_enabled(bool on) { stats_enabled_ = on; }
  double mean_wait_us() const {
    return wait_n_ ? wait_sum_us_ / static_cast<double>(wait_n_) : 0.0;
  }
  std::uint64_t dispatch_count() const { return wait_n_; }

 private:
  struct Ctx {
    bool busy = false;
    SubRequest* sub = nullptr;
    double granted_slowdown = 0;
    double remaining_demand_us = 0;
    SimTime last_advance = 0;
    std::uint32_t core = 0;
    std::uint64_t gen = 0;
  };
  struct Core {
    int cur_state = 0;
    int pending_state = -1;  // -1: no transition in progress
    std::uint32_t busy_ctx = 0;
    std::uint64_t gen = 0;
    SimTime seg_start = 0;
    bool seg_busy = false;
    int seg_state = 0;
  };

  void dispatch(SubRequest* sub, std::uint32_t ctx_ix);
  void complete(std::uint32_t ctx_ix);
  void reschedule_completion(std::uint32_t ctx_ix);
  void advance_core(std::uint32_t core_ix);
  void set_core_target(std::uint32_t core_ix, int desired);
  void decide_core_state(std::uint32_t core_ix);
  void energy_boundary(std::uint32_t core_ix);
  int pick_idle_context() const;

  Simulation* sim_;
  NodeId id_;
  const PowerCurve* curve_;
  const PolicyConfig* policy_;
  const BudgetSet* budgets_;
  EnergyAccumulator* energy_;
  std::size_t core_base_;
  CompleteFn on_complete_;

  std::vector<Ctx> ctxs_;
  std::vector<Core> cores_;
  std::map<std::pair<SimTime, std::uint64_t>, SubRequest*> edf_queue_;
  std::deque<SubRequest*> fifo_queue_;
  std::uint64_t admit_seq_ = 0;

  double scale_ = 0;
  SimTime avg_peak_wait_us_ = 0;
  std::uint64_t window_replies_ = 0, window_missed_ = 0;

  bool stats_enabled_ = false;
  double wait_sum_us_ = 0;
  std::uint64_t wait_n_ = 0;

  // Pegasus uniform target, mirrored here so freshly-busy cores follow it.
  int uniform_state_ = -1;
};

}  // namespace tailsim
