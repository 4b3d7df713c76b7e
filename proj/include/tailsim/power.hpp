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
#include <vector>

#include "tailsim/time.hpp"

namespace tailsim {

/// Discrete per-core frequency states with their active power, plus idle
/// power and the actuation latency of a state change.
///
/// Service time at state f is demand * (f_base / f)^alpha, where f_base is
/// the fastest state. alpha < 1 models memory-bound work that does not scale
/// 1:1 with core clock.
struct PowerCurve {
  struct State {
    double ghz;
    double active_w;
  };
  std::vector<State> states;  // ascending frequency; last entry is base
  double idle_w = 2.0;
  SimTime actuation_us = 1000;
  double alpha = 1.0;

  void validate() const;

  int base_state() const { return static_cast<int>(states.size()) - 1; }
  double base_ghz() const { return states.back().ghz; }
  double ghz(int ix) const { return states[static_cast<std::size_t>(ix)].ghz; }
  double active_w_at(int ix) const { return states[static_cast<std::size_t>(ix)].active_w; }

  /// Service-time stretch factor of state ix relative to the base state.
  double stretch(int ix) const;

  /// Slowest state whose implied service-time stretch does not exceed the
  /// granted slowdown: minimal f with (f_base/f)^alpha - 1 <= slowdown.
  int select_state(double slowdown) const;

  /// demand (at base frequency) scaled to state ix.
  SimTime scaled_service_time(SimTime demand_us, int ix) const;

  /// Demand-seconds processed per wall second at state ix.
  double service_rate(int ix) const { return 1.0 / stretch(ix); }
};

/// Per-core energy integration over disjoint busy/idle intervals.
class EnergyAccumulator {
 public:
  EnergyAccumulator() = default;
  EnergyAccumulator(std::size_t n_cores, const PowerCurve* curve)
      : joules_(n_cores, 0.0), last_end_(n_cores, 0), curve_(curve) {}

  /// Adds (busy ? active_power(state) : idle_power) * (t1 - t0) for one core.
  /// Intervals for a core must tile its timeline; overlaps are fatal.
  double add(std::size_t core, SimTime t0, SimTime t1, bool busy, int state_ix);

  double core_joules(std::size_t core) const { return joules_[core]; }
  double total_joules() const;
  std::size_t cores() const { return joules_.size(); }

 private:
  std::vector<double> joules_;
  std::vector<SimTime> last_end_;
  const PowerCurve* curve_ = nullptr;
};

}  // namespace tailsim
