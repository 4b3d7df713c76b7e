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

#include "tailsim/power.hpp"

#include <cmath>

namespace tailsim {

void PowerCurve::validate() const {
  if (states.size() < 2) throw std::invalid_argument("power curve needs >= 2 states");
  for (std::size_t i = 1; i < states.size(); ++i) {
    if (states[i].ghz <= states[i - 1].ghz)
      throw std::invalid_argument("power curve frequencies must be strictly increasing");
    if (states[i].active_w <= states[i - 1].active_w)
      throw std::invalid_argument("active power must increase with frequency");
  }
  if (idle_w >= states.front().active_w)
    throw std::invalid_argument("idle power must be below the lowest active power");
  if (alpha <= 0) throw std::invalid_argument("alpha must be positive");
}

double PowerCurve::stretch(int ix) const {
  return std::pow(base_ghz() / ghz(ix), alpha);
}

int PowerCurve::select_state(double slowdown) const {
  if (slowdown < 0) throw std::invalid_argument("negative slowdown");
  for (int ix = 0; ix < base_state(); ++ix) {
    if (stretch(ix) - 1.0 <= slowdown) return ix;
  }
  return base_state();
}

SimTime PowerCurve::scaled_service_time(SimTime demand_us, int ix) const {
  return static_cast<SimTime>(std::llround(static_cast<double>(demand_us) * stretch(ix)));
}

double EnergyAccumulator::add(std::size_t core, SimTime t0, SimTime t1, bool busy,
                              int state_ix) {
  if (t1 < t0) throw std::invalid_argument("energy interval ends before it starts");
  if (t0 < last_end_[core])
    throw std::logic_error("overlapping energy intervals for one core");
  last_end_[core] = t1;
  double watts = busy ? curve_->active_w_at(state_ix) : curve_->idle_w;
  double j = watts * us_to_sec(t1 - t0);
  joules_[core] += j;
  return j;
}

double EnergyAccumulator::total_joules() const {
  double s = 0;
  for (double j : joules_) s += j;
  return s;
}

}  // namespace tailsim
