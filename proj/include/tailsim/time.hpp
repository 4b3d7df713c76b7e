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

namespace tailsim {

/// Simulation clock value, microseconds since simulation start.
/// Integer microseconds resolve 20 us link hops and 1 ms jitter exactly and
/// keep event ordering free of floating-point drift.
using SimTime = std::uint64_t;

/// Signed duration in microseconds (slacks, budgets, differences).
using DurUs = std::int64_t;

constexpr SimTime kUsPerMs = 1000;
constexpr SimTime kUsPerSec = 1000 * 1000;

constexpr SimTime ms_to_us(double ms) {
  return static_cast<SimTime>(ms * 1000.0 + 0.5);
}

constexpr SimTime sec_to_us(double s) {
  return static_cast<SimTime>(s * 1e6 + 0.5);
}

constexpr double us_to_ms(SimTime us) { return static_cast<double>(us) / 1000.0; }
constexpr double us_to_sec(SimTime us) { return static_cast<double>(us) / 1e6; }

/// max(0, a - b) for unsigned clock values.
constexpr SimTime sat_sub(SimTime a, SimTime b) { return a > b ? a - b : 0; }

}  // namespace tailsim
