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

#include "tailsim/rng.hpp"

namespace tailsim {

/// Erlang-B blocking probability for k servers at offered load a, via the
/// standard numerically stable recursion.
double erlang_b(int k, double offered_load);

/// Erlang-C probability that an arrival waits in an M/M/k queue.
double erlang_c(int k, double rho);

/// Ratio of mean response time to mean service time for an M/M/k queue:
/// 1 + C(k, k*rho) / (k * (1 - rho)).
double erlang_wait_factor(int k, double rho);

enum class SumDist { Exponential, Deterministic };

/// Monte Carlo estimate of percentile(X+Y, p) / percentile(X, p) for iid X, Y.
double p99_of_sum_mc(SumDist dist, double p, std::size_t n, RngStream rng);

}  // namespace tailsim
