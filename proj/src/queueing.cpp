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

#include "tailsim/queueing.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace tailsim {

double erlang_b(int k, double offered_load) {
  if (k < 0) throw std::invalid_argument("erlang_b: k < 0");
  double b = 1.0;
  for (int n = 1; n <= k; ++n) {
    b = offered_load * b / (n + offered_load * b);
  }
  return b;
}

double erlang_c(int k, double rho) {
  if (k < 1) throw std::invalid_argument("erlang_c: k < 1");
  if (rho < 0.0 || rho >= 1.0) throw std::invalid_argument("erlang_c: rho outside [0,1)");
  double a = k * rho;
  double b = erlang_b(k, a);
  return b / (1.0 - rho * (1.0 - b));
}

double erlang_wait_factor(int k, double rho) {
  if (rho == 0.0) return 1.0;
  return 1.0 + erlang_c(k, rho) / (k * (1.0 - rho));
}

double p99_of_sum_mc(SumDist dist, double p, std::size_t n, RngStream rng) {
  if (n == 0) throw std::invalid_argument("p99_of_sum_mc: empty sample");
  std::vector<double> x(n), s(n);
  for (std::size_t i = 0; i < n; ++i) {
    double a = 1.0, b = 1.0;
    switch (dist) {
      case SumDist::Exponential:
        a = rng.expo(1.0);
        b = rng.expo(1.0);
        break;
      case SumDist::Deterministic:
        a = 1.0;
        b = 1.0;
        break;
    }
    x[i] = a;
    s[i] = a + b;
  }
  auto nearest_rank = [p](std::vector<double>& v) {
    std::size_t rank = static_cast<std::size_t>(std::ceil(p * v.size()));
    if (rank == 0) rank = 1;
    std::nth_element(v.begin(), v.begin() + (rank - 1), v.end());
    return v[rank - 1];
  };
  double px = nearest_rank(x);
  double ps = nearest_rank(s);
  return ps / px;
}

}  // namespace tailsim
