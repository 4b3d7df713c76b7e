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

#include "tailsim/workload.hpp"

#include <algorithm>
#include <cmath>

namespace tailsim {

namespace {

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Standard normal quantile (Acklam's rational approximation, refined by one
// Newton step on the CDF). Good to ~1e-12 for our purposes.
double norm_ppf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  double q, r, x;
  if (p < 0.02425) {
    q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (p <= 0.97575) {
    q = p - 0.5;
    r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    q = std::sqrt(-2 * std::log(1 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double e = norm_cdf(x) - p;
  x -= e * std::sqrt(2 * M_PI) * std::exp(x * x / 2);
  return x;
}

}  // namespace

void ServiceTimeModel::validate() const {
  if (family == Family::EmpiricalTable && table.size() < 2)
    throw std::invalid_argument("empirical service table needs >= 2 points");
  if (family == Family::ShiftedExp && mean_us <= shift_us)
    throw std::invalid_argument("shifted-exp mean must exceed the shift");
  if (mod_duty < 0 || mod_duty >= 1)
    throw std::invalid_argument("modulation duty outside [0,1)");
  if (mod_duty > 0) {
    if (mod_factor_heavy <= 1.0)
      throw std::invalid_argument("modulation heavy factor must exceed 1");
    if (factor_light() <= 0)
      throw std::invalid_argument("modulation duty*factor too large (light factor <= 0)");
  }
  if (base_frequency_ghz <= 0) throw std::invalid_argument("base frequency must be positive");
}

void ServiceTimeModel::calibrate() {
  validate();
  if (family != Family::Lognormal) return;
  if (q_hi_us <= q_lo_us || q_hi_p <= q_lo_p)
    throw std::invalid_argument("quantile targets must be increasing");

  double z_lo = norm_ppf(q_lo_p);
  double z_hi = norm_ppf(q_hi_p);

  if (mod_duty <= 0) {
    sigma_log = std::log(q_hi_us / q_lo_us) / (z_hi - z_lo);
    mu_log = std::log(q_lo_us) - z_lo * sigma_log;
    return;
  }

  // Marginal CDF is a two-phase mixture:
  //   F(x) = duty * Phi((ln(x/fh) - mu)/sigma) + (1-duty) * Phi((ln(x/fl) - mu)/sigma)
  // Solve (mu, sigma) so F(q_lo_us) = q_lo_p and F(q_hi_us) = q_hi_p by
  // bisection: for fixed sigma, mu is monotone in F(q_hi); the implied
  // F(q_lo) is then monotone in sigma.
  double fh = mod_factor_heavy, fl = factor_light(), d = mod_duty;
  auto mix_cdf = [&](double x, double mu, double sig) {
    return d * norm_cdf((std::log(x / fh) - mu) / sig) +
           (1 - d) * norm_cdf((std::log(x / fl) - mu) / sig);
  };
  auto solve_mu = [&](double sig) {
    double lo = std::log(q_hi_us) - 12 * sig - 4, hi = std::log(q_hi_us) + 4;
    for (int i = 0; i < 80; ++i) {
      double mid = 0.5 * (lo + hi);
      if (mix_cdf(q_hi_us, mid, sig) > q_hi_p) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  double s_lo = 1e-3, s_hi = 3.0;
  for (int i = 0; i < 80; ++i) {
    double s = 0.5 * (s_lo + s_hi);
    double mu = solve_mu(s);
    // Larger sigma widens the distribution, pushing more mass below q_lo.
    if (mix_cdf(q_lo_us, mu, s) < q_lo_p) s_lo = s; else s_hi = s;
  }
  sigma_log = 0.5 * (s_lo + s_hi);
  mu_log = solve_mu(sigma_log);
}

double ServiceTimeModel::phase_factor(std::uint64_t seed, NodeId leaf, SimTime t) const {
  if (mod_duty <= 0) return 1.0;
  SimTime offset = hash_draw(seed, "phase", leaf) % mod_cycle_us;
  SimTime pos = (t + offset) % mod_cycle_us;
  bool heavy = static_cast<double>(pos) < mod_duty * static_cast<double>(mod_cycle_us);
  return heavy ? mod_factor_heavy : factor_light();
}

double ServiceTimeModel::base_sample_us(std::uint64_t seed, QueryId q, NodeId leaf) const {
  switch (family) {
    case Family::Lognormal: {
      double z = hash_normal(seed, "svc", q, leaf + 1);
      return std::exp(mu_log + sigma_log * z);
    }
    case Family::ShiftedExp: {
      double u = hash_u01(seed, "svc", q, leaf + 1);
      return shift_us - (mean_us - shift_us) * std::log1p(-u);
    }
    case Family::EmpiricalTable: {
      double u = hash_u01(seed, "svc", q, leaf + 1);
      auto it = std::lower_bound(table.begin(), table.end(), u,
                                 [](const auto& row, double p) { return row.first < p; });
      if (it == table.begin()) return table.front().second;
      if (it == table.end()) return table.back().second;
      auto prev = it - 1;
      double span = it->first - prev->first;
      double w = span > 0 ? (u - prev->first) / span : 0.0;
      return prev->second + w * (it->second - prev->second);
    }
  }
  return 0;
}

SimTime ServiceTimeModel::demand_us(std::uint64_t seed, QueryId q, NodeId leaf,
                                    SimTime arrival) const {
  double v = base_sample_us(seed, q, leaf) * phase_factor(seed, leaf, arrival);
  SimTime us = static_cast<SimTime>(std::llround(v));
  return us > 0 ? us : 1;
}

double ServiceTimeModel::marginal_mean_us() const {
  double base = 0;
  switch (family) {
    case Family::Lognormal:
      base = std::exp(mu_log + sigma_log * sigma_log / 2);
      break;
    case Family::ShiftedExp:
      base = mean_us;
      break;
    case Family::EmpiricalTable: {
      // Trapezoidal mean of the inverse CDF.
      double m = 0;
      for (std::size_t i = 1; i < table.size(); ++i) {
        m += (table[i].first - table[i - 1].first) * 0.5 *
             (table[i].second + table[i - 1].second);
      }
      base = m;
      break;
    }
  }
  // Phase factor has unit mean by construction.
  return base;
}

std::vector<SimTime> generate_arrivals(double load_fraction, SimTime duration_us,
                                       double peak_qps, RngStream rng) {
  if (load_fraction <= 0 || load_fraction > 1)
    throw std::invalid_argument("load fraction outside (0,1]");
  double mean_gap_us = 1e6 / (load_fraction * peak_qps);
  std::vector<SimTime> out;
  out.reserve(static_cast<std::size_t>(duration_us / mean_gap_us * 1.1) + 16);
  double t = 0;
  for (;;) {
    t += rng.expo(mean_gap_us);
    if (t >= static_cast<double>(duration_us)) break;
    out.push_back(static_cast<SimTime>(t));
  }
  return out;
}

void assign_roles(const ClusterSpec& spec, std::uint64_t seed, QueryId q, NodeId* parent,
                  std::vector<NodeId>* leaves) {
  std::uint32_t n = spec.nodes();
  RngStream rng(seed, "fanout");
  rng = rng.sub(q);
  *parent = static_cast<NodeId>(rng.below(n));
  // Partial Fisher-Yates over the candidate set (all nodes except the parent).
  std::vector<NodeId> pool;
  pool.reserve(n - 1);
  for (NodeId i = 0; i < n; ++i)
    if (i != *parent) pool.push_back(i);
  leaves->clear();
  leaves->reserve(spec.fan_out);
  for (std::uint32_t i = 0; i < spec.fan_out; ++i) {
    std::uint32_t j = i + static_cast<std::uint32_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    leaves->push_back(pool[i]);
  }
}

std::uint32_t reply_size_bytes(std::uint64_t seed, QueryId q, NodeId leaf, std::uint32_t lo,
                               std::uint32_t hi) {
  double u = hash_u01(seed, "replysz", q, leaf + 1);
  return lo + static_cast<std::uint32_t>(u * static_cast<double>(hi - lo + 1));
}

}  // namespace tailsim
