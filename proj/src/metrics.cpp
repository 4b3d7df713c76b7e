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

#include "tailsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tailsim {

namespace {

template <typename T>
T nearest_rank(std::vector<T>& v, double p) {
  if (v.empty()) throw std::invalid_argument("percentile of empty sample set");
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("percentile p outside (0,1)");
  std::size_t rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
  if (rank == 0) rank = 1;
  if (rank > v.size()) rank = v.size();
  std::nth_element(v.begin(), v.begin() + (rank - 1), v.end());
  return v[rank - 1];
}

std::string fmt(double v) {
  char buf[40];
  if (std::isnan(v)) return "nan";
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

double percentile(std::vector<double> samples, double p) { return nearest_rank(samples, p); }

SimTime percentile_us(std::vector<SimTime> samples, double p) { return nearest_rank(samples, p); }

LatencyPercentiles latency_percentiles_ms(const std::vector<SimTime>& us) {
  LatencyPercentiles out;
  if (us.empty()) return out;
  std::vector<SimTime> v = us;
  out.p50 = us_to_ms(nearest_rank(v, 0.50));
  out.p90 = us_to_ms(nearest_rank(v, 0.90));
  out.p99 = us_to_ms(nearest_rank(v, 0.99));
  out.p999 = us_to_ms(nearest_rank(v, 0.999));
  return out;
}

std::string summary_csv_header(const RunSummary& s) {
  std::string h =
      "policy,benchmark,load,seed,queries,completed,dropped,miss_reply_frac,"
      "miss_query_frac,p50_total_ms,p90_total_ms,p99_total_ms,p999_total_ms,"
      "energy_J,savings_frac";
  for (double g : s.state_ghz) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ",frac_%.1fGHz", g);
    h += buf;
  }
  h += "\n";
  return h;
}

std::string summary_csv_row(const RunSummary& s) {
  std::string r;
  r += s.policy + "," + s.benchmark + "," + fmt(s.load) + "," + std::to_string(s.seed) + ",";
  r += std::to_string(s.queries) + "," + std::to_string(s.completed) + "," +
       std::to_string(s.dropped) + ",";
  r += fmt(s.miss_reply_frac) + "," + fmt(s.miss_query_frac) + ",";
  r += fmt(s.total.p50) + "," + fmt(s.total.p90) + "," + fmt(s.total.p99) + "," +
       fmt(s.total.p999) + ",";
  r += fmt(s.energy_j) + "," + fmt(s.savings_frac);
  for (double f : s.state_frac) r += "," + fmt(f);
  r += "\n";
  return r;
}

std::string summary_json(const RunSummary& s) {
  std::string j = "{";
  auto kv = [&j](const char* k, const std::string& v, bool quote = false, bool last = false) {
    j += "\"";
    j += k;
    j += "\":";
    if (quote) j += "\"";
    j += v;
    if (quote) j += "\"";
    if (!last) j += ",";
  };
  kv("policy", s.policy, true);
  kv("benchmark", s.benchmark, true);
  kv("load", fmt(s.load));
  kv("seed", std::to_string(s.seed));
  kv("queries", std::to_string(s.queries));
  kv("completed", std::to_string(s.completed));
  kv("dropped", std::to_string(s.dropped));
  kv("miss_reply_frac", fmt(s.miss_reply_frac));
  kv("miss_query_frac", fmt(s.miss_query_frac));
  kv("p50_total_ms", fmt(s.total.p50));
  kv("p90_total_ms", fmt(s.total.p90));
  kv("p99_total_ms", fmt(s.total.p99));
  kv("p999_total_ms", fmt(s.total.p999));
  kv("p99_request_leg_ms", fmt(s.request_leg.p99));
  kv("p99_leaf_response_ms", fmt(s.leaf_response.p99));
  kv("p50_leaf_response_ms", fmt(s.leaf_response.p50));
  kv("energy_J", fmt(s.energy_j));
  kv("savings_frac", std::isnan(s.savings_frac) ? std::string("null") : fmt(s.savings_frac));
  kv("clean_request_frac", fmt(s.clean_request_frac));
  kv("access_utilization", fmt(s.access_utilization));
  kv("mean_leaf_wait_ms", fmt(s.mean_leaf_wait_ms));
  kv("mean_total_slack_ms", fmt(s.mean_total_slack_ms));
  kv("frac_slack_ge_quarter_budget", fmt(s.frac_slack_ge_quarter_budget));
  kv("in_flight_end", std::to_string(s.in_flight_end));
  j += "\"state_ghz\":[";
  for (std::size_t i = 0; i < s.state_ghz.size(); ++i) {
    j += fmt(s.state_ghz[i]);
    if (i + 1 < s.state_ghz.size()) j += ",";
  }
  j += "],\"state_frac\":[";
  for (std::size_t i = 0; i < s.state_frac.size(); ++i) {
    j += fmt(s.state_frac[i]);
    if (i + 1 < s.state_frac.size()) j += ",";
  }
  j += "]}";
  return j;
}

}  // namespace tailsim
