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
#include <string>
#include <vector>

#include "tailsim/network.hpp"
#include "tailsim/policy.hpp"
#include "tailsim/power.hpp"
#include "tailsim/workload.hpp"

namespace tailsim {

struct WorkloadConfig {
  ServiceTimeModel service;
  std::uint32_t request_bytes = 2048;
  std::uint32_t reply_bytes_lo = 16 << 10;
  std::uint32_t reply_bytes_hi = 64 << 10;
  double bg_size_mb_a = 1.0;   // background flow sizes, equally likely
  double bg_size_mb_b = 10.0;
  double target_net_utilization = 0.20;  // server access links
};

struct RunConfig {
  double duration_s = 60.0;
  double warmup_s = 5.0;
  std::uint64_t seed = 1;
  double load = 0.9;
  std::string out_path;
  std::string request_log_path;
  std::string flow_log_path;
  bool trace = false;
  std::string calibration_path;
};

/// Everything a single simulation instance needs. Schema-validated before any
/// simulation state is built.
struct ExperimentConfig {
  ClusterSpec cluster;
  WorkloadConfig workload;
  NetworkConfig network;
  PowerCurve power;
  PolicyConfig policy;
  RunConfig run;

  void validate() const;
};

/// Calibration artifacts produced by a baseline run at 90% load.
struct Calibration {
  std::vector<SimTime> avg_peak_wait_us;  // per leaf
  SimTime median_net_latency_us = 0;
  SimTime p99_compute_us = 0;       // wait + service at the leaf
  SimTime p99_request_leg_us = 0;
  bool compute_budget_ok = true;
  bool request_budget_ok = true;
  std::string report;
};

/// Parses a config file (single documented JSON schema; unknown keys are
/// rejected). Throws std::runtime_error with a message naming the bad field.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& cfg);

Calibration load_calibration(const std::string& path);
void save_calibration(const Calibration& c, const std::string& path);

}  // namespace tailsim
