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

// tailsim: datacenter OLDI cluster simulator.
//
//   tailsim simulate --config c.json --policy timetrader --load 0.9 --seed 1
//                    --duration 20 --out run.csv [--calibration calib.json]
//   tailsim calibrate --config c.json [--out calib.json]
//   tailsim validate
//
// Exit codes: 0 success, 1 config error, 2 oracle/acceptance failure.

#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "tailsim/experiment.hpp"

using namespace tailsim;

namespace {

int cmd_simulate(const std::string& config_path, const std::string& policy, double load,
                 long long seed, double duration, const std::string& out,
                 const std::string& calibration_path, const std::string& baseline_path,
                 const std::string& request_log, const std::string& flow_log, bool trace,
                 double warmup) {
  ExperimentConfig cfg = load_config(config_path);
  if (!policy.empty()) cfg.policy.kind = policy_kind_from_string(policy);
  if (load > 0) cfg.run.load = load;
  if (seed >= 0) cfg.run.seed = static_cast<std::uint64_t>(seed);
  if (duration > 0) cfg.run.duration_s = duration;
  if (warmup >= 0) cfg.run.warmup_s = warmup;
  if (!out.empty()) cfg.run.out_path = out;
  if (!request_log.empty()) cfg.run.request_log_path = request_log;
  if (!flow_log.empty()) cfg.run.flow_log_path = flow_log;
  if (trace) cfg.run.trace = true;
  if (!calibration_path.empty()) cfg.run.calibration_path = calibration_path;

  Calibration calib;
  const Calibration* calib_ptr = nullptr;
  if (!cfg.run.calibration_path.empty()) {
    calib = load_calibration(cfg.run.calibration_path);
    calib_ptr = &calib;
  }

  double baseline_energy = -1;
  if (!baseline_path.empty()) {
    std::ifstream in(baseline_path);
    if (!in) {
      std::cerr << "cannot open baseline summary: " << baseline_path << "\n";
      return 1;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto pos = text.find("\"energy_J\":");
    if (pos == std::string::npos) {
      std::cerr << "baseline summary has no energy_J field\n";
      return 1;
    }
    baseline_energy = std::strtod(text.c_str() + pos + 11, nullptr);
  }

  RunSummary s = run_experiment(cfg, calib_ptr, baseline_energy);

  std::string csv = summary_csv_header(s) + summary_csv_row(s);
  std::string json = summary_json(s);
  if (cfg.run.out_path.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    std::ofstream o(cfg.run.out_path);
    if (!o) {
      std::cerr << "cannot write " << cfg.run.out_path << "\n";
      return 1;
    }
    o << csv;
    std::ofstream oj(cfg.run.out_path + ".json");
    oj << json << "\n";
  }
  return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& out) {
  ExperimentConfig cfg = load_config(config_path);
  Calibration c = calibrate_peak(cfg);
  std::string path = out.empty() ? config_path + ".calibration.json" : out;
  save_calibration(c, path);
  std::printf("%s\n", c.report.c_str());
  std::printf("calibration written to %s\n", path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tailsim: OLDI datacenter energy/latency simulator"};
  app.require_subcommand(1);

  std::string config_path, policy, out, calibration_path, baseline_path;
  std::string request_log, flow_log;
  double load = -1, duration = -1, warmup = -1;
  long long seed = -1;
  bool trace = false;

  auto* sim = app.add_subcommand("simulate", "run one experiment");
  sim->add_option("--config", config_path, "config file (JSON)")->required();
  sim->add_option("--policy", policy, "baseline|pegasus|timetrader");
  sim->add_option("--load", load, "load fraction of peak_qps");
  sim->add_option("--seed", seed, "random seed");
  sim->add_option("--duration", duration, "measurement window, seconds");
  sim->add_option("--warmup", warmup, "warmup, seconds (excluded from stats)");
  sim->add_option("--out", out, "summary CSV path (JSON mirror written alongside)");
  sim->add_option("--calibration", calibration_path, "calibration artifacts (JSON)");
  sim->add_option("--baseline", baseline_path,
                  "same-seed baseline summary JSON, enables savings_frac");
  sim->add_option("--log-requests", request_log, "per-request log CSV path");
  sim->add_option("--log-flows", flow_log, "per-flow log CSV path");
  sim->add_flag("--trace", trace, "dump event trace to stderr");

  auto* cal = app.add_subcommand("calibrate", "baseline run at 90% load, extract artifacts");
  cal->add_option("--config", config_path, "config file (JSON)")->required();
  cal->add_option("--out", out, "calibration output path");

  auto* val = app.add_subcommand("validate", "run the analytic oracle suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(config_path, policy, load, seed, duration, out, calibration_path,
                          baseline_path, request_log, flow_log, trace, warmup);
    }
    if (cal->parsed()) return cmd_calibrate(config_path, out);
    if (val->parsed()) {
      int failures = run_validation_suite(stdout);
      std::printf("%d failure(s)\n", failures);
      return failures ? 2 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
