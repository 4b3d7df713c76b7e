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

#include "tailsim/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "tailsim/queueing.hpp"

namespace tailsim {

namespace {
constexpr SimTime kDrainUs = 500 * kUsPerMs;  // settle time past the window
}

Experiment::Experiment(ExperimentConfig cfg, const Calibration* calibration)
    : cfg_(std::move(cfg)), calib_(calibration) {
  cfg_.validate();
  if (cfg_.policy.kind == PolicyKind::TimeTrader && !calib_)
    throw std::runtime_error("timetrader requires calibration artifacts (run `calibrate`)");
  if (calib_) cfg_.policy.median_net_latency_us = calib_->median_net_latency_us;
  if (cfg_.policy.scale_initial < 0) {
    cfg_.policy.scale_initial =
        scale_table_initial(cfg_.run.load, cfg_.cluster.benchmark == "memcached");
  }
  curve_ = cfg_.power;
  build();
}

Experiment::~Experiment() {
  if (request_log_) std::fclose(request_log_);
  if (flow_log_) std::fclose(flow_log_);
  if (trace_) std::fclose(trace_);
}

void Experiment::build() {
  const std::uint64_t seed = cfg_.run.seed;
  net_ = std::make_unique<FatTree>(&sim_, cfg_.network, cfg_.cluster.racks,
                                   cfg_.cluster.servers_per_rack, seed);
  std::uint32_t n = cfg_.cluster.nodes();
  std::uint32_t cores_per_leaf = (cfg_.cluster.leaf_threads + 1) / 2;
  energy_ = EnergyAccumulator(static_cast<std::size_t>(n) * cores_per_leaf, &curve_);
  for (std::uint32_t i = 0; i < n; ++i) {
    leaves_.emplace_back(&sim_, i, cfg_.cluster.leaf_threads, &curve_, &cfg_.policy,
                         &cfg_.cluster.budgets, &energy_,
                         static_cast<std::size_t>(i) * cores_per_leaf,
                         [this](SubRequest* sub) { on_service_complete(sub); });
    if (calib_ && !calib_->avg_peak_wait_us.empty()) {
      leaves_.back().set_avg_peak_wait(
          calib_->avg_peak_wait_us[i % calib_->avg_peak_wait_us.size()]);
    }
  }
  state_hist_.assign(curve_.states.size(), 0);
  mean_demand_us_ = cfg_.workload.service.marginal_mean_us();

  window_start_ = sec_to_us(cfg_.run.warmup_s);
  window_end_ = window_start_ + sec_to_us(cfg_.run.duration_s);
  run_end_ = window_end_ + kDrainUs;

  if (!cfg_.run.request_log_path.empty()) {
    request_log_ = std::fopen(cfg_.run.request_log_path.c_str(), "w");
    if (!request_log_) throw std::runtime_error("cannot open request log for writing");
    std::fprintf(request_log_,
                 "query_id,leaf_id,ts_sent_us,ts_arrived_us,ts_start_us,ts_end_us,"
                 "ts_reply_us,ecn,retx,req_slack_us,q_slack_us,slowdown,freq_ghz,missed\n");
  }
  if (!cfg_.run.flow_log_path.empty()) {
    flow_log_ = std::fopen(cfg_.run.flow_log_path.c_str(), "w");
    if (!flow_log_) throw std::runtime_error("cannot open flow log for writing");
    std::fprintf(flow_log_, "flow_id,kind,size,start_us,end_us,ecn,retransmitted\n");
    net_->set_flow_log(flow_log_);
  }
  if (cfg_.run.trace) sim_.set_trace(stderr);

  if (cfg_.policy.kind == PolicyKind::Pegasus) {
    pegasus_.state_ix = curve_.base_state();
    for (LeafServer& l : leaves_) l.set_uniform_state(pegasus_.state_ix);
  }

  schedule_arrivals();
  schedule_background();
  schedule_controllers();
  sim_.schedule_at(window_start_, "win", [this] { window_open(); });
  sim_.schedule_at(window_end_, "win", [this] { window_close(); });
}

void Experiment::schedule_arrivals() {
  RngStream arrivals(cfg_.run.seed, "arrivals");
  std::vector<SimTime> ts = generate_arrivals(cfg_.run.load, run_end_ - 100 * kUsPerMs,
                                              cfg_.cluster.peak_qps, arrivals);
  slot_of_.assign(ts.size(), UINT32_MAX);
  for (QueryId q = 0; q < ts.size(); ++q) {
    sim_.schedule_at(ts[q], "query", [this, t = ts[q], q] { on_query_arrival(t, q); });
  }
}

void Experiment::schedule_background() {
  const WorkloadConfig& w = cfg_.workload;
  if (w.target_net_utilization <= 0) return;
  double mean_reply = 0.5 * (w.reply_bytes_lo + w.reply_bytes_hi);
  double oldi_bits_per_sec = cfg_.run.load * cfg_.cluster.peak_qps * cfg_.cluster.fan_out *
                             (w.request_bytes + mean_reply) * 2.0 * 8.0;
  double access_capacity =
      2.0 * cfg_.cluster.nodes() * cfg_.network.link_gbps * 1e9;  // bits/s over all links
  double util_oldi = oldi_bits_per_sec / access_capacity;
  double gap = w.target_net_utilization - util_oldi;
  if (gap <= 0) return;
  double mean_bg_bytes = 0.5 * (w.bg_size_mb_a + w.bg_size_mb_b) * 1024 * 1024;
  double flows_per_sec = gap * access_capacity / (8.0 * 2.0 * mean_bg_bytes);
  double mean_gap_us = 1e6 / flows_per_sec;

  RngStream bg(cfg_.run.seed, "bg");
  double t = bg.expo(mean_gap_us);
  std::uint32_t n = cfg_.cluster.nodes();
  while (t < static_cast<double>(run_end_)) {
    NodeId src = static_cast<NodeId>(bg.below(n));
    NodeId dst = static_cast<NodeId>(bg.below(n - 1));
    if (dst >= src) ++dst;
    std::uint64_t bytes = static_cast<std::uint64_t>(
        (bg.u01() < 0.5 ? w.bg_size_mb_a : w.bg_size_mb_b) * 1024 * 1024);
    sim_.schedule_at(static_cast<SimTime>(t), "bgflow", [this, src, dst, bytes] {
      net_->start_flow(FlowKind::Background, src, dst, bytes, 0, 0, false, nullptr);
    });
    t += bg.expo(mean_gap_us);
  }
}

void Experiment::schedule_controllers() {
  if (cfg_.policy.kind == PolicyKind::TimeTrader) {
    for (SimTime t = cfg_.policy.control_interval_us; t < run_end_;
         t += cfg_.policy.control_interval_us) {
      sim_.schedule_at(t, "scale", [this] {
        for (LeafServer& l : leaves_) l.control_tick();
      });
    }
  }
  if (cfg_.policy.kind == PolicyKind::Pegasus) {
    for (SimTime t = cfg_.policy.pegasus_step_us; t < run_end_;
         t += cfg_.policy.pegasus_step_us) {
      sim_.schedule_at(t, "pegasus", [this] { pegasus_step(); });
    }
  }
}

void Experiment::on_query_arrival(SimTime t, QueryId qid) {
  std::uint32_t slot;
  if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(arena_.size());
    arena_.emplace_back();
  }
  slot_of_[qid] = slot;
  QueryRec& r = arena_[slot];
  r.q = Query{};
  r.deadline_passed = false;
  r.q.id = qid;
  r.q.arrival_us = t;
  assign_roles(cfg_.cluster, cfg_.run.seed, qid, &r.q.parent, &r.q.leaves);
  r.q.deadline_us = t + cfg_.cluster.budgets.deadline_us();
  r.q.counted = t >= window_start_ && t < window_end_;
  if (r.q.counted) ++issued_;
  r.subs.assign(cfg_.cluster.fan_out, SubRequest{});
  for (std::uint32_t i = 0; i < cfg_.cluster.fan_out; ++i) {
    SubRequest& s = r.subs[i];
    s.query = qid;
    s.leaf = r.q.leaves[i];
    s.ts_sent = t;
    s.service_demand_us =
        cfg_.workload.service.demand_us(cfg_.run.seed, qid, s.leaf, t);
    s.reply_bytes = reply_size_bytes(cfg_.run.seed, qid, s.leaf, cfg_.workload.reply_bytes_lo,
                                     cfg_.workload.reply_bytes_hi);
    net_->start_flow(FlowKind::Request, r.q.parent, s.leaf, cfg_.workload.request_bytes, qid,
                     i, true, [this](Flow& f) { on_request_delivered(f); });
  }
  sim_.schedule_at(r.q.deadline_us, "deadline", [this, qid] { on_query_deadline(qid); });
}

void Experiment::on_request_delivered(Flow& f) {
  QueryRec& r = rec(f.query);
  SubRequest& s = r.subs[f.sub_index];
  s.ecn_seen = f.ecn_marked;
  s.retransmitted = f.retransmitted;
  leaves_[s.leaf].admit(&s);
}

void Experiment::on_service_complete(SubRequest* sub) {
  SimTime jitter = static_cast<SimTime>(
      hash_u01(cfg_.run.seed, "jitter", sub->query, sub->leaf + 1) *
      static_cast<double>(cfg_.network.reply_jitter_us));
  QueryId qid = sub->query;
  std::uint32_t ix = static_cast<std::uint32_t>(sub - rec(qid).subs.data());
  sim_.schedule_in(jitter, "reply", [this, qid, ix] {
    QueryRec& r = rec(qid);
    SubRequest& s = r.subs[ix];
    net_->start_flow(FlowKind::Reply, s.leaf, r.q.parent, s.reply_bytes, qid, ix, true,
                     [this](Flow& f) { on_reply_delivered(f); });
  });
}

void Experiment::on_reply_delivered(Flow& f) {
  QueryRec& r = rec(f.query);
  SubRequest& s = r.subs[f.sub_index];
  s.ts_reply_arrived = sim_.now();
  if (++r.q.replies_received == cfg_.cluster.fan_out && r.q.counted) ++completed_;
  bool missed = s.ts_reply_arrived > r.q.deadline_us;
  leaves_[s.leaf].note_reply(missed);
  if (cfg_.policy.kind == PolicyKind::Pegasus) {
    pegasus_.observe(sim_.now(), s.ts_reply_arrived - s.ts_sent,
                     cfg_.policy.pegasus_window_us);
  }
  if (r.q.counted) {
    ++replies_seen_;
    if (missed) ++replies_late_;
    total_us_.push_back(s.ts_reply_arrived - s.ts_sent);
    reqleg_us_.push_back(s.ts_arrived_leaf - s.ts_sent);
    leafresp_us_.push_back(s.ts_service_end - s.ts_arrived_leaf);
    if (s.granted_state >= 0) ++state_hist_[static_cast<std::size_t>(s.granted_state)];
    if (!s.ecn_seen && !s.retransmitted) ++clean_requests_;
    double slack = static_cast<double>(s.request_slack_us + s.queuing_slack_us);
    slack_sum_us_ += slack;
    if (slack >= 0.25 * static_cast<double>(cfg_.cluster.budgets.compute_us))
      ++slack_quarter_;
    wait_sum_us_ += static_cast<double>(s.ts_service_start - s.ts_arrived_leaf);
    ++sub_count_;
    if (request_log_) {
      std::fprintf(request_log_,
                   "%llu,%u,%llu,%llu,%llu,%llu,%llu,%d,%d,%lld,%lld,%.6g,%.6g,%d\n",
                   static_cast<unsigned long long>(s.query), s.leaf,
                   static_cast<unsigned long long>(s.ts_sent),
                   static_cast<unsigned long long>(s.ts_arrived_leaf),
                   static_cast<unsigned long long>(s.ts_service_start),
                   static_cast<unsigned long long>(s.ts_service_end),
                   static_cast<unsigned long long>(s.ts_reply_arrived), s.ecn_seen ? 1 : 0,
                   s.retransmitted ? 1 : 0, static_cast<long long>(s.request_slack_us),
                   static_cast<long long>(s.queuing_slack_us), s.slowdown,
                   s.granted_state >= 0 ? curve_.ghz(s.granted_state) : curve_.base_ghz(),
                   missed ? 1 : 0);
    }
  }
  maybe_free_query(f.query);
}

void Experiment::on_query_deadline(QueryId qid) {
  // The parent stops waiting: replies still outstanding are dropped for
  // responsiveness and the query's response is degraded.
  QueryRec& r = rec(qid);
  r.deadline_passed = true;
  if (r.q.replies_received < cfg_.cluster.fan_out) {
    r.q.dropped = true;
    if (r.q.counted) ++missed_q_;
  }
  maybe_free_query(qid);
}

void Experiment::maybe_free_query(QueryId qid) {
  QueryRec& r = rec(qid);
  if (!r.deadline_passed || r.q.replies_received < cfg_.cluster.fan_out) return;
  free_slots_.push_back(slot_of_[qid]);
  slot_of_[qid] = UINT32_MAX;
}

void Experiment::pegasus_step() {
  if (pegasus_.window.size() < cfg_.policy.pegasus_min_samples) return;
  std::vector<SimTime> lat;
  lat.reserve(pegasus_.window.size());
  for (const auto& [t, v] : pegasus_.window) lat.push_back(v);
  SimTime p99 = percentile_us(std::move(lat), 0.99);
  int next = pegasus_update(pegasus_, p99, cfg_.cluster.budgets.deadline_us(), curve_,
                            cfg_.policy.pegasus_margin);
  if (next != pegasus_.state_ix) {
    pegasus_.state_ix = next;
    for (LeafServer& l : leaves_) l.set_uniform_state(next);
    // Samples taken at the previous state would bias the next decision.
    pegasus_.window.clear();
  }
}

void Experiment::window_open() {
  for (LeafServer& l : leaves_) {
    l.flush_energy(sim_.now());
    l.set_stats_enabled(true);
  }
  energy_at_open_ = energy_.total_joules();
  access_busy_at_open_ = net_->access_busy_us();
}

void Experiment::window_close() {
  for (LeafServer& l : leaves_) {
    l.flush_energy(sim_.now());
    l.set_stats_enabled(false);
  }
  energy_at_close_ = energy_.total_joules();
  access_busy_at_close_ = net_->access_busy_us();
}

RunSummary Experiment::run() {
  sim_.run_until(run_end_);

  RunSummary s;
  s.policy = to_string(cfg_.policy.kind);
  if (cfg_.policy.kind == PolicyKind::TimeTrader) {
    if (!cfg_.policy.edf) s.policy += "-noedf";
    if (!cfg_.policy.use_request_slack) s.policy += "-computeonly";
    if (!cfg_.policy.use_queuing_slack) s.policy += "-requestonly";
  }
  s.benchmark = cfg_.cluster.benchmark;
  s.load = cfg_.run.load;
  s.seed = cfg_.run.seed;
  s.queries = issued_;
  s.completed = completed_;
  s.dropped = 0;  // flows always deliver; late replies degrade, never vanish
  s.in_flight_end = issued_ - completed_;
  std::uint64_t due = issued_ * cfg_.cluster.fan_out;
  std::uint64_t late = replies_late_ + (due - replies_seen_);
  s.miss_reply_frac = due ? static_cast<double>(late) / static_cast<double>(due) : 0.0;
  s.miss_query_frac =
      issued_ ? static_cast<double>(missed_q_) / static_cast<double>(issued_) : 0.0;
  s.replies_due = due;
  s.replies_late = late;
  if (!total_us_.empty()) {
    s.total = latency_percentiles_ms(total_us_);
    s.request_leg = latency_percentiles_ms(reqleg_us_);
    s.leaf_response = latency_percentiles_ms(leafresp_us_);
  }
  s.energy_j = energy_at_close_ - energy_at_open_;
  s.savings_frac = baseline_energy_j_ > 0 ? 1.0 - s.energy_j / baseline_energy_j_
                                          : std::nan("");
  for (const auto& st : curve_.states) s.state_ghz.push_back(st.ghz);
  std::uint64_t hist_total = 0;
  for (std::uint64_t c : state_hist_) hist_total += c;
  for (std::uint64_t c : state_hist_)
    s.state_frac.push_back(hist_total ? static_cast<double>(c) / hist_total : 0.0);
  s.clean_request_frac =
      sub_count_ ? static_cast<double>(clean_requests_) / sub_count_ : 0.0;
  double window = static_cast<double>(window_end_ - window_start_);
  s.access_utilization = window > 0
                             ? (access_busy_at_close_ - access_busy_at_open_) /
                                   (window * static_cast<double>(net_->access_link_count()))
                             : 0.0;
  s.mean_leaf_wait_ms = sub_count_ ? us_to_ms(static_cast<SimTime>(
                                         wait_sum_us_ / static_cast<double>(sub_count_)))
                                   : 0.0;
  s.mean_total_slack_ms =
      sub_count_ ? slack_sum_us_ / static_cast<double>(sub_count_) / 1000.0 : 0.0;
  s.frac_slack_ge_quarter_budget =
      sub_count_ ? static_cast<double>(slack_quarter_) / sub_count_ : 0.0;
  return s;
}

Calibration Experiment::calibrate() {
  sim_.run_until(run_end_);
  Calibration c;
  for (LeafServer& l : leaves_)
    c.avg_peak_wait_us.push_back(static_cast<SimTime>(l.mean_wait_us()));
  if (!reqleg_us_.empty()) {
    c.median_net_latency_us = percentile_us(reqleg_us_, 0.5);
    c.p99_request_leg_us = percentile_us(reqleg_us_, 0.99);
  }
  if (!leafresp_us_.empty()) c.p99_compute_us = percentile_us(leafresp_us_, 0.99);
  c.compute_budget_ok = static_cast<double>(c.p99_compute_us) <=
                        1.10 * static_cast<double>(cfg_.cluster.budgets.compute_us);
  c.request_budget_ok = static_cast<double>(c.p99_request_leg_us) <=
                        1.10 * static_cast<double>(cfg_.cluster.budgets.request_us);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "p99 compute leg %.1f ms (budget %.1f), p99 request leg %.1f ms (budget "
                "%.1f), median net %.3f ms%s",
                us_to_ms(c.p99_compute_us), us_to_ms(cfg_.cluster.budgets.compute_us),
                us_to_ms(c.p99_request_leg_us), us_to_ms(cfg_.cluster.budgets.request_us),
                us_to_ms(c.median_net_latency_us),
                (c.compute_budget_ok && c.request_budget_ok)
                    ? ""
                    : " -- MISMATCH: adjust the service distribution or budgets");
  c.report = buf;
  return c;
}

RunSummary run_experiment(const ExperimentConfig& cfg, const Calibration* calibration,
                          double baseline_energy_j) {
  Experiment e(cfg, calibration);
  if (baseline_energy_j > 0) e.set_baseline_energy(baseline_energy_j);
  return e.run();
}

Calibration calibrate_peak(ExperimentConfig cfg) {
  cfg.policy.kind = PolicyKind::Baseline;
  cfg.run.load = 0.9;
  Experiment e(cfg, nullptr);
  return e.calibrate();
}

MmkResult simulate_mmk(int contexts, double rho, double mean_service_us,
                       std::uint64_t arrivals, std::uint64_t seed,
                       bool deterministic_service) {
  Simulation sim;
  PowerCurve curve;
  curve.states = {{1.2, 1.4}, {2.5, 6.0}};
  curve.idle_w = 1.0;
  PolicyConfig pol;  // baseline, FIFO
  BudgetSet budgets;
  budgets.request_us = budgets.reply_us = budgets.compute_us = budgets.aggregate_us = 25000;
  budgets.total_us = 100000;
  EnergyAccumulator energy(static_cast<std::size_t>((contexts + 1) / 2), &curve);

  std::deque<SubRequest> subs;
  double sum_resp = 0, sum_svc = 0, sum_wait = 0;
  std::uint64_t done = 0;
  std::uint64_t measured = 0;
  const std::uint64_t skip = arrivals / 10;

  LeafServer leaf(&sim, 0, static_cast<std::uint32_t>(contexts), &curve, &pol, &budgets,
                  &energy, 0, [&](SubRequest* s) {
                    ++done;
                    if (done > skip) {
                      sum_resp += static_cast<double>(s->ts_service_end - s->ts_arrived_leaf);
                      sum_wait +=
                          static_cast<double>(s->ts_service_start - s->ts_arrived_leaf);
                      sum_svc += static_cast<double>(s->ts_service_end - s->ts_service_start);
                      ++measured;
                    }
                  });

  RngStream rng(seed, "mmk");
  double mean_gap = mean_service_us / (rho * contexts);
  double t = 0;
  for (std::uint64_t i = 0; i < arrivals; ++i) {
    t += rng.expo(mean_gap);
    double svc = deterministic_service ? mean_service_us : rng.expo(mean_service_us);
    subs.emplace_back();
    SubRequest* s = &subs.back();
    s->query = i;
    s->service_demand_us = static_cast<SimTime>(std::llround(svc)) + 1;
    sim.schedule_at(static_cast<SimTime>(t), "arr", [&leaf, s] { leaf.admit(s); });
  }
  sim.run_all();

  MmkResult r;
  r.mean_response_us = sum_resp / static_cast<double>(measured);
  r.mean_service_us = sum_svc / static_cast<double>(measured);
  r.mean_wait_us = sum_wait / static_cast<double>(measured);
  r.ratio = r.mean_response_us / r.mean_service_us;
  return r;
}

int run_validation_suite(std::FILE* out) {
  int failures = 0;
  auto check = [&](const char* name, bool ok, double got, double want_lo, double want_hi) {
    std::fprintf(out, "%s %s: got %.4f, expected [%.4f, %.4f]\n", ok ? "PASS" : "FAIL", name,
                 got, want_lo, want_hi);
    if (!ok) ++failures;
  };

  {
    double f = erlang_wait_factor(1, 0.9);
    check("erlang M/M/1 rho=0.9 response/service", std::abs(f - 10.0) < 1e-9, f, 10, 10);
    double g = erlang_wait_factor(100, 0.9);
    check("erlang M/M/100 rho=0.9 response/service", g > 1.01 && g < 1.03, g, 1.01, 1.03);
  }
  {
    MmkResult r = simulate_mmk(1, 0.9, 1000.0, 400000, 12345);
    double want = erlang_wait_factor(1, 0.9);
    bool ok = std::abs(r.ratio - want) / want < 0.02;
    check("simulated M/M/1 rho=0.9 vs Erlang-C", ok, r.ratio, want * 0.98, want * 1.02);
  }
  {
    MmkResult r = simulate_mmk(100, 0.9, 1000.0, 400000, 777);
    double want = erlang_wait_factor(100, 0.9);
    bool ok = std::abs(r.ratio - want) / want < 0.02;
    check("simulated M/M/100 rho=0.9 vs Erlang-C", ok, r.ratio, want * 0.98, want * 1.02);
  }
  {
    // M/D/1 at rho=0.5: mean wait = rho/(2(1-rho)) * service.
    MmkResult r = simulate_mmk(1, 0.5, 1000.0, 400000, 4242, true);
    double want = 0.5 / (2 * 0.5) * r.mean_service_us;
    bool ok = std::abs(r.mean_wait_us - want) / want < 0.02;
    check("simulated M/D/1 rho=0.5 mean wait", ok, r.mean_wait_us / want, 0.98, 1.02);
  }
  {
    RngStream rng(99, "p99sum");
    double ratio = p99_of_sum_mc(SumDist::Exponential, 0.99, 2000000, rng);
    check("p99(X+Y)/p99(X) iid exponential", ratio >= 1.40 && ratio <= 1.50, ratio, 1.40,
          1.50);
    double det = p99_of_sum_mc(SumDist::Deterministic, 0.99, 1000, rng);
    check("p99(X+Y)/p99(X) deterministic", det == 2.0, det, 2, 2);
  }
  {
    RngStream rng(7, "expq");
    std::vector<double> v(1000000);
    for (double& x : v) x = rng.expo(1.0);
    double p = percentile(v, 0.99);
    check("p99 of exponential(1) vs -ln(0.01)", std::abs(p - 4.60517) < 0.05, p, 4.555,
          4.655);
  }
  return failures;
}

}  // namespace tailsim
