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

#include "tailsim/leaf.hpp"

#include <cmath>

namespace tailsim {

LeafServer::LeafServer(Simulation* sim, NodeId id, std::uint32_t contexts,
                       const PowerCurve* curve, const PolicyConfig* policy,
                       const BudgetSet* budgets, EnergyAccumulator* energy,
                       std::size_t core_base, CompleteFn on_complete)
    : sim_(sim),
      id_(id),
      curve_(curve),
      policy_(policy),
      budgets_(budgets),
      energy_(energy),
      core_base_(core_base),
      on_complete_(std::move(on_complete)) {
  ctxs_.resize(contexts);
  cores_.resize((contexts + 1) / 2);
  for (std::uint32_t i = 0; i < contexts; ++i) ctxs_[i].core = i / 2;
  for (Core& c : cores_) {
    c.cur_state = curve_->base_state();
    c.seg_state = c.cur_state;
    c.seg_start = sim_->now();
  }
  scale_ = policy_->scale_initial;
}

void LeafServer::admit(SubRequest* sub) {
  SimTime now = sim_->now();
  sub->ts_arrived_leaf = now;
  sub->request_slack_us =
      request_slack(sub->ecn_seen, sub->retransmitted, budgets_->request_us, *policy_);
  sub->edf_key = now + budgets_->compute_us + static_cast<SimTime>(sub->request_slack_us);
  int ctx = pick_idle_context();
  if (ctx >= 0) {
    dispatch(sub, static_cast<std::uint32_t>(ctx));
    return;
  }
  if (edf()) {
    edf_queue_.emplace(std::make_pair(sub->edf_key, admit_seq_++), sub);
  } else {
    fifo_queue_.push_back(sub);
  }
}

SubRequest* LeafServer::peek_next() const {
  if (edf()) return edf_queue_.empty() ? nullptr : edf_queue_.begin()->second;
  return fifo_queue_.empty() ? nullptr : fifo_queue_.front();
}

int LeafServer::pick_idle_context() const {
  // Spread across cores: prefer an idle context on a fully idle core.
  int fallback = -1;
  for (std::uint32_t i = 0; i < ctxs_.size(); ++i) {
    if (ctxs_[i].busy) continue;
    if (cores_[ctxs_[i].core].busy_ctx == 0) return static_cast<int>(i);
    if (fallback < 0) fallback = static_cast<int>(i);
  }
  return fallback;
}

void LeafServer::dispatch(SubRequest* sub, std::uint32_t ctx_ix) {
  SimTime now = sim_->now();
  Ctx& ctx = ctxs_[ctx_ix];
  Core& core = cores_[ctx.core];

  SimTime wait = now - sub->ts_arrived_leaf;
  if (stats_enabled_) {
    wait_sum_us_ += static_cast<double>(wait);
    ++wait_n_;
  }
  sub->queuing_slack_us = queuing_slack(avg_peak_wait_us_, wait);
  sub->ts_service_start = now;

  double slowdown = 0;
  int granted = curve_->base_state();
  if (policy_->kind == PolicyKind::TimeTrader) {
    DurUs req = policy_->use_request_slack ? sub->request_slack_us : 0;
    DurUs que = policy_->use_queuing_slack ? sub->queuing_slack_us : 0;
    slowdown = slowdown_factor(req, que, scale_, budgets_->compute_us,
                               policy_->rapl_latency_us);
    granted = curve_->select_state(slowdown);
  } else if (policy_->kind == PolicyKind::Pegasus && uniform_state_ >= 0) {
    granted = uniform_state_;
  }
  sub->slowdown = slowdown;
  sub->granted_state = granted;

  advance_core(ctx.core);
  ctx.busy = true;
  ctx.sub = sub;
  ctx.granted_slowdown = slowdown;
  ctx.remaining_demand_us = static_cast<double>(sub->service_demand_us);
  ctx.last_advance = now;
  if (core.busy_ctx++ == 0) energy_boundary(ctx.core);
  if (policy_->kind == PolicyKind::TimeTrader) decide_core_state(ctx.core);
  reschedule_completion(ctx_ix);
}

void LeafServer::advance_core(std::uint32_t core_ix) {
  SimTime now = sim_->now();
  double rate = curve_->service_rate(cores_[core_ix].cur_state);
  for (std::uint32_t i = core_ix * 2; i < ctxs_.size() && i < core_ix * 2 + 2; ++i) {
    Ctx& c = ctxs_[i];
    if (!c.busy) continue;
    c.remaining_demand_us -= static_cast<double>(now - c.last_advance) * rate;
    if (c.remaining_demand_us < 0) c.remaining_demand_us = 0;
    c.last_advance = now;
  }
}

void LeafServer::reschedule_completion(std::uint32_t ctx_ix) {
  Ctx& ctx = ctxs_[ctx_ix];
  double rate = curve_->service_rate(cores_[ctx.core].cur_state);
  SimTime dt = static_cast<SimTime>(std::ceil(ctx.remaining_demand_us / rate));
  std::uint64_t gen = ++ctx.gen;
  sim_->schedule_in(dt, "svc", [this, ctx_ix, gen] {
    if (ctxs_[ctx_ix].busy && ctxs_[ctx_ix].gen == gen) complete(ctx_ix);
  });
}

void LeafServer::set_core_target(std::uint32_t core_ix, int desired) {
  Core& core = cores_[core_ix];
  if (desired == core.cur_state) {
    core.pending_state = -1;  // cancels any in-flight transition
    ++core.gen;
    return;
  }
  if (desired == core.pending_state) return;
  advance_core(core_ix);
  core.pending_state = desired;
  std::uint64_t gen = ++core.gen;
  sim_->schedule_in(curve_->actuation_us, "freq", [this, core_ix, gen] {
    Core& c = cores_[core_ix];
    if (c.gen != gen || c.pending_state < 0) return;
    advance_core(core_ix);  // progress made at the old frequency
    c.cur_state = c.pending_state;
    c.pending_state = -1;
    energy_boundary(core_ix);
    for (std::uint32_t i = core_ix * 2; i < ctxs_.size() && i < core_ix * 2 + 2; ++i)
      if (ctxs_[i].busy) reschedule_completion(i);
  });
}

void LeafServer::decide_core_state(std::uint32_t core_ix) {
  Core& core = cores_[core_ix];
  if (core.busy_ctx == 0) return;
  // Worst of the contexts' individual slowdown factors.
  double min_slowdown = -1;
  for (std::uint32_t i = core_ix * 2; i < ctxs_.size() && i < core_ix * 2 + 2; ++i) {
    if (!ctxs_[i].busy) continue;
    if (min_slowdown < 0 || ctxs_[i].granted_slowdown < min_slowdown)
      min_slowdown = ctxs_[i].granted_slowdown;
  }
  set_core_target(core_ix, curve_->select_state(min_slowdown < 0 ? 0 : min_slowdown));
}

void LeafServer::complete(std::uint32_t ctx_ix) {
  Ctx& ctx = ctxs_[ctx_ix];
  Core& core = cores_[ctx.core];
  advance_core(ctx.core);
  SubRequest* sub = ctx.sub;
  sub->ts_service_end = sim_->now();
  ctx.busy = false;
  ctx.sub = nullptr;
  ++ctx.gen;
  if (--core.busy_ctx == 0) {
    energy_boundary(ctx.core);
  } else if (policy_->kind == PolicyKind::TimeTrader) {
    decide_core_state(ctx.core);
  }
  // Serve the next pending request on this context before reporting, so the
  // context never idles while work is queued.
  SubRequest* next = nullptr;
  if (edf()) {
    if (!edf_queue_.empty()) {
      auto it = edf_queue_.begin();
      next = it->second;
      edf_queue_.erase(it);
    }
  } else if (!fifo_queue_.empty()) {
    next = fifo_queue_.front();
    fifo_queue_.pop_front();
  }
  if (next) dispatch(next, ctx_ix);
  on_complete_(sub);
}

void LeafServer::set_uniform_state(int state_ix) {
  uniform_state_ = state_ix;
  for (std::uint32_t c = 0; c < cores_.size(); ++c) set_core_target(c, state_ix);
}

void LeafServer::control_tick() {
  if (policy_->kind != PolicyKind::TimeTrader || !policy_->scale_adaptation) {
    window_replies_ = 0;
    window_missed_ = 0;
    return;
  }
  double miss = window_replies_
                    ? static_cast<double>(window_missed_) / static_cast<double>(window_replies_)
                    : 0.0;
  scale_ = scale_update(scale_, miss, *policy_);
  window_replies_ = 0;
  window_missed_ = 0;
}

void LeafServer::energy_boundary(std::uint32_t core_ix) {
  Core& core = cores_[core_ix];
  SimTime now = sim_->now();
  if (now > core.seg_start) {
    energy_->add(core_base_ + core_ix, core.seg_start, now, core.seg_busy, core.seg_state);
  }
  core.seg_start = now;
  core.seg_busy = core.busy_ctx > 0;
  core.seg_state = core.cur_state;
}

void LeafServer::flush_energy(SimTime now) {
  for (std::uint32_t c = 0; c < cores_.size(); ++c) {
    Core& core = cores_[c];
    if (now > core.seg_start) {
      energy_->add(core_base_ + c, core.seg_start, now, core.seg_busy, core.seg_state);
      core.seg_start = now;
      core.seg_busy = core.busy_ctx > 0;
      core.seg_state = core.cur_state;
    }
  }
}

}  // namespace tailsim
