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

#include "tailsim/network.hpp"

#include <cassert>
#include <cmath>

namespace tailsim {

namespace {
// Entity ids for link endpoints (debugging only).
constexpr int kTorBase = 1 << 20;
constexpr int kAggBase = 2 << 20;
constexpr int kCoreBase = 3 << 20;

std::uint64_t pack(FlowId fid, std::uint32_t ix, std::uint32_t hop) {
  return static_cast<std::uint64_t>(fid) | (static_cast<std::uint64_t>(ix) << 24) |
         (static_cast<std::uint64_t>(hop) << 48);
}
void unpack(std::uint64_t code, FlowId* fid, std::uint32_t* ix, std::uint32_t* hop) {
  *fid = static_cast<FlowId>(code & 0xffffff);
  *ix = static_cast<std::uint32_t>((code >> 24) & 0xffffff);
  *hop = static_cast<std::uint32_t>(code >> 48);
}
}  // namespace

FatTree::FatTree(Simulation* sim, const NetworkConfig& cfg, std::uint32_t racks,
                 std::uint32_t servers_per_rack, std::uint64_t seed)
    : sim_(sim), cfg_(cfg), seed_(seed) {
  if (racks % cfg.pods != 0)
    throw std::invalid_argument("racks must divide evenly into pods");
  racks_ = racks;
  spr_ = servers_per_rack;
  racks_per_pod_ = racks / cfg.pods;
  n_servers_ = racks * servers_per_rack;
  build_topology(racks, servers_per_rack);
}

std::uint16_t FatTree::add_link(int src, int dst, double gbps, bool access) {
  Link l;
  l.src_entity = src;
  l.dst_entity = dst;
  l.rate_bpus = gbps * 1000.0;  // bits per microsecond
  l.queue.capacity_bytes = cfg_.buffer_bytes;
  l.queue.ecn_threshold_bytes = cfg_.ecn_threshold_bytes;
  l.is_access = access;
  links_.push_back(std::move(l));
  if (links_.size() > 60000) throw std::runtime_error("too many links");
  return static_cast<std::uint16_t>(links_.size() - 1);
}

void FatTree::build_topology(std::uint32_t racks, std::uint32_t servers_per_rack) {
  const double tor_up_gbps =
      servers_per_rack * cfg_.link_gbps / (cfg_.oversubscription * cfg_.aggs_per_pod);
  const double agg_up_gbps = tor_up_gbps * racks_per_pod_ /
                             (cfg_.oversubscription * cfg_.core_switches);

  server_up_.resize(n_servers_);
  server_down_.resize(n_servers_);
  for (std::uint32_t s = 0; s < n_servers_; ++s) {
    std::uint32_t t = s / spr_;
    server_up_[s] = add_link(static_cast<int>(s), kTorBase + static_cast<int>(t),
                             cfg_.link_gbps, true);
    server_down_[s] = add_link(kTorBase + static_cast<int>(t), static_cast<int>(s),
                               cfg_.link_gbps, true);
  }

  std::uint32_t n_aggs = cfg_.pods * cfg_.aggs_per_pod;
  tor_up_.assign(racks, {});
  agg_down_.assign(n_aggs, {});
  for (std::uint32_t t = 0; t < racks; ++t) {
    std::uint32_t pod = t / racks_per_pod_;
    for (std::uint32_t j = 0; j < cfg_.aggs_per_pod; ++j) {
      std::uint32_t a = pod * cfg_.aggs_per_pod + j;
      tor_up_[t].push_back(add_link(kTorBase + static_cast<int>(t),
                                    kAggBase + static_cast<int>(a), tor_up_gbps, false));
    }
  }
  for (std::uint32_t a = 0; a < n_aggs; ++a) {
    std::uint32_t pod = a / cfg_.aggs_per_pod;
    agg_down_[a].resize(racks_per_pod_);
    for (std::uint32_t r = 0; r < racks_per_pod_; ++r) {
      std::uint32_t t = pod * racks_per_pod_ + r;
      agg_down_[a][r] = add_link(kAggBase + static_cast<int>(a),
                                 kTorBase + static_cast<int>(t), tor_up_gbps, false);
    }
  }

  agg_up_.assign(n_aggs, {});
  core_down_.assign(cfg_.core_switches, {});
  for (std::uint32_t c = 0; c < cfg_.core_switches; ++c) core_down_[c].resize(n_aggs);
  for (std::uint32_t a = 0; a < n_aggs; ++a) {
    for (std::uint32_t c = 0; c < cfg_.core_switches; ++c) {
      agg_up_[a].push_back(add_link(kAggBase + static_cast<int>(a),
                                    kCoreBase + static_cast<int>(c), agg_up_gbps, false));
      core_down_[c][a] = add_link(kCoreBase + static_cast<int>(c),
                                  kAggBase + static_cast<int>(a), agg_up_gbps, false);
    }
  }
}

void FatTree::compute_path(Flow& f) const {
  f.path.clear();
  std::uint32_t rs = f.src / spr_, rd = f.dst / spr_;
  f.path.push_back(server_up_[f.src]);
  if (rs != rd) {
    std::uint64_t h = hash_draw(seed_, "ecmp", flows_started_, f.src * 131071u + f.dst);
    std::uint32_t pod_s = rs / racks_per_pod_, pod_d = rd / racks_per_pod_;
    if (pod_s == pod_d) {
      std::uint32_t j = h % cfg_.aggs_per_pod;
      std::uint32_t a = pod_s * cfg_.aggs_per_pod + j;
      f.path.push_back(tor_up_[rs][j]);
      f.path.push_back(agg_down_[a][rd % racks_per_pod_]);
    } else {
      std::uint32_t j_up = h % cfg_.aggs_per_pod;
      std::uint32_t c = (h / cfg_.aggs_per_pod) % cfg_.core_switches;
      std::uint32_t j_dn = (h / (cfg_.aggs_per_pod * cfg_.core_switches)) % cfg_.aggs_per_pod;
      std::uint32_t a_up = pod_s * cfg_.aggs_per_pod + j_up;
      std::uint32_t a_dn = pod_d * cfg_.aggs_per_pod + j_dn;
      f.path.push_back(tor_up_[rs][j_up]);
      f.path.push_back(agg_up_[a_up][c]);
      f.path.push_back(core_down_[c][a_dn]);
      f.path.push_back(agg_down_[a_dn][rd % racks_per_pod_]);
    }
  }
  f.path.push_back(server_down_[f.dst]);
}

std::size_t FatTree::path_hops(NodeId src, NodeId dst) const {
  std::uint32_t rs = src / spr_, rd = dst / spr_;
  if (rs == rd) return 2;
  return (rs / racks_per_pod_ == rd / racks_per_pod_) ? 4 : 6;
}

FlowId FatTree::start_flow(FlowKind kind, NodeId src, NodeId dst, std::uint64_t bytes,
                           QueryId query, std::uint32_t sub_index, bool has_owner,
                           DeliverFn on_deliver) {
  FlowId fid;
  if (!free_flows_.empty()) {
    fid = free_flows_.back();
    free_flows_.pop_back();
  } else {
    fid = static_cast<FlowId>(flows_.size());
    flows_.emplace_back();
    deliver_.emplace_back();
  }
  Flow& f = flows_[fid];
  f = Flow{};
  f.id = fid;
  f.kind = kind;
  f.src = src;
  f.dst = dst;
  f.size_bytes = bytes;
  f.chunk_bytes = kind == FlowKind::Background ? cfg_.bg_chunk_bytes : cfg_.chunk_bytes;
  f.query = query;
  f.sub_index = sub_index;
  f.has_owner = has_owner;
  f.start_us = sim_->now();
  f.n_chunks = static_cast<std::uint32_t>((bytes + f.chunk_bytes - 1) / f.chunk_bytes);
  f.rx_bitmap.assign((f.n_chunks + 63) / 64, 0);
  f.active = true;
  deliver_[fid] = std::move(on_deliver);
  compute_path(f);
  ++flows_started_;
  inject_next(fid);
  return fid;
}

void FatTree::inject_next(FlowId fid) {
  Flow& f = flows_[fid];
  if (!f.active || f.frozen) return;
  while (f.cursor < f.n_chunks && f.chunk_received(f.cursor)) ++f.cursor;
  if (f.cursor >= f.n_chunks) return;
  std::uint32_t ix = f.cursor++;
  injected_bytes_ += f.chunk_size_at(ix);
  ++f.in_net_chunks;
  enqueue_chunk(fid, ix, 0);
  // Background flows inject at a fixed paced rate rather than self-clocking
  // at line rate, standing in for a transport that yields under contention.
  if (flows_[fid].kind == FlowKind::Background && cfg_.bg_pace_gbps > 0 &&
      !flows_[fid].pace_timer_live) {
    flows_[fid].pace_timer_live = true;
    SimTime gap = static_cast<SimTime>(static_cast<double>(flows_[fid].chunk_bytes) * 8.0 /
                                       (cfg_.bg_pace_gbps * 1000.0));
    if (gap == 0) gap = 1;
    sim_->schedule_in(gap, "bgpace", [this, fid] {
      flows_[fid].pace_timer_live = false;
      inject_next(fid);
      maybe_release(fid);
    });
  }
}

void FatTree::enqueue_chunk(FlowId fid, std::uint32_t chunk_ix, std::uint32_t hop) {
  Flow& f = flows_[fid];
  Link& l = links_[f.path[hop]];
  std::uint32_t bytes = f.chunk_size_at(chunk_ix);
  switch (l.queue.classify(bytes)) {
    case EnqueueResult::Dropped:
      dropped_bytes_ += bytes;
      --f.in_net_chunks;
      on_drop(fid);
      maybe_release(fid);
      return;
    case EnqueueResult::AcceptedWithEcn:
      f.ecn_marked = true;
      break;
    case EnqueueResult::Accepted:
      break;
  }
  l.queue.occupancy_bytes += bytes;
  l.fifo.push_back(Chunk{fid, chunk_ix, bytes});
  if (!l.transmitting) begin_tx(f.path[hop]);
}

void FatTree::begin_tx(std::uint16_t link_ix) {
  Link& l = links_[link_ix];
  assert(!l.fifo.empty());
  l.transmitting = true;
  double tx_us = static_cast<double>(l.fifo.front().bytes) * 8.0 / l.rate_bpus;
  l.stats.busy_us += tx_us;
  SimTime dt = static_cast<SimTime>(std::llround(tx_us));
  if (dt == 0) dt = 1;
  sim_->schedule_in(dt, "tx", [this, link_ix] { tx_done(link_ix); });
}

void FatTree::tx_done(std::uint16_t link_ix) {
  Link& l = links_[link_ix];
  Chunk c = l.fifo.front();
  l.fifo.pop_front();
  l.queue.occupancy_bytes -= c.bytes;
  Flow& f = flows_[c.flow];
  std::uint32_t hop = 0;
  while (f.path[hop] != link_ix) ++hop;  // paths are <= 6 hops
  std::uint64_t code = pack(c.flow, c.index, hop + 1);
  sim_->schedule_in(cfg_.propagation_us, "hop", [this, code] {
    FlowId fid;
    std::uint32_t ix, h;
    unpack(code, &fid, &ix, &h);
    chunk_arrived(fid, ix, h);
  });
  // Self-clocked pacing: the source injects the next chunk when the previous
  // one has left the access link (background flows run on their own timer).
  if (hop == 0 && !(f.kind == FlowKind::Background && cfg_.bg_pace_gbps > 0))
    inject_next(c.flow);
  if (!l.fifo.empty()) begin_tx(link_ix);
  else l.transmitting = false;
}

void FatTree::chunk_arrived(FlowId fid, std::uint32_t chunk_ix, std::uint32_t hop) {
  Flow& f = flows_[fid];
  if (hop < f.path.size()) {
    enqueue_chunk(fid, chunk_ix, hop);
    return;
  }
  // Arrived at the destination server.
  delivered_bytes_ += f.chunk_size_at(chunk_ix);
  --f.in_net_chunks;
  if (f.active && !f.chunk_received(chunk_ix)) {
    f.mark_received(chunk_ix);
    if (++f.received == f.n_chunks) finish_flow(fid);
  }
  maybe_release(fid);
}

void FatTree::on_drop(FlowId fid) {
  Flow& f = flows_[fid];
  if (f.frozen || !f.active) return;
  f.frozen = true;
  if (!f.retx_scheduled) {
    f.retx_scheduled = true;
    sim_->schedule_in(cfg_.rto_min_us, "retx", [this, fid] { resume_flow(fid); });
  }
}

void FatTree::resume_flow(FlowId fid) {
  Flow& f = flows_[fid];
  f.retx_scheduled = false;
  if (!f.active || !f.frozen) {
    maybe_release(fid);
    return;
  }
  f.frozen = false;
  f.retransmitted = true;
  // Re-inject from the first chunk the receiver does not have.
  f.cursor = 0;
  inject_next(fid);
}

void FatTree::finish_flow(FlowId fid) {
  Flow& f = flows_[fid];
  f.delivered_us = sim_->now();
  f.active = false;
  if (flow_log_) {
    const char* k = f.kind == FlowKind::Request ? "request"
                    : f.kind == FlowKind::Reply ? "reply"
                                                : "background";
    std::fprintf(flow_log_, "%u,%s,%llu,%llu,%llu,%d,%d\n", f.id, k,
                 static_cast<unsigned long long>(f.size_bytes),
                 static_cast<unsigned long long>(f.start_us),
                 static_cast<unsigned long long>(f.delivered_us), f.ecn_marked ? 1 : 0,
                 f.retransmitted ? 1 : 0);
  }
  if (deliver_[fid]) {
    DeliverFn cb = std::move(deliver_[fid]);
    deliver_[fid] = nullptr;
    cb(f);
  }
}

void FatTree::maybe_release(FlowId fid) {
  Flow& f = flows_[fid];
  if (!f.active && !f.retx_scheduled && !f.pace_timer_live && f.in_net_chunks == 0 &&
      f.id != kNoFlow) {
    f.id = kNoFlow;
    free_flows_.push_back(fid);
  }
}

double FatTree::access_busy_us() const {
  double busy = 0;
  for (const Link& l : links_)
    if (l.is_access) busy += l.stats.busy_us;
  return busy;
}

std::size_t FatTree::access_link_count() const {
  std::size_t n = 0;
  for (const Link& l : links_)
    if (l.is_access) ++n;
  return n;
}

}  // namespace tailsim
