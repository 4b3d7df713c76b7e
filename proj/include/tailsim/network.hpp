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
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "tailsim/rng.hpp"
#include "tailsim/sim.hpp"
#include "tailsim/time.hpp"
#include "tailsim/workload.hpp"

namespace tailsim {

// Simplified chunk-level fat-tree network. Flows are cut into fixed-size
// chunks that traverse store-and-forward output-queued ports. Ports mark ECN
// above a watermark and drop at capacity; a dropped flow freezes and
// re-injects its unacknowledged remainder RTO_min after the drop. This
// reproduces in-cast collisions and the ECN/retransmit signals consumed by
// the leaf policies without a full TCP state machine.

struct NetworkConfig {
  double link_gbps = 10.0;       // server access links
  SimTime propagation_us = 20;   // per hop
  std::uint64_t buffer_bytes = 4ull << 20;      // per output port
  std::uint64_t ecn_threshold_bytes = 120 << 10;
  std::uint32_t chunk_bytes = 1500;      // OLDI flows
  std::uint32_t bg_chunk_bytes = 65536;  // background flows
  double bg_pace_gbps = 4.0;             // fixed injection rate of background flows
  double oversubscription = 2.0;         // per level above ToR
  SimTime reply_jitter_us = 1000;
  SimTime rto_min_us = 20 * kUsPerMs;
  std::uint32_t pods = 2;
  std::uint32_t aggs_per_pod = 2;
  std::uint32_t core_switches = 2;
};

enum class FlowKind : std::uint8_t { Request, Reply, Background };

using FlowId = std::uint32_t;
constexpr FlowId kNoFlow = std::numeric_limits<FlowId>::max();

struct Flow {
  FlowId id = kNoFlow;
  FlowKind kind = FlowKind::Background;
  NodeId src = 0, dst = 0;
  std::uint64_t size_bytes = 0;
  std::uint32_t chunk_bytes = 1500;
  bool ecn_marked = false;     // sticky once set
  bool retransmitted = false;  // sticky once set
  SimTime start_us = 0;
  SimTime delivered_us = 0;
  // Owning sub-request context, if any.
  QueryId query = 0;
  std::uint32_t sub_index = 0;
  bool has_owner = false;

  // Transport state.
  std::vector<std::uint16_t> path;   // link indices
  std::uint32_t n_chunks = 0;
  std::uint32_t cursor = 0;          // next chunk to inject
  std::uint32_t received = 0;        // delivered chunk count
  std::vector<std::uint64_t> rx_bitmap;
  std::uint32_t in_net_chunks = 0;   // copies currently traversing the network
  bool frozen = false;               // waiting out an RTO after a drop
  bool retx_scheduled = false;
  bool pace_timer_live = false;      // fixed-rate injection timer in flight
  bool active = false;

  std::uint32_t chunk_size_at(std::uint32_t ix) const {
    std::uint64_t off = static_cast<std::uint64_t>(ix) * chunk_bytes;
    std::uint64_t left = size_bytes - off;
    return static_cast<std::uint32_t>(left < chunk_bytes ? left : chunk_bytes);
  }
  bool chunk_received(std::uint32_t ix) const {
    return rx_bitmap[ix >> 6] & (1ull << (ix & 63));
  }
  void mark_received(std::uint32_t ix) { rx_bitmap[ix >> 6] |= 1ull << (ix & 63); }
};

enum class EnqueueResult { Accepted, AcceptedWithEcn, Dropped };

/// Output port: drop-tail byte queue with an ECN watermark.
struct PortQueue {
  std::uint64_t capacity_bytes = 0;
  std::uint64_t ecn_threshold_bytes = 0;
  std::uint64_t occupancy_bytes = 0;

  EnqueueResult classify(std::uint32_t chunk_bytes) const {
    if (occupancy_bytes + chunk_bytes > capacity_bytes) return EnqueueResult::Dropped;
    if (occupancy_bytes + chunk_bytes > ecn_threshold_bytes)
      return EnqueueResult::AcceptedWithEcn;
    return EnqueueResult::Accepted;
  }
};

struct Chunk {
  FlowId flow;
  std::uint32_t index;
  std::uint32_t bytes;
};

struct LinkStats {
  double busy_us = 0;  // transmit time accumulated
};

class FatTree {
 public:
  using DeliverFn = std::function<void(Flow&)>;

  FatTree(Simulation* sim, const NetworkConfig& cfg, std::uint32_t racks,
          std::uint32_t servers_per_rack, std::uint64_t seed);

  /// Starts a flow; `on_deliver` fires once when the last chunk arrives.
  FlowId start_flow(FlowKind kind, NodeId src, NodeId dst, std::uint64_t bytes,
                    QueryId query, std::uint32_t sub_index, bool has_owner,
                    DeliverFn on_deliver);

  Flow& flow(FlowId id) { return flows_[id]; }
  std::uint32_t nodes() const { return n_servers_; }

  /// Hop count of the path between two servers (for latency math in tests).
  std::size_t path_hops(NodeId src, NodeId dst) const;

  // Byte conservation counters.
  std::uint64_t injected_bytes() const { return injected_bytes_; }
  std::uint64_t delivered_bytes() const { return delivered_bytes_; }
  std::uint64_t dropped_bytes() const { return dropped_bytes_; }
  std::uint64_t in_flight_bytes() const {
    return injected_bytes_ - delivered_bytes_ - dropped_bytes_;
  }

  /// Cumulative transmit-busy microseconds over all server access links, and
  /// their count; windowed utilization is a caller-side difference.
  double access_busy_us() const;
  std::size_t access_link_count() const;

  /// Per-flow log sink (optional): id, kind, size, start, end, ecn, retx.
  void set_flow_log(std::FILE* sink) { flow_log_ = sink; }

  std::uint64_t flows_started() const { return flows_started_; }

 private:
  struct Link {
    int src_entity;  // encoded entity id (for debugging)
    int dst_entity;
    double rate_bpus;  // bits per microsecond
    PortQueue queue;
    std::deque<Chunk> fifo;
    bool transmitting = false;
    bool is_access = false;
    LinkStats stats;
  };

  void build_topology(std::uint32_t racks, std::uint32_t servers_per_rack);
  std::uint16_t add_link(int src, int dst, double gbps, bool access);
  void compute_path(Flow& f) const;
  void inject_next(FlowId fid);
  void enqueue_chunk(FlowId fid, std::uint32_t chunk_ix, std::uint32_t hop);
  void begin_tx(std::uint16_t link_ix);
  void tx_done(std::uint16_t link_ix);
  void chunk_arrived(FlowId fid, std::uint32_t chunk_ix, std::uint32_t hop);
  void on_drop(FlowId fid);
  void resume_flow(FlowId fid);
  void finish_flow(FlowId fid);
  void maybe_release(FlowId fid);

  Simulation* sim_;
  NetworkConfig cfg_;
  std::uint64_t seed_;
  std::uint32_t n_servers_ = 0;
  std::uint32_t racks_ = 0, spr_ = 0, racks_per_pod_ = 0;

  std::vector<Link> links_;
  // Link index lookup.
  std::vector<std::uint16_t> server_up_, server_down_;       // per server
  std::vector<std::vector<std::uint16_t>> tor_up_, tor_down_;  // [tor][agg-in-pod] / [tor]->servers? no: down to server is server_down_
  std::vector<std::vector<std::uint16_t>> agg_up_, agg_down_;  // [agg][core] / [agg][tor-in-pod]
  std::vector<std::vector<std::uint16_t>> core_down_;          // [core][pod] -> per-agg? see cpp

  std::vector<Flow> flows_;
  std::vector<DeliverFn> deliver_;
  std::vector<FlowId> free_flows_;

  std::uint64_t injected_bytes_ = 0, delivered_bytes_ = 0, dropped_bytes_ = 0;
  std::uint64_t flows_started_ = 0;
  SimTime stats_t0_ = 0;
  std::FILE* flow_log_ = nullptr;
};

}  // namespace tailsim
