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
#include <cstdio>
#include <functional>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "tailsim/time.hpp"

namespace tailsim {

/// Thrown when an event is scheduled before the current clock. This is a
/// programming error; runs abort rather than silently reordering time.
class SchedulingInPast : public std::logic_error {
 public:
  SchedulingInPast(SimTime t, SimTime now)
      : std::logic_error("event scheduled at t=" + std::to_string(t) +
                         " before clock " + std::to_string(now)) {}
};

/// Single-threaded discrete-event engine. Events fire in (fire_time, sequence)
/// lexicographic order; sequence is the insertion order, so ties are FIFO.
class Simulation {
 public:
  using Action = std::function<void()>;

  SimTime now() const { return now_; }

  std::uint64_t schedule_at(SimTime t, const char* kind, Action fn) {
    if (t < now_) throw SchedulingInPast(t, now_);
    std::uint64_t seq = next_seq_++;
    queue_.push(Ev{t, seq, kind, std::move(fn)});
    return seq;
  }

  std::uint64_t schedule_in(SimTime dt, const char* kind, Action fn) {
    return schedule_at(now_ + dt, kind, std::move(fn));
  }

  /// Executes every event with fire_time <= t_end, then sets the clock to
  /// t_end. Returns the final clock.
  SimTime run_until(SimTime t_end) {
    drain(t_end);
    if (t_end > now_) now_ = t_end;
    return now_;
  }

  /// Runs until the queue is empty; the clock stops at the last event.
  SimTime run_all() {
    drain(UINT64_MAX);
    return now_;
  }

  bool empty() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }

  /// Optional event-trace dump: one line per fired event (time, sequence, kind).
  void set_trace(std::FILE* sink) { trace_ = sink; }

 private:
  struct Ev {
    SimTime t;
    std::uint64_t seq;
    const char* kind;
    Action fn;
  };
  struct Later {
    bool operator()(const Ev& a, const Ev& b) const {
      if (a.t != b.t) return a.t > b.t;
      return a.seq > b.seq;
    }
  };

  void drain(SimTime t_end) {
    while (!queue_.empty()) {
      const Ev& top = queue_.top();
      if (top.t > t_end) break;
      Ev ev = std::move(const_cast<Ev&>(top));
      queue_.pop();
      now_ = ev.t;
      if (trace_) trace_line(ev);
      ev.fn();
    }
  }

  void trace_line(const Ev& ev) {
    std::fprintf(trace_, "%llu %llu %s\n", static_cast<unsigned long long>(ev.t),
                 static_cast<unsigned long long>(ev.seq), ev.kind ? ev.kind : "?");
  }

  std::priority_queue<Ev, std::vector<Ev>, Later> queue_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::FILE* trace_ = nullptr;
};

}  // namespace tailsim
