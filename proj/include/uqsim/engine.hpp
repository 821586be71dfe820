#ifndef UQSIM_ENGINE_HPP
#define UQSIM_ENGINE_HPP

#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include "uqsim/errors.hpp"

namespace uqsim {

// Simulated time, in microseconds.
using SimTime = double;

enum class EventKind : std::uint8_t {
    job_arrival,          // a: job id
    stage_batch_complete, // a: invocation id
    network_rx_complete,  // a: job id, b: machine idx
    thread_wakeup,        // a: instance idx
    dvfs_change,          // a: instance idx, b: level idx
    pm_decision_tick,     // -
    client_arrival_tick,  // -
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::job_arrival: return "job_arrival";
        case EventKind::stage_batch_complete: return "stage_batch_complete";
        case EventKind::network_rx_complete: return "network_rx_complete";
        case EventKind::thread_wakeup: return "thread_wakeup";
        case EventKind::dvfs_change: return "dvfs_change";
        case EventKind::pm_decision_tick: return "pm_decision_tick";
        case EventKind::client_arrival_tick: return "client_arrival_tick";
    }
    return "?";
}

struct Event {
    SimTime ts = 0.0;
    std::uint64_t seq = 0;  // assigned at scheduling; ties at equal ts break FIFO
    EventKind kind = EventKind::job_arrival;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
};

struct EventLater {
    bool operator()(const Event& x, const Event& y) const {
        if (x.ts != y.ts) return x.ts > y.ts;
        return x.seq > y.seq;
    }
};

// Time-ordered priority queue over (timestamp, sequence). pop() never
// returns an event earlier than the last popped one.
class EventQueue {
  public:
    void schedule(SimTime ts, EventKind kind, std::uint32_t a = 0, std::uint32_t b = 0) {
        if (ts < watermark_)
            throw CausalityError("event " + std::string(to_string(kind)) + " scheduled at t=" +
                                 std::to_string(ts) + "us, before current clock " +
                                 std::to_string(watermark_) + "us");
        queue_.push(Event{ts, next_seq_++, kind, a, b});
    }

    bool empty() const { return queue_.empty(); }
    std::size_t size() const { return queue_.size(); }
    const Event& peek() const { return queue_.top(); }

    Event pop() {
        Event e = queue_.top();
        queue_.pop();
        if (e.ts < watermark_)
            throw CausalityError("event queue returned a past event");  // clock monotonicity
        watermark_ = e.ts;
        return e;
    }

    SimTime now() const { return watermark_; }

  private:
    std::priority_queue<Event, std::vector<Event>, EventLater> queue_;
    std::uint64_t next_seq_ = 0;
    SimTime watermark_ = 0.0;
};

}  // namespace uqsim

#endif
