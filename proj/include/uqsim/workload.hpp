#ifndef UQSIM_WORKLOAD_HPP
#define UQSIM_WORKLOAD_HPP

#include <optional>
#include <string>

#include "uqsim/config.hpp"
#include "uqsim/engine.hpp"
#include "uqsim/rng.hpp"

namespace uqsim {

// Open-loop arrival generation: the next arrival time depends only on the
// load pattern and the stream's own rng, never on completions.
class ArrivalProcess {
  public:
    ArrivalProcess() = default;
    ArrivalProcess(LoadPattern pattern, InterarrivalKind kind, std::uint64_t seed, double duration_s)
        : pattern_(std::move(pattern)),
          kind_(kind),
          rng_(seed),
          duration_us_(duration_s * 1e6) {}

    // Draws the next arrival timestamp (us). Rate changes take effect at the
    // draw following them; gaps are never rescaled mid-flight.
    SimTime next_arrival() {
        auto t = try_next();
        if (!t) throw EndOfTraceError("arrival pattern exhausted at t=" + std::to_string(now_));
        return *t;
    }

    std::optional<SimTime> try_next() {
        double qps = pattern_.rate_at(now_ / 1e6);
        double gap_us = kind_ == InterarrivalKind::exponential ? rng_.exponential(1e6 / qps)
                                                               : 1e6 / qps;
        double t = now_ + gap_us;
        if (t >= duration_us_) return std::nullopt;
        now_ = t;
        return t;
    }

    SimTime now() const { return now_; }

  private:
    LoadPattern pattern_;
    InterarrivalKind kind_ = InterarrivalKind::exponential;
    RngStream rng_;
    double now_ = 0.0;
    double duration_us_ = 0.0;
};

// Reads a `time_s,qps` CSV into a piecewise-constant load pattern.
inline LoadPattern load_trace(const std::string& path) {
    LoadPattern p;
    p.kind = LoadPattern::Kind::trace;
    p.trace_file = path;
    p.points = detail::load_trace_csv(path);
    return p;
}

}  // namespace uqsim

#endif
