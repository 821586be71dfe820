#ifndef UQSIM_STATS_HPP
#define UQSIM_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "uqsim/errors.hpp"

namespace uqsim {

// Nearest-rank percentile, p in (0,100): the ceil(p/100 * n)-th smallest
// sample. Well-defined for heavy tails and reproducible.
inline double percentile(std::vector<double> samples, double p) {
    if (samples.empty()) throw NoSamplesError("percentile of empty sample set");
    if (p <= 0.0 || p >= 100.0) throw InvalidParameterError("percentile p must be in (0,100)");
    std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * samples.size()));
    if (rank < 1) rank = 1;
    std::nth_element(samples.begin(), samples.begin() + (rank - 1), samples.end());
    return samples[rank - 1];
}

inline double mean_of(std::span<const double> samples) {
    if (samples.empty()) throw NoSamplesError("mean of empty sample set");
    return std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
}

// ---------------------------------------------------------------------------
// Closed-form oracles used for desk validation.
// ---------------------------------------------------------------------------

// M/M/1 sojourn time: mean 1/(mu-lambda), p99 = -ln(0.01)/(mu-lambda).
// Rates are per-microsecond (or any consistent unit).
inline std::pair<double, double> oracle_mm1(double lambda, double mu) {
    if (lambda <= 0 || mu <= 0) throw InvalidParameterError("oracle_mm1: rates must be > 0");
    if (lambda >= mu) throw UnstableSystemError("oracle_mm1: lambda >= mu");
    double mean = 1.0 / (mu - lambda);
    double p99 = -std::log(0.01) / (mu - lambda);
    return {mean, p99};
}

// Erlang-C probability that an arrival waits in an M/M/k queue.
inline double oracle_erlang_c(double lambda, double mu, int k) {
    if (lambda <= 0 || mu <= 0 || k < 1) throw InvalidParameterError("oracle_erlang_c: bad parameters");
    double a = lambda / mu;
    if (a >= k) throw UnstableSystemError("oracle_erlang_c: lambda >= k*mu");
    double term = 1.0;  // a^i / i!
    double sum = 1.0;   // i = 0
    for (int i = 1; i < k; ++i) {
        term *= a / i;
        sum += term;
    }
    term *= a / k;                       // a^k / k!
    double last = term * k / (k - a);    // a^k/k! * k/(k-a)
    return last / (sum + last);
}

// p-th quantile of the max of n iid Exp(mu) variables:
// solves (1 - e^{-mu t})^n = p.
inline double oracle_fanout_max(double mu, int n, double p) {
    if (mu <= 0 || n < 1 || p <= 0 || p >= 1)
        throw InvalidParameterError("oracle_fanout_max: bad parameters");
    return -std::log(1.0 - std::pow(p, 1.0 / n)) / mu;
}

// ---------------------------------------------------------------------------
// Per-run latency recording
// ---------------------------------------------------------------------------

// Collects end-to-end and per-tier latencies. Samples whose request arrived
// during warmup are excluded from all reported aggregates. The window
// vectors feed the power manager (window = decision interval) and are
// drained at each decision tick.
class LatencyRecorder {
  public:
    LatencyRecorder() = default;
    LatencyRecorder(double warmup_us, double horizon_us, std::size_t n_tiers, bool record_per_tier)
        : warmup_us_(warmup_us), horizon_us_(horizon_us), record_per_tier_(record_per_tier),
          tier_us_(n_tiers), window_tier_us_(n_tiers), wait_total_(n_tiers, 0),
          wait_waited_(n_tiers, 0) {}

    void set_window_active(bool on) { window_active_ = on; }

    void record_request(double arrival_us, double completion_us, double e2e_us,
                        std::span<const double> tier_sojourn_us, bool tracked_path_hit) {
        if (window_active_) {
            window_e2e_us_.push_back(e2e_us);
            for (std::size_t i = 0; i < tier_sojourn_us.size(); ++i)
                if (tier_sojourn_us[i] > 0.0) window_tier_us_[i].push_back(tier_sojourn_us[i]);
        }
        if (arrival_us < warmup_us_) return;
        e2e_us_.push_back(e2e_us);
        arrival_us_.push_back(arrival_us);
        completion_us_.push_back(completion_us);
        if (tracked_path_hit) ++tracked_hits_;
        ++completed_;
        if (completion_us <= horizon_us_) ++completed_in_horizon_;
        if (record_per_tier_) {
            for (std::size_t i = 0; i < tier_sojourn_us.size(); ++i)
                if (tier_sojourn_us[i] > 0.0) tier_us_[i].push_back(tier_sojourn_us[i]);
        }
    }

    // First-stage queueing delay at a tier; used for wait-probability checks.
    void record_wait(std::size_t tier, double wait_us) {
        ++wait_total_[tier];
        if (wait_us > 0.0) ++wait_waited_[tier];
    }

    struct Window {
        std::vector<double> e2e_us;
        std::vector<std::vector<double>> tier_us;
    };

    Window drain_window() {
        Window w{std::move(window_e2e_us_), std::move(window_tier_us_)};
        window_e2e_us_.clear();
        window_tier_us_.resize(w.tier_us.size());
        for (auto& v : window_tier_us_) v.clear();
        return w;
    }

    const std::vector<double>& e2e_us() const { return e2e_us_; }
    const std::vector<double>& arrival_us() const { return arrival_us_; }
    const std::vector<double>& completion_us() const { return completion_us_; }
    const std::vector<double>& tier_us(std::size_t tier) const { return tier_us_[tier]; }
    std::uint64_t completed() const { return completed_; }
    // Post-warmup requests that also completed within the run's duration;
    // the basis for achieved throughput (backlog drained afterwards does
    // not count as sustained).
    std::uint64_t completed_in_horizon() const { return completed_in_horizon_; }
    std::uint64_t tracked_hits() const { return tracked_hits_; }

    double wait_fraction(std::size_t tier) const {
        if (wait_total_[tier] == 0) throw NoSamplesError("no wait samples for tier");
        return static_cast<double>(wait_waited_[tier]) / static_cast<double>(wait_total_[tier]);
    }

    double e2e_percentile(double p) const { return percentile(e2e_us_, p); }
    double e2e_mean() const { return mean_of(e2e_us_); }

  private:
    double warmup_us_ = 0.0;
    double horizon_us_ = std::numeric_limits<double>::infinity();
    bool record_per_tier_ = true;
    bool window_active_ = false;
    std::vector<double> e2e_us_;
    std::vector<double> arrival_us_;
    std::vector<double> completion_us_;
    std::vector<std::vector<double>> tier_us_;
    std::vector<double> window_e2e_us_;
    std::vector<std::vector<double>> window_tier_us_;
    std::vector<std::uint64_t> wait_total_;
    std::vector<std::uint64_t> wait_waited_;
    std::uint64_t completed_ = 0;
    std::uint64_t completed_in_horizon_ = 0;
    std::uint64_t tracked_hits_ = 0;
};

// ---------------------------------------------------------------------------
// Sweep results and exports
// ---------------------------------------------------------------------------

struct SweepRow {
    double offered_qps = 0.0;
    double achieved_qps = 0.0;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double p99_ms = 0.0;
    std::vector<double> tier_p99_ms;  // aligned with SweepResult::tier_names
    bool saturated = false;
};

struct SweepResult {
    std::vector<std::string> tier_names;  // sorted by instance name
    std::vector<SweepRow> rows;
};

namespace detail {
inline std::string fmt_ms(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}
}  // namespace detail

inline std::string sweep_to_csv(const SweepResult& r) {
    std::string out = "offered_qps,achieved_qps,mean_ms,p95_ms,p99_ms";
    for (const auto& t : r.tier_names) out += ",p99_" + t + "_ms";
    out += ",saturated\n";
    for (const auto& row : r.rows) {
        out += detail::fmt_ms(row.offered_qps) + "," + detail::fmt_ms(row.achieved_qps) + "," +
               detail::fmt_ms(row.mean_ms) + "," + detail::fmt_ms(row.p95_ms) + "," +
               detail::fmt_ms(row.p99_ms);
        for (double v : row.tier_p99_ms) out += "," + detail::fmt_ms(v);
        out += row.saturated ? ",1\n" : ",0\n";
    }
    return out;
}

inline nlohmann::json sweep_to_json(const SweepResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows) {
        nlohmann::json tiers = nlohmann::json::object();
        for (std::size_t i = 0; i < r.tier_names.size(); ++i)
            tiers["p99_" + r.tier_names[i] + "_ms"] = row.tier_p99_ms[i];
        rows.push_back({{"offered_qps", row.offered_qps},
                        {"achieved_qps", row.achieved_qps},
                        {"mean_ms", row.mean_ms},
                        {"p95_ms", row.p95_ms},
                        {"p99_ms", row.p99_ms},
                        {"tiers", tiers},
                        {"saturated", row.saturated}});
    }
    return {{"results", rows}};
}

enum class ExportFormat { csv, json };

inline void export_sweep(const SweepResult& r, ExportFormat fmt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    if (fmt == ExportFormat::csv) out << sweep_to_csv(r);
    else out << sweep_to_json(r).dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace uqsim

#endif
