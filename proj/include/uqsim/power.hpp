#ifndef UQSIM_POWER_HPP
#define UQSIM_POWER_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "uqsim/config.hpp"
#include "uqsim/errors.hpp"
#include "uqsim/rng.hpp"
#include "uqsim/stats.hpp"

namespace uqsim {

// Windowed tail-latency observation for one decision interval. A tier value
// <= 0 means the tier saw no completions in the window and is skipped.
struct PmWindowStats {
    double e2e_p99_ms = 0.0;
    std::vector<double> tier_p99_ms;
};

struct PmAction {
    int tier = 0;
    int new_level = 0;  // index into the tier's dvfs ladder
};

// QoS-aware DVFS controller. Partitions the end-to-end tail-latency space
// into buckets of per-tier latency tuples, learns per-bucket preferences,
// and each decision interval either relaxes the slackest tier (one tier at
// a time) or speeds up every tier that lags its target.
class PowerManager {
  public:
    struct Tuple {
        std::vector<double> tier_p99_ms;
        double e2e_p99_ms = 0.0;
    };

    struct Bucket {
        std::vector<Tuple> tuples;                      // chronological; back = most recent
        std::vector<std::vector<double>> failing_list;  // per-tier targets that violated QoS
        double preference = 1.0;
    };

    PowerManager() = default;

    // `ladders_ghz[i]` is tier i's machine dvfs ladder; every tier starts at
    // its maximum frequency.
    PowerManager(PmConfig cfg, std::vector<std::vector<double>> ladders_ghz)
        : cfg_(cfg), ladders_(std::move(ladders_ghz)), buckets_(cfg.bucket_count) {
        levels_.reserve(ladders_.size());
        for (const auto& l : ladders_) levels_.push_back(static_cast<int>(l.size()) - 1);
    }

    // Warm-start from a previous run's learned state.
    void preload_bucket(int bucket, std::vector<double> tier_p99_ms, double e2e_p99_ms,
                        double preference) {
        buckets_[bucket].tuples.push_back(Tuple{std::move(tier_p99_ms), e2e_p99_ms});
        buckets_[bucket].preference =
            std::clamp(preference, cfg_.preference_min, cfg_.preference_max);
    }
    void preload_failing(int bucket, std::vector<double> tier_target_ms) {
        buckets_[bucket].failing_list.push_back(std::move(tier_target_ms));
    }

    std::size_t tier_count() const { return ladders_.size(); }
    int level(std::size_t tier) const { return levels_[tier]; }
    double freq_ghz(std::size_t tier) const { return ladders_[tier][levels_[tier]]; }
    double max_freq_ghz(std::size_t tier) const { return ladders_[tier].back(); }
    const std::vector<Bucket>& buckets() const { return buckets_; }
    bool has_target() const { return has_target_; }
    const std::vector<double>& target_tuple() const { return target_; }
    int target_bucket() const { return target_bucket_; }

    // One decision interval. Returns the frequency actions to apply;
    // `action` describes the step for the PM trace.
    std::vector<PmAction> step(const PmWindowStats& w, RngStream& rng, std::string& action) {
        std::vector<PmAction> actions;
        action = "none";
        const std::size_t n = ladders_.size();
        if (w.e2e_p99_ms < cfg_.qos_target_ms) {
            // Meeting QoS: remember this per-tier profile if no failing tuple
            // of its bucket is componentwise more relaxed.
            Bucket& obs_bucket = buckets_[bucket_of(w.e2e_p99_ms)];
            if (admissible(w.tier_p99_ms, obs_bucket))
                obs_bucket.tuples.push_back(Tuple{w.tier_p99_ms, w.e2e_p99_ms});
            if (has_target_) {
                bump_preference(buckets_[target_bucket_], cfg_.preference_increase);
            } else {
                set_target(bucket_of(w.e2e_p99_ms), Tuple{w.tier_p99_ms, w.e2e_p99_ms});
            }
            if (++success_cycles_ >= cfg_.K) {
                success_cycles_ = 0;
                if (!choose_target(rng)) {
                    fallback_to_max(actions);
                    action = "fallback_max";
                    return actions;
                }
            }
            // Slow down at most one tier, the one with maximum positive
            // slack. The step must fit twice over: the slack must cover its
            // estimated per-tier latency increase, and the predicted
            // end-to-end p99 must stay inside the margin-discounted budget
            // (the linear estimate is useless past the saturation knee, so
            // exploration stops well before it).
            int best = -1;
            double best_slack = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (w.tier_p99_ms[i] <= 0.0) continue;
                double slack = (has_target_ ? target_[i] : w.tier_p99_ms[i]) - w.tier_p99_ms[i];
                if (slack > best_slack) {
                    best_slack = slack;
                    best = static_cast<int>(i);
                }
            }
            if (best >= 0 && levels_[best] > 0) {
                double f_cur = ladders_[best][levels_[best]];
                double f_next = ladders_[best][levels_[best] - 1];
                double est_delta = w.tier_p99_ms[best] * (f_cur / f_next - 1.0);
                bool e2e_headroom =
                    w.e2e_p99_ms + est_delta < cfg_.target_margin * cfg_.qos_target_ms;
                if (best_slack > est_delta && e2e_headroom) {
                    --levels_[best];
                    actions.push_back({best, levels_[best]});
                    action = "slow_down:" + std::to_string(best);
                }
            }
        } else {
            // Violation: demote the target, remember it as failing, re-pick,
            // and speed up every tier that lags its per-tier target.
            success_cycles_ = 0;
            if (has_target_) {
                Bucket& tb = buckets_[target_bucket_];
                bump_preference(tb, cfg_.preference_decrease);
                tb.failing_list.push_back(target_);
                if (!choose_target(rng)) {
                    fallback_to_max(actions);
                    action = "fallback_max";
                    return actions;
                }
            }
            std::string sped;
            for (std::size_t i = 0; i < n; ++i) {
                bool lagging = !has_target_ ||
                               (w.tier_p99_ms[i] > 0.0 && w.tier_p99_ms[i] > target_[i]);
                if (lagging && levels_[i] + 1 < static_cast<int>(ladders_[i].size())) {
                    ++levels_[i];
                    actions.push_back({static_cast<int>(i), levels_[i]});
                    if (!sped.empty()) sped += "+";
                    sped += std::to_string(i);
                }
            }
            action = sped.empty() ? "violation" : "speed_up:" + sped;
        }
        return actions;
    }

    // Draws a bucket with probability proportional to preference among
    // buckets holding an admissible tuple; within the bucket the most
    // recently admitted admissible tuple becomes the per-tier QoS target.
    // Returns false if no bucket qualifies (the caller falls back to max
    // frequency on all tiers).
    bool choose_target(RngStream& rng) {
        std::vector<std::pair<int, const Tuple*>> eligible;
        double total = 0.0;
        for (std::size_t b = 0; b < buckets_.size(); ++b) {
            const Tuple* t = latest_admissible(buckets_[b]);
            if (t) {
                eligible.emplace_back(static_cast<int>(b), t);
                total += buckets_[b].preference;
            }
        }
        if (eligible.empty()) return false;
        double u = rng.uniform01() * total;
        double acc = 0.0;
        for (const auto& [b, t] : eligible) {
            acc += buckets_[b].preference;
            if (u <= acc) {
                set_target(b, *t);
                return true;
            }
        }
        set_target(eligible.back().first, *eligible.back().second);
        return true;
    }

  private:
    int bucket_of(double e2e_p99_ms) const {
        double width = 2.0 * cfg_.qos_target_ms / cfg_.bucket_count;
        int idx = static_cast<int>(e2e_p99_ms / width);
        return std::clamp(idx, 0, cfg_.bucket_count - 1);
    }

    // "No more relaxed than any failing tuple": rejected iff some failing
    // tuple f satisfies f_i <= t_i for all tiers.
    static bool admissible(const std::vector<double>& t, const Bucket& b) {
        for (const auto& f : b.failing_list) {
            bool dominated = true;
            for (std::size_t i = 0; i < t.size(); ++i)
                if (f[i] > t[i]) { dominated = false; break; }
            if (dominated) return false;
        }
        return true;
    }

    const Tuple* latest_admissible(const Bucket& b) const {
        for (auto it = b.tuples.rbegin(); it != b.tuples.rend(); ++it)
            if (admissible(it->tier_p99_ms, b)) return &*it;
        return nullptr;
    }

    void bump_preference(Bucket& b, double factor) {
        b.preference = std::clamp(b.preference * factor, cfg_.preference_min, cfg_.preference_max);
    }

    // The recorded profile met QoS at e2e < target; scaling it toward the
    // margin-discounted QoS budget yields per-tier targets with real slack
    // (raw observations would leave nothing to relax against), while the
    // margin keeps the operating point away from the violation boundary.
    void set_target(int bucket, const Tuple& t) {
        target_bucket_ = bucket;
        double budget = cfg_.target_margin * cfg_.qos_target_ms;
        double scale = t.e2e_p99_ms > 0.0 ? budget / t.e2e_p99_ms : 1.0;
        if (scale < 1.0) scale = 1.0;
        target_.assign(t.tier_p99_ms.size(), 0.0);
        for (std::size_t i = 0; i < t.tier_p99_ms.size(); ++i)
            target_[i] = t.tier_p99_ms[i] * scale;
        has_target_ = true;
    }

    void fallback_to_max(std::vector<PmAction>& actions) {
        for (std::size_t i = 0; i < ladders_.size(); ++i) {
            int max_level = static_cast<int>(ladders_[i].size()) - 1;
            if (levels_[i] != max_level) {
                levels_[i] = max_level;
                actions.push_back({static_cast<int>(i), max_level});
            }
        }
        has_target_ = false;
    }

    PmConfig cfg_;
    std::vector<std::vector<double>> ladders_;
    std::vector<int> levels_;
    std::vector<Bucket> buckets_;
    std::vector<double> target_;
    int target_bucket_ = -1;
    bool has_target_ = false;
    int success_cycles_ = 0;
};

// One PM trace row per decision window.
struct PmTraceRow {
    double window_end_s = 0.0;
    double e2e_p99_ms = 0.0;
    std::vector<double> tier_p99_ms;
    std::vector<double> tier_freq_ghz;
    std::string action;
};

struct PmTrace {
    std::vector<std::string> tier_names;  // sorted by instance name
    std::vector<PmTraceRow> rows;
};

inline std::string pm_trace_to_csv(const PmTrace& t) {
    std::string out = "window_end_s,e2e_p99_ms";
    for (const auto& n : t.tier_names) out += "," + n + "_p99_ms";
    for (const auto& n : t.tier_names) out += "," + n + "_freq_ghz";
    out += ",action\n";
    char buf[64];
    for (const auto& r : t.rows) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f", r.window_end_s, r.e2e_p99_ms);
        out += buf;
        for (double v : r.tier_p99_ms) {
            std::snprintf(buf, sizeof(buf), ",%.6f", v);
            out += buf;
        }
        for (double v : r.tier_freq_ghz) {
            std::snprintf(buf, sizeof(buf), ",%.3f", v);
            out += buf;
        }
        out += "," + r.action + "\n";
    }
    return out;
}

}  // namespace uqsim

#endif
