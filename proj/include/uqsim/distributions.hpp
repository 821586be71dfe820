#ifndef UQSIM_DISTRIBUTIONS_HPP
#define UQSIM_DISTRIBUTIONS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "uqsim/errors.hpp"
#include "uqsim/rng.hpp"

namespace uqsim {

// Empirical PDF over processing time: buckets (upper_bound_us, probability)
// with strictly increasing bounds. Sampling uses the inverse CDF with
// uniform interpolation inside a bucket, so a single bucket
// {(100us, 1.0)} yields draws in (0, 100].
struct HistogramPdf {
    std::vector<double> upper_bound_us;
    std::vector<double> probability;
    std::vector<double> cumulative;  // filled by finalize()

    void finalize() {
        cumulative.resize(probability.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < probability.size(); ++i) {
            acc += probability[i];
            cumulative[i] = acc;
        }
    }

    // Throws if this is not a valid distribution. `key` names the
    // offending (service, stage, frequency) in the message.
    void validate(const std::string& key) const {
        if (upper_bound_us.empty())
            throw SchemaError("histogram " + key + ": empty");
        double prev = 0.0;
        double sum = 0.0;
        for (std::size_t i = 0; i < upper_bound_us.size(); ++i) {
            if (upper_bound_us[i] <= prev)
                throw SchemaError("histogram " + key + ": upper bounds not strictly increasing at row " +
                                  std::to_string(i));
            if (probability[i] < 0.0 || probability[i] > 1.0)
                throw ProbabilityError("histogram " + key + ": probability out of [0,1] at row " +
                                       std::to_string(i));
            prev = upper_bound_us[i];
            sum += probability[i];
        }
        if (std::abs(sum - 1.0) > 1e-6)
            throw ProbabilityError("histogram " + key + ": probabilities sum to " + std::to_string(sum));
    }

    double sample(RngStream& rng) const {
        double u = rng.uniform01() * cumulative.back();
        auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
        std::size_t idx = static_cast<std::size_t>(it - cumulative.begin());
        if (idx >= cumulative.size()) idx = cumulative.size() - 1;
        double lo = idx == 0 ? 0.0 : upper_bound_us[idx - 1];
        double hi = upper_bound_us[idx];
        double cum_lo = idx == 0 ? 0.0 : cumulative[idx - 1];
        double mass = cumulative[idx] - cum_lo;
        double frac = mass > 0.0 ? (u - cum_lo) / mass : 1.0;
        if (frac <= 0.0) frac = std::numeric_limits<double>::min();
        return lo + frac * (hi - lo);
    }

    double mean() const {
        double m = 0.0;
        double lo = 0.0;
        for (std::size_t i = 0; i < upper_bound_us.size(); ++i) {
            m += probability[i] * 0.5 * (lo + upper_bound_us[i]);
            lo = upper_bound_us[i];
        }
        return m;
    }

    bool operator==(const HistogramPdf& o) const {
        return upper_bound_us == o.upper_bound_us && probability == o.probability;
    }
};

enum class AnalyticKind { exponential, deterministic, lognormal };

// A closed-form processing-time law, declared inline in service.json as an
// alternative to a profiled histogram.
struct AnalyticDist {
    AnalyticKind kind = AnalyticKind::exponential;
    double a = 0.0;  // mean_us | us | mu
    double b = 0.0;  // unused  | unused | sigma

    double sample(RngStream& rng) const {
        switch (kind) {
            case AnalyticKind::exponential: return rng.exponential(a);
            case AnalyticKind::deterministic: return a;
            case AnalyticKind::lognormal: return rng.lognormal(a, b);
        }
        return a;
    }

    double mean() const {
        switch (kind) {
            case AnalyticKind::exponential: return a;
            case AnalyticKind::deterministic: return a;
            case AnalyticKind::lognormal: return std::exp(a + 0.5 * b * b);
        }
        return a;
    }

    bool operator==(const AnalyticDist&) const = default;
};

}  // namespace uqsim

#endif
