#ifndef UQSIM_SERVICE_MODEL_HPP
#define UQSIM_SERVICE_MODEL_HPP

#include <string>

#include "uqsim/config.hpp"
#include "uqsim/errors.hpp"
#include "uqsim/rng.hpp"

namespace uqsim {

// One stage invocation's processing time. The base draw comes from the
// (service, stage, frequency) source: an exact-frequency histogram when one
// was profiled, otherwise the nominal-frequency source scaled by
// f_nominal/f. Linear runtime terms (per returned event, per byte read) are
// charged once per invocation, so a batching stage amortizes them across
// the whole batch.
inline double sample_processing_time(const ProcessingSpec& proc, const HistogramTable& table,
                                     const std::string& service, int stage_id, double freq_ghz,
                                     double nominal_ghz, double slope_us_per_event,
                                     double slope_us_per_byte, int batch_size, int bytes_per_job,
                                     RngStream& rng) {
    const double scale = nominal_ghz / freq_ghz;
    double base;
    if (proc.kind == ProcessingSpec::Kind::analytic) {
        base = proc.analytic.sample(rng) * scale;
    } else {
        auto exact = table.find({service, stage_id, freq_ghz});
        if (exact != table.end()) {
            base = exact->second.sample(rng);
        } else {
            auto nominal = table.find({service, stage_id, nominal_ghz});
            if (nominal == table.end())
                throw MissingDistributionError("no histogram for " +
                                               HistKey{service, stage_id, freq_ghz}.str());
            base = nominal->second.sample(rng) * scale;
        }
    }
    double extra = slope_us_per_event * batch_size +
                   slope_us_per_byte * static_cast<double>(batch_size) * bytes_per_job;
    return base + extra * scale;
}

}  // namespace uqsim

#endif
