#pragma once

#include <cstdint>

#include "firmgrowth/errors.hpp"

namespace firmgrowth {

// (m, V) pair of a lognormal law: ln x ~ N(m, V).
struct LognormalParams {
    double log_mean = 0.0;
    double log_variance = 0.0;

    void validate() const {
        if (log_variance < 0.0)
            throw ConfigError("lognormal log-variance must be >= 0");
    }
};

// One firm-level growth record for a single step: size and largest unit
// are taken before the step, growth is the log size change over the step.
struct GrowthObservation {
    double size = 0.0;            // S, pre-step
    double growth = 0.0;          // g = ln(S_after / S_before)
    std::uint64_t unit_count = 0; // K
    double largest_unit = 0.0;    // xi_max, pre-step
    double effective_units = 1.0; // K_e = S / xi_max
};

} // namespace firmgrowth
