#pragma once

#include <stdexcept>
#include <string>

namespace kinlab {

// Parameter-ball radius too small to hold a required witness; carries the
// radius that would have sufficed.
struct RadiusTooSmallError : std::runtime_error {
    double required_radius;
    explicit RadiusTooSmallError(double required)
        : std::runtime_error("parameter radius too small; required at least " +
                             std::to_string(required)),
          required_radius(required) {}
};

// The evaluation map failed to be a submersion where the family construction
// guarantees one.
struct SubmersionFailureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A conditional Monte Carlo estimator accepted no samples.
struct InsufficientSamplesError : std::runtime_error {
    double acceptance_rate;
    explicit InsufficientSamplesError(double rate)
        : std::runtime_error("no samples accepted (acceptance rate " +
                             std::to_string(rate) + ")"),
          acceptance_rate(rate) {}
};

struct ResolutionTooCoarseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace kinlab
