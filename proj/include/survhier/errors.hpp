#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace survhier {

// Error taxonomy. The CLI maps these onto exit codes:
//   config_error -> 2, data-shaped errors -> 3, numerical_error -> 4.
struct error : std::runtime_error {
    explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration: invalid flags, infeasible scenario, bad grids.
struct config_error : error {
    using error::error;
};

// Malformed or inconsistent input data (files, shapes, ranges).
struct data_error : error {
    using error::error;
};

// Structural misuse of layouts/indices (out-of-range flat index, malformed
// membership, mismatched layouts).
struct structural_error : data_error {
    using data_error::data_error;
};

// Invalid numeric domain for an argument (var <= 0, non-finite input).
struct domain_error : data_error {
    using data_error::data_error;
};

// Instance exceeds a capacity contract (e.g. exact enumeration limits).
struct capacity_error : data_error {
    using data_error::data_error;
};

// Requested operation is defined but not supported for this input
// (e.g. exact enumeration with censored subjects).
struct unsupported_error : data_error {
    using data_error::data_error;
};

// A metric whose denominator is empty/zero on this input.
struct undefined_metric_error : data_error {
    using data_error::data_error;
};

// Non-finite intermediates, impossible denominators, failed factorizations.
// Carries optional context (coordinate id) and a partial ELBO trace when the
// failure happened inside an iterative fit.
struct numerical_error : error {
    explicit numerical_error(const std::string& msg, long coordinate = -1)
        : error(msg), coordinate_id(coordinate) {}
    long coordinate_id = -1;
    std::vector<double> partial_elbo_trace;
};

} // namespace survhier
