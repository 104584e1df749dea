#pragma once

#include <stdexcept>
#include <string>

namespace acorsis {

/// Base class for all errors thrown by the library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input sizes disagree (y vs X rows, empty matrix, n too small).
struct dimension_error : error {
    using error::error;
};

/// A design column has zero sample variance; carries the 1-based column index.
struct zero_variance_error : error {
    int column;
    explicit zero_variance_error(int col)
        : error("zero-variance column " + std::to_string(col)), column(col) {}
    zero_variance_error(int col, const std::string& what) : error(what), column(col) {}
};

/// Binary response is degenerate: single class, or entries outside {0,1}.
struct degenerate_response_error : error {
    using error::error;
};

/// Variable or effect index outside the valid range.
struct index_error : error {
    using error::error;
};

/// Screening fraction gamma or target size d is unusable.
struct invalid_gamma_error : error {
    using error::error;
};

/// An iterative solver failed to converge and no fallback applied.
struct nonconvergence_error : error {
    using error::error;
};

/// Malformed CSV input; carries a human-readable location.
struct csv_error : error {
    using error::error;
};

/// Malformed scenario configuration file.
struct config_error : error {
    using error::error;
};

/// Every replicate of a simulation cell failed.
struct simulation_error : error {
    using error::error;
};

} // namespace acorsis
