#pragma once

#include <stdexcept>
#include <string>

namespace qpc {

/// Malformed or inconsistent input data (bad shapes, non-finite entries,
/// unbalanced panels, parse failures).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical precondition failed: rank deficiency, singular matrices,
/// degenerate variances.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RankDeficientError : public NumericalError {
public:
    RankDeficientError(const std::string& what, long block)
        : NumericalError(what), block_(block) {}

    /// Index of the covariate block whose inclusion made the design singular.
    long block() const noexcept { return block_; }

private:
    long block_;
};

}  // namespace qpc
