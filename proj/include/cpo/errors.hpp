#pragma once

#include <stdexcept>

namespace cpo {

// Input data that cannot be used: unreadable files, malformed rows,
// series that violate their invariants, empty break sets.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A well-formed problem with no usable numerical answer: degenerate risk
// matrices, infeasible weight bounds, grids too coarse for the bounds.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cpo
