#pragma once

#include <stdexcept>
#include <string>

namespace graphdoc {

// Error categories map onto CLI exit codes: usage 1, data 2, check 3.
struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape/dimension mismatches are a kind of data error.
struct dim_error : data_error {
    using data_error::data_error;
};

// A verification step (gradient check, invariant probe) failed.
struct check_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace graphdoc
