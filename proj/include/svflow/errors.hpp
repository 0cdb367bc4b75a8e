#pragma once

#include <stdexcept>
#include <string>

namespace svf {

// Exit-code contract of the CLI: 1 usage, 2 data, 3 numerical.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace svf
