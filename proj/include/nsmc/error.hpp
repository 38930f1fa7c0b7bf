#pragma once

#include <stdexcept>
#include <string>

namespace nsmc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CycleDetected : Error {
    using Error::Error;
};
struct UnknownVariable : Error {
    using Error::Error;
};
struct MissingVariable : Error {
    using Error::Error;
};
struct InvalidParameters : Error {
    using Error::Error;
};
struct InvalidOrder : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};
struct EmptyDataset : Error {
    using Error::Error;
};
struct DegenerateWeights : Error {
    using Error::Error;
};

}  // namespace nsmc
