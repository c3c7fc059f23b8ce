#pragma once

#include <stdexcept>
#include <string>

namespace imvc {

// Malformed input files (bad numbers, wrong column counts, ...).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatches between matrices that must chain.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Out-of-range or otherwise invalid arguments.
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A documented precondition was violated by the caller.
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace imvc
