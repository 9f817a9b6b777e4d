#pragma once

#include <stdexcept>
#include <string>

namespace threatlens {

// Exit-code contract, stable for scripting:
//   0 success, 1 validation failure, 2 data error, 3 training divergence.

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 1;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 2;
};

struct ParseError : DataError {
  using DataError::DataError;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 3;
};

}  // namespace threatlens
