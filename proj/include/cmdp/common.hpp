#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace cmdp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Structural tolerance used for equalities that hold exactly in exact arithmetic.
inline constexpr double kStructTol = 1e-9;
// Tolerance used when comparing against independent brute-force oracles.
inline constexpr double kOracleTol = 1e-6;

// Width within which two agent utilities count as a tie for best responses.
inline constexpr double kTieTol = 1e-11;

inline constexpr int kInstanceSchemaVersion = 1;
inline constexpr int kPolicySchemaVersion = 1;

// Invalid input data (instance, policy, arguments). Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown inside a solver. Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An enumeration exceeded its configured cap. Maps to CLI exit code 3.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cmdp
