// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_ERRORS_HPP
#define PLAIM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace plaim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PLAIM_DEFINE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  };

PLAIM_DEFINE_ERROR(DomainError)
PLAIM_DEFINE_ERROR(InvalidParamError)
PLAIM_DEFINE_ERROR(NearOptimumError)
PLAIM_DEFINE_ERROR(DegeneratePointError)
PLAIM_DEFINE_ERROR(EstimationError)
PLAIM_DEFINE_ERROR(MissingConstantError)
PLAIM_DEFINE_ERROR(IntegrationError)
PLAIM_DEFINE_ERROR(InvalidInputError)
PLAIM_DEFINE_ERROR(FitError)
PLAIM_DEFINE_ERROR(DegenerateTrajectoryError)

#undef PLAIM_DEFINE_ERROR

/// Malformed or out-of-range configuration. Line and column are 0 when not applicable.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0, int column = 0)
      : Error(line > 0 ? what + " (line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ")"
                       : what),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace plaim

#endif  // PLAIM_ERRORS_HPP
