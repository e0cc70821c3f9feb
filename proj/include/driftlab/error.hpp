#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace driftlab {

// Every failure raised by the library derives from Error, so callers can
// catch one type and still read a meaningful message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Raised when the sampled weight cannot be differentiated reliably on the grid.
class UnderResolved : public Error {
 public:
  using Error::Error;
};

// Raised by the iterative eigensolver; carries the best Ritz data available.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<double> ritz,
                 std::vector<double> residuals)
      : Error(what), ritz_values(std::move(ritz)), residual_norms(std::move(residuals)) {}

  std::vector<double> ritz_values;
  std::vector<double> residual_norms;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace driftlab
