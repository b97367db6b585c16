#ifndef MSSL_ERRORS_HPP_
#define MSSL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace mssl {

// Shapes of the inputs do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A matrix that must be positive definite failed its Cholesky factorization.
class NotPositiveDefinite : public std::domain_error {
 public:
  explicit NotPositiveDefinite(const std::string& what)
      : std::domain_error(what + ": not positive definite") {}
};

// Any other violated precondition (bad hyperparameters, infeasible configs).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Reading or writing a file failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mssl

#endif  // MSSL_ERRORS_HPP_
