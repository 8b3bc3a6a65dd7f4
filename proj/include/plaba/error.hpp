#pragma once

#include <stdexcept>
#include <string>

namespace plaba {

// Input violates a documented contract (bad record, bad flag value,
// broken invariant). The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failure. Exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Remote generation backend failure. Exit code 2.
class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class AuthError : public BackendError {
 public:
  using BackendError::BackendError;
};

}  // namespace plaba
