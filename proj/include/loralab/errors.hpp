#pragma once

#include <stdexcept>
#include <string>

namespace loralab {

// Base for every error thrown by the library. The CLI maps InvalidInput,
// InvalidParameter and InvalidArchitecture to exit code 2 and everything
// else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidArchitecture : public Error {
 public:
  using Error::Error;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace loralab
