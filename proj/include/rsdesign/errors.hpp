#pragma once

#include <stdexcept>
#include <string>

namespace rsdesign {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// numerics
struct NotPositiveDefinite : Error {
  using Error::Error;
};
struct Singular : Error {
  using Error::Error;
};
struct DomainError : Error {
  using Error::Error;
};

// design / criteria
struct ModelTooLarge : Error {
  using Error::Error;
};
struct SingularInformation : Error {
  using Error::Error;
};

// search
struct InitializationFailed : Error {
  using Error::Error;
};

// configuration and file formats
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace rsdesign
