#pragma once

#include <stdexcept>
#include <string>

namespace pairwhite {

// Invalid user input: configuration, manifest, spec values. The CLI maps
// these to exit status 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Data-dependent failures discovered while fitting or reading files.
// The CLI maps these to exit status 3.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pairwhite
