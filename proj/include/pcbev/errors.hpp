#pragma once

#include <stdexcept>

namespace pcbev {

/// Malformed file contents (bad size, magic, or header).
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions, unknown names, or invalid grid/weight setup.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace pcbev
