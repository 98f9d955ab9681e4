#pragma once

#include <stdexcept>
#include <string>

namespace sdh {

// Inconsistent layer dimensions, mismatched shapes between config and data.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller violated an operation's precondition (empty batch, bad flag, ...).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Internal bookkeeping went out of sync (stale caches and the like).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sdh
