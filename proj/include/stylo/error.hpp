#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace stylo {

// Exit codes used by the CLI map one-to-one onto these categories.
enum class ErrorKind { config = 2, data = 3, invariant = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Malformed or insufficient input data (corpus records, labels, sizes).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// A contract the library itself is supposed to uphold was violated.
class InvariantError : public Error {
 public:
  explicit InvariantError(const std::string& what) : Error(ErrorKind::invariant, what) {}
};

/// Non-fatal diagnostics collected by operations that degrade gracefully.
struct Warnings {
  std::vector<std::string> messages;
  void add(std::string msg) { messages.push_back(std::move(msg)); }
  bool empty() const { return messages.empty(); }
};

inline void warn(Warnings* sink, std::string msg) {
  if (sink != nullptr) sink->add(std::move(msg));
}

}  // namespace stylo
