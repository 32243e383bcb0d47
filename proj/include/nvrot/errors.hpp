#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nvrot {

/// Invalid input: bad spec field, malformed config, too few samples.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mathematically undefined request (zero-length vector, coincident sites).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Work would exceed a configured budget.
class ResourceError : public std::runtime_error {
 public:
  ResourceError(const std::string& what, std::size_t requested, std::size_t limit)
      : std::runtime_error(what + " (requested " + std::to_string(requested) + ", limit " +
                           std::to_string(limit) + ")"),
        requested_(requested),
        limit_(limit) {}

  std::size_t requested() const noexcept { return requested_; }
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t requested_;
  std::size_t limit_;
};

/// A fit could not produce the requested quantity (no revival, singular fit).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File system failure while reading inputs or writing results.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nvrot
