#pragma once

#include <stdexcept>
#include <string>

namespace nuggetkit {

// Broken precondition or invariant on the caller's side.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Network, auth or backend failure after the retry budget is exhausted.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(const std::string& what, int attempts)
      : std::runtime_error(what), attempts_(attempts) {}
  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

// Model output that does not contain the fields a template declares.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string raw)
      : std::runtime_error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// Malformed record files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic that has no defined value for the given input.
class StatsError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A pipeline stage that cannot produce any output for a topic.
class StageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nuggetkit
