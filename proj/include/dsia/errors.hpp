#pragma once

#include <stdexcept>
#include <string>

namespace dsia {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Snapshot document failed schema or invariant checks. `path` names the
// offending location, e.g. "rooms.kitchen.oven.methods[1].params[0].kind".
class SnapshotError : public Error {
 public:
  SnapshotError(std::string path, const std::string& message)
      : Error(path.empty() ? message : path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Machine-instruction text without any `{...}` block.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Stage-1 output with no usable JSON object.
class AnalysisError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (e.g. executing an unverified
// action). Always signals a bug in the calling code.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& message, bool retryable = false, int status = 0)
      : Error(message), retryable_(retryable), status_(status) {}
  bool retryable() const noexcept { return retryable_; }
  int status() const noexcept { return status_; }

 private:
  bool retryable_;
  int status_;
};

class CorpusError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsia
