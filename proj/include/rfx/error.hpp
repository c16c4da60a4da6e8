#pragma once

#include <stdexcept>
#include <string>

namespace rfx {

enum class ErrorKind {
  kInvalidInput,      // rejected argument or malformed document
  kInstanceTooLarge,  // enumeration guard tripped
  kBudgetExceeded,    // episode budget cap hit
  kResampleLimit,     // pseudoreward rejection sampling gave up
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::kInvalidInput, what);
}

}  // namespace rfx
