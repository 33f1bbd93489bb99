#pragma once

#include <stdexcept>
#include <string>

namespace bitplan {

// Base error carrying a stable machine-readable code (e.g. "E_SHAPE").
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

// Bad user input: malformed files, missing paths, out-of-domain values.
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace bitplan
